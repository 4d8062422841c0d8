#include "hydrocal/trajectory.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace hydrocal {

double best_nse_delta(std::optional<double> previous_best, double new_best) {
  const double before = previous_best ? std::max(*previous_best, 0.0) : 0.0;
  return std::max(new_best, 0.0) - before;
}

void annotate_improvements(std::vector<ToolEvent>& events) {
  std::optional<double> best;
  for (auto& e : events) {
    e.improved = false;
    e.delta_nse = 0.0;
    if (e.tool != kToolEvaluate || !e.ok || !e.best_nse) continue;
    if (!best || *e.best_nse > *best) {
      e.improved = true;
      e.delta_nse = best_nse_delta(best, *e.best_nse);
      best = e.best_nse;
    }
  }
}

nlohmann::ordered_json to_json(const ToolEvent& e) {
  nlohmann::ordered_json j;
  j["turn"] = e.turn;
  j["tool"] = e.tool;
  j["args"] = e.args;
  j["ok"] = e.ok;
  if (!e.ok) j["reason"] = e.reason;
  if (e.nse) j["nse"] = *e.nse;
  if (e.best_nse) j["best_nse"] = *e.best_nse;
  j["dt_ms"] = e.dt_ms;
  return j;
}

ToolEvent event_from_json(const nlohmann::json& j) {
  ToolEvent e;
  e.turn = j.at("turn").get<int>();
  e.tool = j.at("tool").get<std::string>();
  e.args = j.contains("args") ? nlohmann::ordered_json(j.at("args")) : nlohmann::ordered_json::object();
  e.ok = j.at("ok").get<bool>();
  if (j.contains("reason")) e.reason = j.at("reason").get<std::string>();
  if (j.contains("nse") && !j.at("nse").is_null()) e.nse = j.at("nse").get<double>();
  if (j.contains("best_nse") && !j.at("best_nse").is_null()) e.best_nse = j.at("best_nse").get<double>();
  if (j.contains("dt_ms")) e.dt_ms = j.at("dt_ms").get<double>();
  return e;
}

void write_trajectory_jsonl(std::span<const ToolEvent> events, std::ostream& out,
                            const std::optional<nlohmann::ordered_json>& summary) {
  for (const auto& e : events) out << to_json(e).dump() << '\n';
  if (summary) out << summary->dump() << '\n';
}

TrajectoryRecord read_trajectory_jsonl(std::istream& in) {
  TrajectoryRecord rec;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      throw std::runtime_error("trajectory line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!j.is_object()) throw std::runtime_error("trajectory line " + std::to_string(line_no) + " is not an object");
    if (!j.contains("turn")) {
      if (rec.summary) throw std::runtime_error("trajectory has more than one summary object");
      rec.summary = j;
      continue;
    }
    if (rec.summary) throw std::runtime_error("trajectory event after the summary object at line " + std::to_string(line_no));
    ToolEvent e;
    try {
      e = event_from_json(j);
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error("trajectory line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!rec.events.empty() && e.turn <= rec.events.back().turn) {
      throw std::runtime_error("trajectory turns are not increasing at line " + std::to_string(line_no));
    }
    rec.events.push_back(std::move(e));
  }
  annotate_improvements(rec.events);
  return rec;
}

}  // namespace hydrocal

#include "hydrocal/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "hydrocal/errors.hpp"

namespace hydrocal {

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw std::invalid_argument("split must be train or test, got '" + std::string(s) + "'");
}

void GaugeTask::validate() const {
  if (hours_between(start, end) < 24) throw ConfigError("gauge " + gauge_id + ": window is shorter than one day");
  if (!std::isfinite(target_nse)) throw ConfigError("gauge " + gauge_id + ": target NSE must be finite");
}

std::vector<GaugeTask> load_gauge_tasks(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open " + manifest.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  if (!j.is_array()) throw ConfigError(manifest.string() + ": expected a JSON array of gauge tasks");
  std::vector<GaugeTask> tasks;
  for (const auto& item : j) {
    GaugeTask t;
    t.gauge_id = item.at("gauge_id").get<std::string>();
    t.split = split_from_string(item.value("split", std::string("test")));
    t.basin_area_km2 = item.value("basin_area_km2", 0.0);
    t.start = parse_utc_hour(item.at("start").get<std::string>());
    t.end = parse_utc_hour(item.at("end").get<std::string>());
    std::filesystem::path control = item.at("control").get<std::string>();
    t.control = control.is_absolute() ? control : manifest.parent_path() / control;
    t.target_nse = item.value("target_nse", kDefaultTargetNse);
    t.validate();
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::vector<AgentAggregate> aggregate_cells(const std::vector<BenchCell>& cells, const std::vector<std::string>& agents) {
  std::vector<AgentAggregate> out;
  for (const auto& agent : agents) {
    std::vector<double> v;
    for (const auto& c : cells) {
      if (c.agent == agent && c.ok() && c.run->best_nse()) v.push_back(*c.run->best_nse());
    }
    AgentAggregate a;
    a.agent = agent;
    a.cells = static_cast<int>(v.size());
    if (!v.empty()) {
      double sum = 0.0;
      for (double x : v) sum += x;
      a.mean_nse = sum / static_cast<double>(v.size());
      std::sort(v.begin(), v.end());
      const std::size_t m = v.size() / 2;
      a.median_nse = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    }
    out.push_back(a);
  }
  return out;
}

BenchReport run_benchmark(const std::vector<GaugeTask>& tasks, const std::vector<std::string>& agents,
                          const std::vector<std::uint64_t>& seeds, const BenchOptions& opt) {
  if (tasks.empty()) throw std::invalid_argument("benchmark needs at least one task");
  if (agents.empty() || seeds.empty()) throw std::invalid_argument("benchmark needs agents and seeds");

  struct Loaded {
    std::shared_ptr<const CatchmentTask> task;
    std::string error;
  };
  std::vector<Loaded> loaded;
  for (const auto& t : tasks) {
    Loaded l;
    try {
      t.validate();
      l.task = load_task(t.control, SimulationConfig::Window{t.start, t.end});
    } catch (const std::exception& e) {
      l.error = e.what();
    }
    loaded.push_back(std::move(l));
  }

  BenchReport report;
  report.rounds = opt.rounds;
  report.sweeps = opt.sweeps;
  for (const auto& t : tasks) {
    for (const auto& a : agents) {
      for (auto s : seeds) report.cells.push_back(BenchCell{t.gauge_id, t.split, a, s, std::nullopt, {}});
    }
  }

  const std::size_t per_task = agents.size() * seeds.size();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < report.cells.size(); i = next++) {
      BenchCell& cell = report.cells[i];
      const std::size_t ti = i / per_task;
      if (!loaded[ti].error.empty()) {
        cell.error = loaded[ti].error;
        continue;
      }
      try {
        CalibrationOptions co = opt.calibration;
        co.target_nse = tasks[ti].target_nse;
        cell.run = best_of_rounds(loaded[ti].task, cell.agent, opt.rounds, opt.sweeps, cell.seed, co);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(opt.workers, static_cast<int>(report.cells.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  report.aggregates = aggregate_cells(report.cells, agents);
  return report;
}

nlohmann::ordered_json BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["rounds"] = rounds;
  j["sweeps"] = sweeps;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json cj;
    cj["gauge"] = c.gauge_id;
    cj["split"] = std::string(to_string(c.split));
    cj["agent"] = c.agent;
    cj["seed"] = c.seed;
    if (c.ok()) {
      const auto& r = *c.run;
      cj["best_nse"] = r.best_nse() ? nlohmann::ordered_json(*r.best_nse()) : nlohmann::ordered_json(nullptr);
      cj["rounds_used"] = r.rounds_used;
      cj["n_sims"] = r.n_sims;
      cj["band"] = r.band ? nlohmann::ordered_json(std::string(to_string(*r.band))) : nlohmann::ordered_json(nullptr);
      cj["best_nse_curve"] = r.best_nse_curve;
    } else {
      cj["error"] = c.error;
    }
    j["cells"].push_back(std::move(cj));
  }
  j["aggregates"] = nlohmann::ordered_json::array();
  for (const auto& a : aggregates) {
    j["aggregates"].push_back({{"agent", a.agent}, {"cells", a.cells}, {"mean_nse", a.mean_nse}, {"median_nse", a.median_nse}});
  }
  return j;
}

std::string BenchReport::to_table() const {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"gauge", "split", "agent", "seed", "best_nse", "rounds", "sims", "band"});
  auto num = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
  };
  for (const auto& c : cells) {
    if (!c.ok()) {
      rows.push_back({c.gauge_id, std::string(to_string(c.split)), c.agent, std::to_string(c.seed), "error: " + c.error,
                      "", "", ""});
      continue;
    }
    const auto& r = *c.run;
    rows.push_back({c.gauge_id, std::string(to_string(c.split)), c.agent, std::to_string(c.seed),
                    r.best_nse() ? num(*r.best_nse()) : "-", std::to_string(r.rounds_used), std::to_string(r.n_sims),
                    r.band ? std::string(to_string(*r.band)) : "-"});
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::string cell = row[k];
      cell.resize(width[k], ' ');
      line += (k ? "  " : "") + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  out << '\n';
  std::size_t aw = 5;
  for (const auto& a : aggregates) aw = std::max(aw, a.agent.size());
  out << std::left << std::setw(static_cast<int>(aw)) << "agent" << "  cells  mean_nse  median_nse\n";
  for (const auto& a : aggregates) {
    out << std::left << std::setw(static_cast<int>(aw)) << a.agent << "  " << std::right << std::setw(5) << a.cells
        << "  " << std::setw(8) << num(a.mean_nse) << "  " << std::setw(10) << num(a.median_nse) << '\n';
  }
  return out.str();
}

}  // namespace hydrocal

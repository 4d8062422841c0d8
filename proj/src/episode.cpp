#include "hydrocal/episode.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>

#include "hydrocal/errors.hpp"
#include "hydrocal/numfmt.hpp"

namespace hydrocal {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

Eigen::Index warmup_steps_of(const SimulationConfig& cfg) {
  return static_cast<Eigen::Index>(std::ceil(cfg.warmup_hours() / cfg.basic.timestep_hours));
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json ledger_json(const MassBalance& m) {
  return {{"precip_in", m.precip_in},         {"et_out", m.et_out},
          {"deep_loss", m.deep_loss},         {"boundary_out", m.boundary_out},
          {"outlet_total", m.outlet_total},   {"storage_delta", m.storage_delta},
          {"residual", m.residual()},         {"relative_closure", m.relative_closure()}};
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string simulation_text(const MetricPanel& m, const Diagnosis& d) {
  std::string s = "Simulation complete.";
  if (m.peak_error_cms) s += " Peak error " + fmt3(*m.peak_error_cms) + " m3/s";
  if (m.lag_hours) s += ", lag " + fmt3(*m.lag_hours) + " h";
  if (m.volume_ratio) s += ", volume ratio " + fmt3(*m.volume_ratio);
  if (m.recession_slope_sim) s += ", recession slope " + fmt3(*m.recession_slope_sim) + " /h";
  if (m.time_to_peak_hours) s += ", time to peak " + fmt3(*m.time_to_peak_hours) + " h";
  if (m.baseflow_cms) s += ", baseflow " + fmt3(*m.baseflow_cms) + " m3/s";
  if (m.event_count) s += ", " + std::to_string(*m.event_count) + " events";
  s += ". " + d.text;
  return s;
}

}  // namespace

std::shared_ptr<const CatchmentTask> make_task(SimulationConfig config, Basin basin, ForcingSeries forcing,
                                               TimeSeries observed, std::filesystem::path control_path) {
  auto task = std::make_shared<CatchmentTask>();
  task->warmup_steps = warmup_steps_of(config);
  task->observed = observed.slice(config.window.start, config.window.end);
  if (task->warmup_steps >= task->observed.size() - 1) {
    throw ConfigError("warmup leaves fewer than two scored steps in the window");
  }
  const auto scored = task->observed.values.tail(task->observed.size() - task->warmup_steps);
  if (!((scored - scored.mean()).square().sum() > 0.0)) {
    throw ConfigError("observed discharge has zero variance over the scored window");
  }
  task->config = std::move(config);
  task->basin = std::move(basin);
  task->forcing = std::move(forcing);
  task->control_path = std::move(control_path);
  return task;
}

std::shared_ptr<const CatchmentTask> load_task(const std::filesystem::path& control_path,
                                               const std::optional<SimulationConfig::Window>& window) {
  SimulationConfig cfg = parse_control_file(control_path);
  if (window) cfg.window = *window;
  const auto base = control_path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  if (!cfg.gauge.obs_csv) throw ConfigError(control_path.string() + ": gauge has no obs_csv");
  const auto obs_path = resolve(*cfg.gauge.obs_csv);
  if (!std::filesystem::exists(obs_path)) throw std::runtime_error("observation file not found: " + obs_path.string());
  TimeSeries obs = load_observations(obs_path);
  ForcingSeries forcing =
      load_forcing(resolve(cfg.forcing.precip_csv), resolve(cfg.forcing.pet_csv), cfg.basic.timestep_hours);
  Basin basin = load_basin(cfg, base);
  return make_task(std::move(cfg), std::move(basin), std::move(forcing), std::move(obs), control_path);
}

std::string_view to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::running: return "running";
    case EpisodeStatus::target_attained: return "target_attained";
    case EpisodeStatus::stalled: return "stalled";
    case EpisodeStatus::turn_cap: return "turn_cap";
    case EpisodeStatus::wall_clock: return "wall_clock";
    case EpisodeStatus::closed: return "closed";
  }
  return "unknown";
}

ordered_json parameters_to_json(const ParameterSet& p) {
  ordered_json j = ordered_json::object();
  for (const auto& s : kParamSpecs) j[std::string(s.name)] = p[s.id];
  return j;
}

Episode::Episode(std::shared_ptr<const CatchmentTask> task, EpisodeConfig cfg)
    : task_(std::move(task)), cfg_(std::move(cfg)), started_(Clock::now()) {
  if (!task_) throw ConfigError("episode needs a task");
  if (cfg_.max_turns < 1) throw ConfigError("max_turns must be >= 1");
  if (cfg_.no_improve_rounds < 1) throw ConfigError("no_improve_rounds must be >= 1");
  target_ = cfg_.target_nse.value_or(task_->config.target_nse());
  if (!std::isfinite(target_)) throw ConfigError("target NSE must be finite");
  if (cfg_.wall_clock_budget_s && !(*cfg_.wall_clock_budget_s > 0.0)) {
    throw ConfigError("wall_clock_budget_s must be positive");
  }
}

ToolResult Episode::begin_call() {
  if (running() && cfg_.wall_clock_budget_s) {
    const double elapsed = std::chrono::duration<double>(Clock::now() - started_).count();
    if (elapsed > *cfg_.wall_clock_budget_s) status_ = EpisodeStatus::wall_clock;
  }
  if (running()) return {};
  return {false, error_code::episode_closed, "episode is " + std::string(to_string(status_)), ordered_json::object()};
}

void Episode::record(ToolEvent e, Clock::time_point t0) {
  e.turn = ++turn_;
  e.dt_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  reward_.add(e);
  events_.push_back(std::move(e));
  check_termination();
}

ToolResult Episode::reject(const std::string& tool, ordered_json args, const char* code, std::string message,
                           Clock::time_point t0) {
  ++counts_.n_rejected;
  ToolEvent e;
  e.tool = tool;
  e.args = std::move(args);
  e.ok = false;
  e.reason = std::string(code) + ": " + message;
  record(std::move(e), t0);
  return {false, code, std::move(message), ordered_json::object()};
}

ToolResult Episode::set_parameters(const nlohmann::json& values) {
  const auto t0 = Clock::now();
  if (auto r = begin_call(); !r.ok) return r;
  const ordered_json raw = ordered_json::parse(values.dump());
  if (!values.is_object()) {
    return reject(kToolSetParameters, raw, error_code::malformed_request, "parameters must be a JSON object", t0);
  }

  ParameterSet p;
  std::vector<std::string> missing, unknown, non_numeric;
  std::set<std::string> seen;
  for (const auto& [key, v] : values.items()) {
    const auto id = param_from_name(key);
    if (!id) {
      unknown.push_back(key);
      continue;
    }
    seen.insert(key);
    if (!v.is_number()) {
      non_numeric.push_back(key);
      continue;
    }
    p[*id] = v.get<double>();
  }
  for (const auto& s : kParamSpecs) {
    if (!seen.count(std::string(s.name))) missing.push_back(std::string(s.name));
  }
  if (!missing.empty() || !unknown.empty() || !non_numeric.empty()) {
    std::string msg;
    auto list = [&](const char* label, const std::vector<std::string>& keys) {
      if (keys.empty()) return;
      if (!msg.empty()) msg += "; ";
      msg += label;
      for (std::size_t i = 0; i < keys.size(); ++i) msg += (i ? ", " : " ") + keys[i];
    };
    list("missing", missing);
    list("unknown", unknown);
    list("non-numeric", non_numeric);
    return reject(kToolSetParameters, raw, error_code::malformed_request, msg, t0);
  }

  std::vector<std::string> non_finite;
  for (const auto& s : kParamSpecs) {
    if (!std::isfinite(p[s.id])) non_finite.push_back(std::string(s.name) + " is not finite");
  }
  auto violations = check_bounds(p, cfg_.allow_fixed_override);
  if (!non_finite.empty() || !violations.empty()) {
    std::string msg = describe_violations(violations);
    for (const auto& n : non_finite) msg += (msg.empty() ? "" : "; ") + n;
    return reject(kToolSetParameters, raw, error_code::bounds_violation, msg, t0);
  }

  params_ = p;
  ++counts_.n_set;
  if (cfg_.control_copy) {
    SimulationConfig copy = task_->config;
    copy.params = p;
    write_control_file(copy, *cfg_.control_copy);
  }
  ToolEvent e;
  e.tool = kToolSetParameters;
  e.args = parameters_to_json(p);
  record(e, t0);
  return {true, {}, {}, {{"accepted", true}, {"parameters", parameters_to_json(p)}, {"turn", turn_}}};
}

ToolResult Episode::set_parameters(const ParameterSet& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : kParamSpecs) j[std::string(s.name)] = p[s.id];
  return set_parameters(j);
}

ToolResult Episode::run_simulation() {
  const auto t0 = Clock::now();
  if (auto r = begin_call(); !r.ok) return r;
  if (!params_) return reject(kToolRunSimulation, ordered_json::object(), error_code::no_simulation, "no parameters set", t0);

  const auto& cfg = task_->config;
  Hydrograph h = simulate(task_->basin, task_->forcing, *params_, cfg.window.start, cfg.window.end);
  h.q_obs = task_->observed.values;
  h.warmup_steps = task_->warmup_steps;
  const Eigen::Index n = h.size() - h.warmup_steps;
  MetricPanel panel = metric_panel(h.q_obs->tail(n), h.q_sim.tail(n), h.dt_hours);
  const Diagnosis d = diagnose(&panel);

  ordered_json result;
  ordered_json series;
  series["start"] = format_utc_hour(h.start);
  series["dt_hours"] = h.dt_hours;
  series["warmup_steps"] = h.warmup_steps;
  series["q_sim"] = std::vector<double>(h.q_sim.data(), h.q_sim.data() + h.q_sim.size());
  series["q_obs"] = std::vector<double>(h.q_obs->data(), h.q_obs->data() + h.q_obs->size());
  result["series"] = std::move(series);
  result["signatures"] = {{"peak_error_cms", optional_number(panel.peak_error_cms)},
                          {"lag_hours", optional_number(panel.lag_hours)},
                          {"volume_ratio", optional_number(panel.volume_ratio)},
                          {"recession_slope", optional_number(panel.recession_slope_sim)},
                          {"time_to_peak_hours", optional_number(panel.time_to_peak_hours)},
                          {"baseflow_cms", optional_number(panel.baseflow_cms)},
                          {"event_count", panel.event_count ? ordered_json(*panel.event_count) : ordered_json(nullptr)}};
  result["mass_balance"] = ledger_json(h.ledger);
  result["text"] = simulation_text(panel, d);

  hydrograph_ = std::move(h);
  panel_ = panel;
  ++counts_.n_sim;
  ToolEvent e;
  e.tool = kToolRunSimulation;
  record(e, t0);
  result["turn"] = turn_;
  return {true, {}, {}, std::move(result)};
}

ToolResult Episode::evaluate() {
  const auto t0 = Clock::now();
  if (auto r = begin_call(); !r.ok) return r;
  if (!panel_ || !panel_->nse) {
    return reject(kToolEvaluate, ordered_json::object(), error_code::no_simulation, "no simulation to evaluate", t0);
  }
  const double value = *panel_->nse;
  const std::optional<double> previous = best_nse_;
  const double floor = previous.value_or(-std::numeric_limits<double>::infinity());
  const bool improved = value > floor + cfg_.improvement_epsilon;
  ++counts_.n_eval;
  if (improved) {
    best_nse_ = value;
    best_params_ = params_;
    ++counts_.n_improve;
    no_improve_ = 0;
  } else {
    ++no_improve_;
  }

  ToolEvent e;
  e.tool = kToolEvaluate;
  e.nse = value;
  e.best_nse = best_nse_;
  e.improved = improved;
  e.delta_nse = improved ? best_nse_delta(previous, *best_nse_) : 0.0;
  const double delta = e.delta_nse;
  record(e, t0);

  ordered_json result;
  result["metrics"] = to_json(*panel_);
  result["nse"] = value;
  result["best_nse"] = *best_nse_;
  result["target"] = target_;
  result["target_attained"] = *best_nse_ >= target_;
  result["improved"] = improved;
  result["delta_nse"] = delta;
  result["status"] = std::string(to_string(status_));
  result["turn"] = turn_;
  return {true, {}, {}, std::move(result)};
}

ToolResult Episode::parse_failure() {
  const auto t0 = Clock::now();
  if (auto r = begin_call(); !r.ok) return r;
  const Diagnosis d = diagnose(panel_ ? &*panel_ : nullptr);
  ++counts_.n_parse_fail;
  ToolEvent e;
  e.tool = kToolParseFailure;
  record(e, t0);
  ordered_json members = ordered_json::array();
  for (auto p : d.members) members.push_back(std::string(spec(p).name));
  return {true,
          {},
          {},
          {{"group", std::string(to_string(d.group))}, {"parameters", members}, {"text", d.text}, {"turn", turn_}}};
}

ToolResult Episode::close() {
  if (status_ == EpisodeStatus::closed) {
    return {false, error_code::episode_closed, "episode is closed", ordered_json::object()};
  }
  const EpisodeStatus prior = status_;
  status_ = EpisodeStatus::closed;
  ordered_json r = status_json();
  r["ended_as"] = std::string(to_string(prior == EpisodeStatus::running ? EpisodeStatus::closed : prior));
  return {true, {}, {}, std::move(r)};
}

EpisodeStatus Episode::check_termination() {
  if (!running()) return status_;
  if (best_nse_ && *best_nse_ >= target_) {
    status_ = EpisodeStatus::target_attained;
  } else if (no_improve_ >= cfg_.no_improve_rounds) {
    status_ = EpisodeStatus::stalled;
  } else if (turn_ >= cfg_.max_turns) {
    status_ = EpisodeStatus::turn_cap;
  } else if (cfg_.wall_clock_budget_s &&
             std::chrono::duration<double>(Clock::now() - started_).count() > *cfg_.wall_clock_budget_s) {
    status_ = EpisodeStatus::wall_clock;
  }
  return status_;
}

EpisodeSummary Episode::summary() const {
  EpisodeSummary s;
  s.best_nse = best_nse_.value_or(0.0);
  s.target = target_;
  s.n_eval = counts_.n_eval;
  s.n_improve = counts_.n_improve;
  s.empty = counts_.n_eval == 0;
  return s;
}

RewardTrace Episode::reward() const { return reward_.finish(summary()); }

ordered_json Episode::status_json() const {
  ordered_json j;
  j["gauge"] = task_->gauge_id();
  j["status"] = std::string(to_string(status_));
  j["turn"] = turn_;
  j["max_turns"] = cfg_.max_turns;
  j["best_nse"] = optional_number(best_nse_);
  j["target"] = target_;
  j["consecutive_no_improve"] = no_improve_;
  j["counts"] = {{"n_set", counts_.n_set},       {"n_sim", counts_.n_sim},
                 {"n_eval", counts_.n_eval},     {"n_improve", counts_.n_improve},
                 {"n_parse_fail", counts_.n_parse_fail}, {"n_rejected", counts_.n_rejected}};
  j["parameters"] = params_ ? parameters_to_json(*params_) : ordered_json(nullptr);
  j["best_parameters"] = best_params_ ? parameters_to_json(*best_params_) : ordered_json(nullptr);
  return j;
}

ordered_json Episode::score_json() const {
  ordered_json summary = to_json(reward());
  summary["target_nse"] = target_;
  summary["best_nse"] = optional_number(best_nse_);
  summary["n_eval"] = counts_.n_eval;
  summary["n_improve"] = counts_.n_improve;
  summary["empty"] = counts_.n_eval == 0;
  summary["status"] = std::string(to_string(status_));
  return summary;
}

void Episode::export_trajectory(std::ostream& out) const { write_trajectory_jsonl(events_, out); }

void Episode::export_trajectory(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  export_trajectory(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Episode replay_trajectory(std::shared_ptr<const CatchmentTask> task, const EpisodeConfig& cfg,
                          std::span<const ToolEvent> events) {
  Episode ep(std::move(task), cfg);
  for (const auto& e : events) {
    if (e.tool == kToolSetParameters) {
      ep.set_parameters(nlohmann::json::parse(e.args.dump()));
    } else if (e.tool == kToolRunSimulation) {
      ep.run_simulation();
    } else if (e.tool == kToolEvaluate) {
      ep.evaluate();
    } else if (e.tool == kToolParseFailure) {
      ep.parse_failure();
    } else {
      throw std::invalid_argument("cannot replay unknown tool '" + e.tool + "'");
    }
  }
  return ep;
}

}  // namespace hydrocal

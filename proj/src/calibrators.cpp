#include "hydrocal/calibrators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hydrocal {

namespace {

constexpr std::array<Param, kCalibratedCount> kCalibrated{Param::wm,    Param::b,    Param::im,    Param::ke,
                                                           Param::fc,    Param::under, Param::leaki, Param::alpha,
                                                           Param::beta,  Param::alpha0, Param::iwu};

double uniform_in(std::mt19937_64& rng, const ParamSpec& s) {
  return std::uniform_real_distribution<double>(s.lo, s.hi)(rng);
}

}  // namespace

std::span<const Param> calibrated_params() { return kCalibrated; }

double reflect(double x, double lo, double hi) {
  if (x < lo) {
    x = lo + (lo - x);
    if (x > hi) x = lo;
  } else if (x > hi) {
    x = hi - (x - hi);
    if (x < lo) x = hi;
  }
  return x;
}

// ---------------------------------------------------------------------------

RandomSearch::RandomSearch(std::uint64_t seed) : rng_(seed) {}

ParameterSet RandomSearch::propose() {
  ParameterSet p;
  for (Param id : kCalibrated) p[id] = uniform_in(rng_, spec(id));
  return p;
}

// ---------------------------------------------------------------------------

Dds::Dds(int budget, std::uint64_t seed, double r) : budget_(budget), r_(r), rng_(seed) {
  if (budget < 2) throw std::invalid_argument("DDS needs a budget of at least 2");
  if (!(r > 0.0)) throw std::invalid_argument("DDS perturbation fraction must be positive");
}

ParameterSet Dds::propose() {
  const int i = ++proposed_;
  if (i <= initial_samples()) {
    ParameterSet start;
    for (Param id : kCalibrated) start[id] = uniform_in(rng_, spec(id));
    return start;
  }
  const double prob = 1.0 - std::log(static_cast<double>(i)) / std::log(static_cast<double>(budget_));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Param> chosen;
  for (Param id : kCalibrated) {
    if (u(rng_) < prob) chosen.push_back(id);
  }
  if (chosen.empty()) {
    chosen.push_back(kCalibrated[std::uniform_int_distribution<std::size_t>(0, kCalibrated.size() - 1)(rng_)]);
  }
  ParameterSet candidate = best_;
  for (Param id : chosen) {
    const auto& s = spec(id);
    candidate[id] = reflect(best_[id] + r_ * (s.hi - s.lo) * normal(rng_), s.lo, s.hi);
  }
  return candidate;
}

int Dds::initial_samples() const { return std::clamp(std::max(5, budget_ / 200), 1, budget_ - 1); }

void Dds::observe(const ParameterSet& candidate, double nse, const MetricPanel&) {
  if (nse > best_nse_) {
    best_nse_ = nse;
    best_ = candidate;
  }
}

// ---------------------------------------------------------------------------

CoordinateRefiner::CoordinateRefiner(std::uint64_t seed) : rng_(seed) {}

ParameterSet CoordinateRefiner::propose() {
  if (!best_panel_) return best_;
  if (queue_.empty()) plan_next();
  ParameterSet next = queue_.front();
  queue_.erase(queue_.begin());
  return next;
}

void CoordinateRefiner::observe(const ParameterSet& candidate, double nse, const MetricPanel& panel) {
  if (nse > best_nse_) {
    best_nse_ = nse;
    best_ = candidate;
    best_panel_ = panel;
    improved_in_search_ = true;
  }
  if (!queue_.empty()) return;
  if (!history_.empty()) {
    if (improved_in_search_) {
      tried_since_improvement_.clear();
    } else {
      tried_since_improvement_.push_back(history_.back());
    }
  }
  improved_in_search_ = false;
  plan_next();
}

void CoordinateRefiner::plan_next() {
  auto tried = [&](Param p) {
    return std::find(tried_since_improvement_.begin(), tried_since_improvement_.end(), p) !=
           tried_since_improvement_.end();
  };
  for (std::size_t attempt = 0; attempt <= 2 * kCalibrated.size(); ++attempt) {
    if (tried_since_improvement_.size() >= kCalibrated.size()) tried_since_improvement_.clear();

    std::optional<Param> pick;
    const Diagnosis d = diagnose(best_panel_ ? &*best_panel_ : nullptr);
    for (Param m : d.members) {
      if (!tried(m)) {
        pick = m;
        break;
      }
    }
    while (!pick) {
      const Param m = kCalibrated[round_robin_++ % kCalibrated.size()];
      if (!tried(m)) pick = m;
    }

    const auto& s = spec(*pick);
    const double x = best_[*pick];
    queue_.clear();
    for (double step : kRefineSteps) {
      const double base = x != 0.0 ? x : 0.05 * (s.hi - s.lo);
      const double v = std::clamp(base * step, s.lo, s.hi);
      if (v == x) continue;
      if (std::any_of(queue_.begin(), queue_.end(), [&](const ParameterSet& q) { return q[*pick] == v; })) continue;
      ParameterSet c = best_;
      c[*pick] = v;
      queue_.push_back(c);
    }
    history_.push_back(*pick);
    if (!queue_.empty()) return;
    tried_since_improvement_.push_back(*pick);
  }
  // Every coordinate is pinned; fall back to a random interior point.
  ParameterSet c = best_;
  for (Param id : kCalibrated) c[id] = uniform_in(rng_, spec(id));
  queue_.push_back(c);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Calibrator> make_calibrator(std::string_view agent, int budget, std::uint64_t seed) {
  if (agent == "random") return std::make_unique<RandomSearch>(seed);
  if (agent == "dds") return std::make_unique<Dds>(std::max(budget, 2), seed);
  if (agent == "refine") return std::make_unique<CoordinateRefiner>(seed);
  throw std::invalid_argument("unknown agent '" + std::string(agent) + "' (expected random, dds or refine)");
}

std::vector<std::string> agent_names() { return {"random", "dds", "refine"}; }

nlohmann::ordered_json to_json(const CalibrationRun& run) {
  nlohmann::ordered_json j;
  j["agent"] = run.agent;
  j["gauge"] = run.gauge;
  j["seed"] = run.seed;
  j["rounds_used"] = run.rounds_used;
  j["best_nse_curve"] = run.best_nse_curve;
  j["n_sims"] = run.n_sims;
  j["best_params"] = run.best_params ? parameters_to_json(*run.best_params) : nlohmann::ordered_json(nullptr);
  j["band"] = run.band ? nlohmann::ordered_json(std::string(to_string(*run.band))) : nlohmann::ordered_json(nullptr);
  j["n_improve"] = run.n_improve;
  j["status"] = std::string(to_string(run.status));
  j["metrics"] = run.final_panel ? to_json(*run.final_panel) : nlohmann::ordered_json(nullptr);
  return j;
}

namespace {

CalibrationRun run_budget(std::shared_ptr<const CatchmentTask> task, Calibrator& agent, int budget, int sweeps,
                          std::uint64_t seed, const CalibrationOptions& opts) {
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  if (sweeps < 1) throw std::invalid_argument("sweeps must be >= 1");
  EpisodeConfig cfg;
  cfg.target_nse = opts.target_nse;
  cfg.max_turns = 3 * budget;
  cfg.no_improve_rounds = std::max(1, opts.stall_rounds * sweeps);
  cfg.improvement_epsilon = opts.improvement_epsilon;

  Episode ep(task, cfg);
  CalibrationRun run;
  run.agent = std::string(agent.name());
  run.gauge = task->gauge_id();
  run.seed = seed;

  int used = 0;
  while (used < budget && ep.running()) {
    const int this_round = std::min(sweeps, budget - used);
    for (int k = 0; k < this_round && ep.running(); ++k) {
      const ParameterSet candidate = agent.propose();
      if (!ep.set_parameters(candidate).ok) {
        ++run.n_rejected;
        continue;
      }
      if (!ep.running() || !ep.run_simulation().ok) break;
      ++used;
      if (!ep.running()) break;
      const ToolResult r = ep.evaluate();
      if (!r.ok) break;
      const MetricPanel& panel = *ep.latest_panel();
      if (r.result["improved"].get<bool>()) run.final_panel = panel;
      agent.observe(candidate, r.result["nse"].get<double>(), panel);
    }
    ++run.rounds_used;
    if (ep.best_nse()) run.best_nse_curve.push_back(*ep.best_nse());
  }
  // Rounds skipped by an early stop hold the final best.
  const auto planned = static_cast<std::size_t>((budget + sweeps - 1) / sweeps);
  if (!run.best_nse_curve.empty()) run.best_nse_curve.resize(planned, run.best_nse_curve.back());
  run.n_sims = ep.counts().n_sim;
  run.n_improve = ep.counts().n_improve;
  run.best_params = ep.best_parameters();
  if (ep.best_nse()) run.band = moriasi_band(*ep.best_nse());
  run.status = ep.status();
  return run;
}

}  // namespace

CalibrationRun best_of_rounds(std::shared_ptr<const CatchmentTask> task, Calibrator& agent, int rounds, int sweeps,
                              std::uint64_t seed, const CalibrationOptions& opts) {
  if (rounds < 1 || sweeps < 1) throw std::invalid_argument("rounds and sweeps must be >= 1");
  return run_budget(std::move(task), agent, rounds * sweeps, sweeps, seed, opts);
}

CalibrationRun best_of_rounds(std::shared_ptr<const CatchmentTask> task, std::string_view agent, int rounds,
                              int sweeps, std::uint64_t seed, const CalibrationOptions& opts) {
  auto a = make_calibrator(agent, rounds * sweeps, seed);
  return best_of_rounds(std::move(task), *a, rounds, sweeps, seed, opts);
}

CalibrationRun random_search(std::shared_ptr<const CatchmentTask> task, int budget, std::uint64_t seed,
                             const CalibrationOptions& opts) {
  RandomSearch agent(seed);
  return run_budget(std::move(task), agent, budget, 10, seed, opts);
}

CalibrationRun dds_calibrate(std::shared_ptr<const CatchmentTask> task, int budget, std::uint64_t seed, double r,
                             const CalibrationOptions& opts) {
  Dds agent(budget, seed, r);
  return run_budget(std::move(task), agent, budget, 10, seed, opts);
}

CalibrationRun coordinate_refine(std::shared_ptr<const CatchmentTask> task, int budget, std::uint64_t seed,
                                 const CalibrationOptions& opts) {
  if (budget < 13) throw std::invalid_argument("coordinate_refine needs a budget of at least 13");
  CoordinateRefiner agent(seed);
  return run_budget(std::move(task), agent, budget, 10, seed, opts);
}

}  // namespace hydrocal

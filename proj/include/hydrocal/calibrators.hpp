#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hydrocal/diagnosis.hpp"
#include "hydrocal/episode.hpp"
#include "hydrocal/metrics.hpp"
#include "hydrocal/params.hpp"

namespace hydrocal {

/// The 11 calibrated parameters; th and isu stay at their fixed values.
std::span<const Param> calibrated_params();

/// Mirror `x` back into [lo, hi]; a reflection that overshoots the opposite bound clamps to it.
double reflect(double x, double lo, double hi);

/// A stepping agent: propose a candidate, then observe its score. Proposals always lie within bounds.
class Calibrator {
 public:
  virtual ~Calibrator() = default;
  virtual std::string_view name() const = 0;
  virtual ParameterSet propose() = 0;
  virtual void observe(const ParameterSet& candidate, double nse, const MetricPanel& panel) = 0;
};

class RandomSearch final : public Calibrator {
 public:
  explicit RandomSearch(std::uint64_t seed);
  std::string_view name() const override { return "random"; }
  ParameterSet propose() override;
  void observe(const ParameterSet&, double, const MetricPanel&) override {}

 private:
  std::mt19937_64 rng_;
};

/// Dynamically dimensioned search. The start is the best of max(5, budget/200) uniform samples (at most
/// budget − 1); proposal i (1-based, counting the samples) then perturbs each dimension with probability
/// 1 − ln(i)/ln(budget), at least one, by N(0, r·(hi−lo)) with reflection, and keeps strict improvements.
class Dds final : public Calibrator {
 public:
  Dds(int budget, std::uint64_t seed, double r = 0.2);
  std::string_view name() const override { return "dds"; }
  ParameterSet propose() override;
  void observe(const ParameterSet& candidate, double nse, const MetricPanel& panel) override;

  const ParameterSet& best() const { return best_; }
  int initial_samples() const;

 private:
  int budget_;
  double r_;
  std::mt19937_64 rng_;
  int proposed_ = 0;
  ParameterSet best_;
  double best_nse_ = -std::numeric_limits<double>::infinity();
};

/// Diagnosis-guided coordinate search from the default parameter set. After each observation the
/// group named by the diagnosis of the best panel selects the next member, which is line-searched by
/// multiplicative steps ×{0.5, 0.8, 1.25, 2} around the best point.
class CoordinateRefiner final : public Calibrator {
 public:
  explicit CoordinateRefiner(std::uint64_t seed);
  std::string_view name() const override { return "refine"; }
  ParameterSet propose() override;
  void observe(const ParameterSet& candidate, double nse, const MetricPanel& panel) override;

  /// Parameters perturbed so far, in order.
  const std::vector<Param>& history() const { return history_; }

 private:
  void plan_next();

  std::mt19937_64 rng_;
  ParameterSet best_;
  double best_nse_ = -std::numeric_limits<double>::infinity();
  std::optional<MetricPanel> best_panel_;
  std::vector<ParameterSet> queue_;
  std::vector<Param> history_;
  std::vector<Param> tried_since_improvement_;
  bool improved_in_search_ = false;
  std::size_t round_robin_ = 0;
};

inline constexpr std::array<double, 4> kRefineSteps{0.5, 0.8, 1.25, 2.0};

/// Builds an agent by name ("random", "dds", "refine") for a simulation budget.
std::unique_ptr<Calibrator> make_calibrator(std::string_view agent, int budget, std::uint64_t seed);
std::vector<std::string> agent_names();

struct CalibrationOptions {
  std::optional<double> target_nse;  // defaults to the task's target
  int stall_rounds = 5;              // rounds of sweeps without improvement before the episode stalls
  double improvement_epsilon = 1e-4;
};

struct CalibrationRun {
  std::string agent;
  std::string gauge;
  std::uint64_t seed = 0;
  int rounds_used = 0;
  std::vector<double> best_nse_curve;  // running best after each planned round; an early stop repeats the last value
  int n_sims = 0;
  int n_improve = 0;
  int n_rejected = 0;
  std::optional<ParameterSet> best_params;
  std::optional<MetricPanel> final_panel;  // panel of the best evaluation
  std::optional<Band> band;
  EpisodeStatus status = EpisodeStatus::running;

  std::optional<double> best_nse() const {
    return best_nse_curve.empty() ? std::nullopt : std::optional<double>(best_nse_curve.back());
  }
};

nlohmann::ordered_json to_json(const CalibrationRun& run);

/// Drives `agent` through set_parameters → run_simulation → evaluate sweeps on a fresh episode,
/// `rounds` × `sweeps` simulations at most. Stops early when the episode leaves running.
CalibrationRun best_of_rounds(std::shared_ptr<const CatchmentTask> task, Calibrator& agent, int rounds = 20,
                              int sweeps = 10, std::uint64_t seed = 0, const CalibrationOptions& opts = {});

/// Named-agent form; the agent is built for the rounds × sweeps budget.
CalibrationRun best_of_rounds(std::shared_ptr<const CatchmentTask> task, std::string_view agent, int rounds = 20,
                              int sweeps = 10, std::uint64_t seed = 0, const CalibrationOptions& opts = {});

/// Single-budget entry points: rounds of 10 sweeps, the last one truncated to the budget.
CalibrationRun random_search(std::shared_ptr<const CatchmentTask> task, int budget, std::uint64_t seed,
                             const CalibrationOptions& opts = {});
CalibrationRun dds_calibrate(std::shared_ptr<const CatchmentTask> task, int budget, std::uint64_t seed,
                             double r = 0.2, const CalibrationOptions& opts = {});
CalibrationRun coordinate_refine(std::shared_ptr<const CatchmentTask> task, int budget, std::uint64_t seed,
                                 const CalibrationOptions& opts = {});

}  // namespace hydrocal

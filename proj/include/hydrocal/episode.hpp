#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydrocal/control.hpp"
#include "hydrocal/diagnosis.hpp"
#include "hydrocal/forcing.hpp"
#include "hydrocal/metrics.hpp"
#include "hydrocal/params.hpp"
#include "hydrocal/reward.hpp"
#include "hydrocal/simulator.hpp"
#include "hydrocal/trajectory.hpp"

namespace hydrocal {

/// Everything an episode needs that does not change between episodes on the same gauge.
struct CatchmentTask {
  SimulationConfig config;
  std::filesystem::path control_path;
  Basin basin;
  ForcingSeries forcing;
  TimeSeries observed;  // sliced to the simulation window
  Eigen::Index warmup_steps = 0;

  const std::string& gauge_id() const { return config.gauge.id; }
};

/// Loads a control file and its grids, forcing and observations (paths relative to the control file).
/// Throws ConfigError when no observation file is named or the scored part of it has zero variance,
/// and std::runtime_error / ParseError for missing or malformed files.
/// `window` replaces the control file's simulation window when given.
std::shared_ptr<const CatchmentTask> load_task(const std::filesystem::path& control_path,
                                               const std::optional<SimulationConfig::Window>& window = {});

/// Builds a task from parts already in memory.
std::shared_ptr<const CatchmentTask> make_task(SimulationConfig config, Basin basin, ForcingSeries forcing,
                                               TimeSeries observed, std::filesystem::path control_path = {});

struct EpisodeConfig {
  std::optional<double> target_nse;  // defaults to the control file's target
  int max_turns = 50;
  int no_improve_rounds = 5;
  std::optional<double> wall_clock_budget_s;
  double improvement_epsilon = 1e-4;
  bool allow_fixed_override = false;
  std::optional<std::filesystem::path> control_copy;  // rewritten on every accepted set_parameters
};

enum class EpisodeStatus { running, target_attained, stalled, turn_cap, wall_clock, closed };

std::string_view to_string(EpisodeStatus s);

struct EpisodeCounts {
  int n_set = 0;
  int n_sim = 0;
  int n_eval = 0;
  int n_improve = 0;
  int n_parse_fail = 0;
  int n_rejected = 0;
};

namespace error_code {
inline constexpr const char* unknown_session = "unknown_session";
inline constexpr const char* bounds_violation = "bounds_violation";
inline constexpr const char* no_simulation = "no_simulation";
inline constexpr const char* episode_closed = "episode_closed";
inline constexpr const char* malformed_request = "malformed_request";
}  // namespace error_code

struct ToolResult {
  bool ok = true;
  std::string code;     // error code when !ok
  std::string message;  // error message when !ok
  nlohmann::ordered_json result = nlohmann::ordered_json::object();
};

class Episode {
 public:
  /// Throws ConfigError when max_turns < 1, no_improve_rounds < 1 or the target is not finite.
  Episode(std::shared_ptr<const CatchmentTask> task, EpisodeConfig cfg = {});

  /// `values` must be an object holding exactly the 13 parameter names with numeric values.
  ToolResult set_parameters(const nlohmann::json& values);
  ToolResult set_parameters(const ParameterSet& p);
  ToolResult run_simulation();
  ToolResult evaluate();
  ToolResult parse_failure();

  /// Marks the episode closed if it is still running. Not a tool call: no turn, no event.
  ToolResult close();

  /// Applies the termination rules (target, stall, turn cap, wall clock) in priority order.
  EpisodeStatus check_termination();

  EpisodeStatus status() const { return status_; }
  bool running() const { return status_ == EpisodeStatus::running; }
  int turn() const { return turn_; }
  const EpisodeCounts& counts() const { return counts_; }
  int consecutive_no_improve() const { return no_improve_; }
  double target() const { return target_; }
  std::optional<double> best_nse() const { return best_nse_; }
  const std::optional<ParameterSet>& best_parameters() const { return best_params_; }
  const std::optional<ParameterSet>& parameters() const { return params_; }
  const std::optional<Hydrograph>& hydrograph() const { return hydrograph_; }
  const std::optional<MetricPanel>& latest_panel() const { return panel_; }
  const std::vector<ToolEvent>& trajectory() const { return events_; }
  const CatchmentTask& task() const { return *task_; }
  const EpisodeConfig& config() const { return cfg_; }

  EpisodeSummary summary() const;
  /// Live-accumulated reward: per-turn shaping so far plus the terminal score of the current state.
  RewardTrace reward() const;

  nlohmann::ordered_json status_json() const;
  /// Reward trace plus the summary inputs.
  nlohmann::ordered_json score_json() const;

  /// JSONL, one event per line.
  void export_trajectory(std::ostream& out) const;
  void export_trajectory(const std::filesystem::path& path) const;

 private:
  ToolResult begin_call();
  ToolResult reject(const std::string& tool, nlohmann::ordered_json args, const char* code, std::string message,
                    std::chrono::steady_clock::time_point t0);
  void record(ToolEvent e, std::chrono::steady_clock::time_point t0);

  std::shared_ptr<const CatchmentTask> task_;
  EpisodeConfig cfg_;
  double target_;
  std::chrono::steady_clock::time_point started_;

  std::optional<ParameterSet> params_;
  std::optional<Hydrograph> hydrograph_;
  std::optional<MetricPanel> panel_;
  std::optional<double> best_nse_;
  std::optional<ParameterSet> best_params_;
  int turn_ = 0;
  int no_improve_ = 0;
  EpisodeCounts counts_;
  EpisodeStatus status_ = EpisodeStatus::running;
  std::vector<ToolEvent> events_;
  RewardAccumulator reward_;
};

nlohmann::ordered_json parameters_to_json(const ParameterSet& p);

/// Re-issues every recorded tool call on a fresh episode over `task`.
Episode replay_trajectory(std::shared_ptr<const CatchmentTask> task, const EpisodeConfig& cfg,
                          std::span<const ToolEvent> events);

}  // namespace hydrocal

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hydrocal/trajectory.hpp"

namespace hydrocal {

inline constexpr double kRewardSetParameters = 0.02;
inline constexpr double kRewardRunSimulation = 0.05;
inline constexpr double kRewardParseFailure = -0.5;
inline constexpr double kTargetBonus = 0.5;
inline constexpr double kPerEvaluation = 0.02;
inline constexpr double kPerExtraImprovement = 0.10;
inline constexpr double kEmptyPenalty = -1.0;

struct RewardComponents {
  double clipped_nse = 0.0;
  double target_bonus = 0.0;
  double eval_count_term = 0.0;
  double improve_bonus = 0.0;
  double empty_penalty = 0.0;

  double sum() const { return clipped_nse + target_bonus + eval_count_term + improve_bonus + empty_penalty; }
};

struct TurnReward {
  int turn;
  double value;
  std::string cause;
};

struct RewardTrace {
  std::vector<TurnReward> per_turn;
  double terminal = 0.0;
  double total = 0.0;
  RewardComponents components;
};

/// Inputs of the terminal score. `best_nse` is ignored when `empty`.
struct EpisodeSummary {
  double best_nse = 0.0;
  double target = 0.0;
  int n_eval = 0;
  int n_improve = 0;
  bool empty = true;
};

/// Shaping for one event: +0.02 set, +0.05 simulate, ΔNSE evaluate, −0.5 parse_failure or any rejection.
TurnReward turn_reward(const ToolEvent& event);

/// clip(NSE*,−1,1) + 0.5·1{NSE*>τ} + 0.02·n_eval + 0.10·max(0, n_improve−1) − 1·1{empty}.
/// An empty episode scores NSE* as −1 with no evaluations: −2 in total.
std::pair<double, RewardComponents> terminal_reward(const EpisodeSummary& s);

/// Accumulates per-turn rewards in event order; shared by live episodes and replay scoring.
class RewardAccumulator {
 public:
  void add(const ToolEvent& event);
  RewardTrace finish(const EpisodeSummary& summary) const;

 private:
  std::vector<TurnReward> per_turn_;
  double running_ = 0.0;
};

/// Scores a recorded trajectory. Events must carry derived improvement flags (see annotate_improvements).
/// Throws std::invalid_argument when turns are not strictly increasing.
RewardTrace score_trajectory(std::span<const ToolEvent> events, double target);

EpisodeSummary summarize(std::span<const ToolEvent> events, double target);

nlohmann::ordered_json to_json(const RewardTrace& trace);

}  // namespace hydrocal

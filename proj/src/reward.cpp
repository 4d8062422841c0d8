#include "hydrocal/reward.hpp"

#include <algorithm>
#include <stdexcept>

namespace hydrocal {

TurnReward turn_reward(const ToolEvent& e) {
  if (!e.ok) return {e.turn, kRewardParseFailure, "rejected " + e.tool};
  if (e.tool == kToolSetParameters) return {e.turn, kRewardSetParameters, e.tool};
  if (e.tool == kToolRunSimulation) return {e.turn, kRewardRunSimulation, e.tool};
  if (e.tool == kToolEvaluate) return {e.turn, e.delta_nse, e.improved ? "evaluate improved" : "evaluate"};
  if (e.tool == kToolParseFailure) return {e.turn, kRewardParseFailure, e.tool};
  throw std::invalid_argument("unknown tool '" + e.tool + "' in trajectory");
}

std::pair<double, RewardComponents> terminal_reward(const EpisodeSummary& s) {
  RewardComponents c;
  if (s.empty) {
    c.clipped_nse = -1.0;
    c.empty_penalty = kEmptyPenalty;
  } else {
    c.clipped_nse = std::clamp(s.best_nse, -1.0, 1.0);
    c.target_bonus = s.best_nse > s.target ? kTargetBonus : 0.0;
    c.eval_count_term = kPerEvaluation * s.n_eval;
    c.improve_bonus = kPerExtraImprovement * std::max(0, s.n_improve - 1);
  }
  return {c.sum(), c};
}

void RewardAccumulator::add(const ToolEvent& event) {
  const TurnReward r = turn_reward(event);
  running_ += r.value;
  per_turn_.push_back(r);
}

RewardTrace RewardAccumulator::finish(const EpisodeSummary& summary) const {
  RewardTrace t;
  t.per_turn = per_turn_;
  std::tie(t.terminal, t.components) = terminal_reward(summary);
  t.total = running_ + t.terminal;
  return t;
}

EpisodeSummary summarize(std::span<const ToolEvent> events, double target) {
  EpisodeSummary s;
  s.target = target;
  for (const auto& e : events) {
    if (e.tool != kToolEvaluate || !e.ok) continue;
    ++s.n_eval;
    if (e.improved) ++s.n_improve;
    if (e.best_nse) s.best_nse = *e.best_nse;
  }
  s.empty = s.n_eval == 0;
  return s;
}

RewardTrace score_trajectory(std::span<const ToolEvent> events, double target) {
  RewardAccumulator acc;
  int last_turn = -1;
  for (const auto& e : events) {
    if (e.turn <= last_turn) throw std::invalid_argument("trajectory turns are not strictly increasing");
    last_turn = e.turn;
    acc.add(e);
  }
  return acc.finish(summarize(events, target));
}

nlohmann::ordered_json to_json(const RewardTrace& t) {
  nlohmann::ordered_json j;
  j["per_turn"] = nlohmann::ordered_json::array();
  for (const auto& r : t.per_turn) j["per_turn"].push_back({{"turn", r.turn}, {"reward", r.value}, {"cause", r.cause}});
  j["terminal"] = t.terminal;
  j["total"] = t.total;
  j["components"] = {{"clipped_nse", t.components.clipped_nse},
                     {"target_bonus", t.components.target_bonus},
                     {"eval_count_term", t.components.eval_count_term},
                     {"improve_bonus", t.components.improve_bonus},
                     {"empty_penalty", t.components.empty_penalty}};
  return j;
}

}  // namespace hydrocal

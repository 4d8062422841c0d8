#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hydrocal {

inline constexpr const char* kToolSetParameters = "set_parameters";
inline constexpr const char* kToolRunSimulation = "run_simulation";
inline constexpr const char* kToolEvaluate = "evaluate";
inline constexpr const char* kToolParseFailure = "parse_failure";

/// One tool call of an episode.
struct ToolEvent {
  int turn = 0;
  std::string tool;
  nlohmann::ordered_json args = nlohmann::ordered_json::object();
  bool ok = true;
  std::string reason;                // rejection reason when !ok
  std::optional<double> nse;         // evaluate only
  std::optional<double> best_nse;    // evaluate only: running best after this call
  double dt_ms = 0.0;

  // Derived from the best_nse sequence; not serialized.
  bool improved = false;
  double delta_nse = 0.0;
};

/// Reward-facing change in best NSE. The pre-episode reference is 0 and the measure is floored
/// there, so it is never negative: max(new, 0) − max(prev, 0).
double best_nse_delta(std::optional<double> previous_best, double new_best);

/// Recomputes `improved` and `delta_nse` on every event from the best_nse sequence.
void annotate_improvements(std::vector<ToolEvent>& events);

nlohmann::ordered_json to_json(const ToolEvent& e);
ToolEvent event_from_json(const nlohmann::json& j);

struct TrajectoryRecord {
  std::vector<ToolEvent> events;
  std::optional<nlohmann::json> summary;  // trailing reward summary, if present
};

/// One event per line; `summary`, when given, is appended as a final line.
void write_trajectory_jsonl(std::span<const ToolEvent> events, std::ostream& out,
                            const std::optional<nlohmann::ordered_json>& summary = std::nullopt);

/// Throws std::runtime_error on malformed lines or non-increasing turns.
TrajectoryRecord read_trajectory_jsonl(std::istream& in);

}  // namespace hydrocal

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydrocal/calibrators.hpp"
#include "hydrocal/time.hpp"

namespace hydrocal {

enum class Split { train, test };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct GaugeTask {
  std::string gauge_id;
  Split split = Split::test;
  double basin_area_km2 = 0.0;
  UtcHour start{};
  UtcHour end{};
  std::filesystem::path control;
  double target_nse = kDefaultTargetNse;

  /// Throws ConfigError when the window is shorter than one day or the target is not finite.
  void validate() const;
};

/// Manifest: a JSON array of {gauge_id, split, basin_area_km2, start, end, control, target_nse?}.
/// Relative control paths resolve against the manifest's directory.
std::vector<GaugeTask> load_gauge_tasks(const std::filesystem::path& manifest);

struct BenchCell {
  std::string gauge_id;
  Split split = Split::test;
  std::string agent;
  std::uint64_t seed = 0;
  std::optional<CalibrationRun> run;
  std::string error;  // set when the cell failed

  bool ok() const { return run.has_value() && error.empty(); }
};

struct AgentAggregate {
  std::string agent;
  int cells = 0;  // cells with a best NSE
  double mean_nse = 0.0;
  double median_nse = 0.0;
};

struct BenchReport {
  int rounds = 0;
  int sweeps = 0;
  std::vector<BenchCell> cells;  // task-major, then agent, then seed
  std::vector<AgentAggregate> aggregates;

  nlohmann::ordered_json to_json() const;
  std::string to_table() const;
};

/// Aggregates recomputed from cells: mean and median of each agent's best NSEs.
std::vector<AgentAggregate> aggregate_cells(const std::vector<BenchCell>& cells, const std::vector<std::string>& agents);

struct BenchOptions {
  int rounds = 20;
  int sweeps = 10;
  int workers = 1;  // concurrent cells
  CalibrationOptions calibration;
};

/// Runs best_of_rounds for every (task, agent, seed). A failing cell records its error; the rest continue.
/// Output depends only on the inputs, not on `workers`.
BenchReport run_benchmark(const std::vector<GaugeTask>& tasks, const std::vector<std::string>& agents,
                          const std::vector<std::uint64_t>& seeds, const BenchOptions& options = {});

}  // namespace hydrocal

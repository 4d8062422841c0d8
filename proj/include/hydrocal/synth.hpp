#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <utility>
#include <vector>

#include "hydrocal/control.hpp"
#include "hydrocal/episode.hpp"
#include "hydrocal/forcing.hpp"
#include "hydrocal/params.hpp"
#include "hydrocal/raster.hpp"
#include "hydrocal/simulator.hpp"

namespace hydrocal {

/// Storm climate of a synthetic basin.
enum class SynthScenario { standard, flashy, wet };

std::string_view to_string(SynthScenario s);
SynthScenario scenario_from_string(std::string_view s);

struct SynthOptions {
  int n = 16;  // grid side, >= 4
  SynthScenario scenario = SynthScenario::standard;
  double noise_frac = 0.0;  // observation noise σ as a fraction of mean flow
  double cell_size_m = 100.0;
  int days = 60;
};

inline constexpr double kSynthPetMmH = 0.1;

/// A generated twin-experiment basin. Everything is a pure function of (seed, options).
struct SynthBasin {
  std::uint64_t seed = 0;
  SynthOptions options;
  Grid dem;
  Grid flowdir;  // D8 codes; the outlet is the bottom-right corner draining east
  BasinMask mask;
  std::vector<std::pair<CellIndex, CellIndex>> edges;  // (cell, downstream) for every non-outlet cell
  SimulationConfig config;  // file names relative to the bundle directory
  ParameterSet truth;
  ForcingSeries forcing;
  Hydrograph truth_run;
  TimeSeries q_obs;
  Basin basin;
};

/// Cone-like DEM falling toward the bottom-right corner with deterministic noise, steepest-descent D8,
/// true multipliers drawn from the middle half of each range, seeded storm pulses over constant PET.
/// Throws std::invalid_argument when n < 4, days < 2 or noise_frac < 0.
SynthBasin synth_basin(std::uint64_t seed, const SynthOptions& options = {});

/// Writes dem.asc, flowdir.asc, mask.asc, precip.csv, pet.csv, obs.csv, control.txt and truth.json.
/// Returns the control file path. Same seed and options give byte-identical files.
std::filesystem::path write_synth_bundle(const SynthBasin& synth, const std::filesystem::path& dir);

/// In-memory task over the synthetic basin (no files).
std::shared_ptr<const CatchmentTask> synth_task(const SynthBasin& synth);

}  // namespace hydrocal

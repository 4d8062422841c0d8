#include "hydrocal/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "hydrocal/numfmt.hpp"

namespace hydrocal {
namespace {

struct StormClimate {
  int count;
  double min_hours, max_hours;
  double min_rate, max_rate;  // mm/h
};

StormClimate climate(SynthScenario s) {
  switch (s) {
    case SynthScenario::standard: return {8, 3.0, 12.0, 2.0, 10.0};
    case SynthScenario::flashy: return {5, 1.0, 4.0, 10.0, 30.0};
    case SynthScenario::wet: return {14, 6.0, 24.0, 1.0, 5.0};
  }
  return {8, 3.0, 12.0, 2.0, 10.0};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string_view to_string(SynthScenario s) {
  switch (s) {
    case SynthScenario::standard: return "standard";
    case SynthScenario::flashy: return "flashy";
    case SynthScenario::wet: return "wet";
  }
  return "standard";
}

SynthScenario scenario_from_string(std::string_view s) {
  if (s == "standard" || s == "default") return SynthScenario::standard;
  if (s == "flashy") return SynthScenario::flashy;
  if (s == "wet") return SynthScenario::wet;
  throw std::invalid_argument("unknown scenario '" + std::string(s) + "' (expected standard, flashy or wet)");
}

SynthBasin synth_basin(std::uint64_t seed, const SynthOptions& opt) {
  if (opt.n < 4) throw std::invalid_argument("synthetic basin needs n >= 4");
  if (opt.days < 2) throw std::invalid_argument("synthetic basin needs at least 2 days");
  if (!(opt.noise_frac >= 0.0)) throw std::invalid_argument("noise_frac must be >= 0");

  SynthBasin s;
  s.seed = seed;
  s.options = opt;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Elevation rises 1 m per 100 m of distance from the corner; noise stays below a fifth of the
  // smallest drop toward the corner, so descent is strict and every cell reaches the outlet.
  const GridGeometry g{opt.n, opt.n, opt.cell_size_m, 0.0, 0.0, kDefaultNodata};
  const double slope = 0.01;
  const double amp = 0.2 * slope * opt.cell_size_m;
  s.dem = Grid(g);
  for (Eigen::Index r = 0; r < g.n_rows; ++r) {
    for (Eigen::Index c = 0; c < g.n_cols; ++c) {
      const double dr = static_cast<double>(g.n_rows - 1 - r);
      const double dc = static_cast<double>(g.n_cols - 1 - c);
      const double z = 100.0 + slope * opt.cell_size_m * std::hypot(dr, dc) + amp * (2.0 * unit(rng) - 1.0);
      double stored = 0.0;
      parse_double(format_g6(z), stored);
      s.dem(r, c) = stored;
    }
  }
  const FlowDir fd = d8_from_dem(s.dem);
  s.flowdir = fd.grid();
  s.mask = delineate_basin(fd, opt.n - 1, opt.n - 1);
  if (s.mask.cell_count() != g.size()) throw std::logic_error("synthetic basin is not fully connected");
  for (CellIndex i = 0; i < g.size(); ++i) {
    if (const auto d = fd.downstream(i)) s.edges.emplace_back(i, *d);
  }
  s.basin = make_basin(fd, s.mask);

  for (Param id : {Param::wm, Param::b, Param::im, Param::ke, Param::fc, Param::under, Param::leaki, Param::alpha,
                   Param::beta, Param::alpha0, Param::iwu}) {
    const auto& sp = spec(id);
    s.truth[id] = sp.lo + (0.25 + 0.5 * unit(rng)) * (sp.hi - sp.lo);
  }

  const Eigen::Index steps = static_cast<Eigen::Index>(opt.days) * 24;
  const UtcHour start = parse_utc_hour("2018-07-01T00");
  s.forcing.start = start;
  s.forcing.dt_hours = 1.0;
  s.forcing.pet = Eigen::ArrayXd::Constant(steps, kSynthPetMmH);
  s.forcing.precip = Eigen::ArrayXd::Zero(steps);
  const StormClimate cl = climate(opt.scenario);
  for (int k = 0; k < cl.count; ++k) {
    const double begin = unit(rng) * static_cast<double>(steps - 1);
    const double length = cl.min_hours + unit(rng) * (cl.max_hours - cl.min_hours);
    const double rate = cl.min_rate + unit(rng) * (cl.max_rate - cl.min_rate);
    const auto b = static_cast<Eigen::Index>(begin);
    const auto e = std::min(steps, b + static_cast<Eigen::Index>(std::ceil(length)));
    for (Eigen::Index t = b; t < e; ++t) {
      // Triangular pulse, rounded to 0.01 mm so the CSV round-trips exactly.
      const double phase = (static_cast<double>(t - b) + 0.5) / static_cast<double>(e - b);
      const double v = rate * (1.0 - std::abs(2.0 * phase - 1.0));
      s.forcing.precip[t] += std::round(v * 100.0) / 100.0;
    }
  }
  for (Eigen::Index t = 0; t < steps; ++t) {
    double stored = 0.0;
    parse_double(format_shortest(s.forcing.precip[t]), stored);
    s.forcing.precip[t] = stored;
  }

  auto& cfg = s.config;
  cfg.basic.timestep_hours = 1.0;
  cfg.grids.dem = "dem.asc";
  cfg.grids.flowdir = "flowdir.asc";
  cfg.grids.mask = "mask.asc";
  cfg.params = ParameterSet{};
  cfg.gauge.id = "synth-" + std::to_string(seed);
  cfg.gauge.outlet_row = opt.n - 1;
  cfg.gauge.outlet_col = opt.n - 1;
  cfg.gauge.obs_csv = "obs.csv";
  cfg.gauge.basin_area_km2 = s.basin.network.area_km2;
  cfg.forcing.precip_csv = "precip.csv";
  cfg.forcing.pet_csv = "pet.csv";
  cfg.window.start = start;
  cfg.window.end = s.forcing.time(steps - 1);

  s.truth_run = simulate(s.basin, s.forcing, s.truth, cfg.window.start, cfg.window.end);
  s.q_obs = TimeSeries{start, 1.0, s.truth_run.q_sim};
  if (opt.noise_frac > 0.0) {
    std::normal_distribution<double> noise(0.0, opt.noise_frac * s.q_obs.values.mean());
    for (Eigen::Index t = 0; t < steps; ++t) s.q_obs.values[t] = std::max(0.0, s.q_obs.values[t] + noise(rng));
  }
  return s;
}

std::filesystem::path write_synth_bundle(const SynthBasin& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_ascii_grid(s.dem, dir / "dem.asc");
  write_ascii_grid(s.flowdir, dir / "flowdir.asc");
  write_ascii_grid(s.mask.mask, dir / "mask.asc");
  write_series_csv(TimeSeries{s.forcing.start, s.forcing.dt_hours, s.forcing.precip}, kPrecipHeader,
                   dir / "precip.csv");
  write_series_csv(TimeSeries{s.forcing.start, s.forcing.dt_hours, s.forcing.pet}, kPetHeader, dir / "pet.csv");
  write_series_csv(s.q_obs, kObservationHeader, dir / "obs.csv");
  const auto control = dir / "control.txt";
  write_control_file(s.config, control);

  nlohmann::ordered_json truth;
  truth["seed"] = s.seed;
  truth["n"] = s.options.n;
  truth["scenario"] = std::string(to_string(s.options.scenario));
  truth["noise_frac"] = s.options.noise_frac;
  truth["params"] = parameters_to_json(s.truth);
  write_text(dir / "truth.json", truth.dump(2) + "\n");
  return control;
}

std::shared_ptr<const CatchmentTask> synth_task(const SynthBasin& s) {
  return make_task(s.config, s.basin, s.forcing, s.q_obs);
}

}  // namespace hydrocal

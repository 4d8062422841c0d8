#include "hydrocal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hydrocal/errors.hpp"
#include "hydrocal/numfmt.hpp"

namespace hydrocal {

// ---------------------------------------------------------------------------
// Parameters

BaselineFields BaselineFields::uniform(Eigen::Index n_cells, const SimulationConfig::Baselines& overrides) {
  BaselineFields out;
  for (std::size_t f = 0; f < kBaselineFieldCount; ++f) {
    out.fields[f] = Eigen::ArrayXd::Constant(n_cells, overrides.scalars[f].value_or(kDefaultBaselines[f]));
  }
  out.drain = overrides.drain.value_or(kDefaultDrainFraction);
  return out;
}

CellParams EffectiveParams::at(Eigen::Index i) const {
  return CellParams{wm[i],
                    b[i],
                    im[i],
                    ke[i],
                    ksat[i],
                    leak[i] * dt_hours,
                    std::clamp(under[i] * dt_hours * drain0, 0.0, 1.0)};
}

EffectiveParams apply_multipliers(const BaselineFields& baselines, const ParameterSet& p, double dt_hours) {
  const Eigen::Index n = baselines[BaselineField::wm].size();
  for (std::size_t f = 0; f < kBaselineFieldCount; ++f) {
    if (baselines.fields[f].size() == 0 || baselines.fields[f].size() != n) {
      throw std::invalid_argument("missing baseline field '" + std::string(kBaselineNames[f]) + "'");
    }
  }
  if (!(dt_hours > 0)) throw std::invalid_argument("timestep must be positive");

  EffectiveParams e;
  e.dt_hours = dt_hours;
  e.wm = baselines[BaselineField::wm] * p[Param::wm];
  e.b = baselines[BaselineField::b] * p[Param::b];
  e.im = (baselines[BaselineField::im] * p[Param::im]).max(0.0).min(1.0);
  e.ke = baselines[BaselineField::ke] * p[Param::ke];
  e.ksat = baselines[BaselineField::ksat] * p[Param::fc];
  e.under = baselines[BaselineField::under] * p[Param::under];
  e.leak = (baselines[BaselineField::leaki] * p[Param::leaki]).max(0.0).min(1.0 / dt_hours);
  e.alpha = baselines[BaselineField::alpha] * p[Param::alpha];
  e.beta = baselines[BaselineField::beta] * p[Param::beta];
  e.alpha0 = baselines[BaselineField::alpha0] * p[Param::alpha0];
  e.drain0 = baselines.drain;
  e.iwu = p[Param::iwu];
  e.isu = p[Param::isu];
  e.th = p[Param::th];
  return e;
}

// ---------------------------------------------------------------------------
// Cell processes

std::pair<CellState, VerticalFluxes> cell_water_balance(CellState s, double precip_mm, double pet_mm,
                                                        const CellParams& e, double dt_hours) {
  VerticalFluxes f;
  f.impervious = e.im * precip_mm;
  const double ps = precip_mm - f.impervious;
  const double deficit = e.wm - s.soil;

  double runoff = 0.0;
  if (ps > 0.0) {
    const double max_capacity = e.wm * (1.0 + e.b);
    const double dry = std::max(0.0, 1.0 - s.soil / e.wm);
    const double level = max_capacity * (1.0 - std::pow(dry, 1.0 / (1.0 + e.b)));
    if (level + ps < max_capacity) {
      runoff = ps - deficit + e.wm * std::pow(1.0 - (level + ps) / max_capacity, 1.0 + e.b);
    } else {
      runoff = ps - deficit;
    }
    runoff = std::clamp(runoff, std::max(0.0, ps - deficit), ps);
  }

  f.infiltration = ps - runoff;
  double soil = s.soil + f.infiltration;
  if (soil > e.wm) {
    soil = e.wm;
    f.infiltration = e.wm - s.soil;
    runoff = ps - f.infiltration;
  }

  const double demand = e.ke * pet_mm;
  f.et = std::min(soil, demand * (soil / e.wm));
  soil -= f.et;
  s.soil = std::max(0.0, soil);

  f.to_interflow = std::min(runoff, e.ksat * dt_hours);
  f.overland = runoff - f.to_interflow;

  if (std::isnan(f.et) || std::isnan(runoff) || std::isnan(s.soil)) {
    throw std::logic_error("NaN flux in cell water balance");
  }
  return {s, f};
}

std::pair<CellState, InterflowFluxes> interflow_step(CellState s, double inflow_mm, const CellParams& e) {
  InterflowFluxes f;
  const double store = s.interflow + inflow_mm;
  f.leaked = std::min(store, e.leak_fraction * store);
  const double remaining = store - f.leaked;
  f.drained = e.drain_fraction * remaining;
  s.interflow = remaining - f.drained;
  s.surface += f.drained;
  return {s, f};
}

// ---------------------------------------------------------------------------
// Network and routing

BasinNetwork build_network(const FlowDir& fd, const BasinMask& mask) {
  BasinNetwork net;
  net.geometry = fd.geometry();
  net.cells = topological_order(fd, mask);
  const auto n = net.size();
  std::vector<Eigen::Index> position(static_cast<std::size_t>(net.geometry.size()), -1);
  for (Eigen::Index k = 0; k < n; ++k) position[static_cast<std::size_t>(net.cells[static_cast<std::size_t>(k)])] = k;

  net.downstream.assign(static_cast<std::size_t>(n), -1);
  net.accumulation = Eigen::ArrayXd::Ones(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto d = fd.downstream(net.cells[static_cast<std::size_t>(k)]);
    if (k == n - 1 || !d) continue;  // the outlet discharges out of the basin
    net.downstream[static_cast<std::size_t>(k)] = position[static_cast<std::size_t>(*d)];
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto d = net.downstream[static_cast<std::size_t>(k)];
    if (d >= 0) net.accumulation[d] += net.accumulation[k];
  }
  net.area_km2 = static_cast<double>(n) * net.geometry.cell_size_m * net.geometry.cell_size_m / 1e6;
  return net;
}

double route_step(std::span<CellState> states, const BasinNetwork& net, std::span<const std::uint8_t> channel,
                  const EffectiveParams& e) {
  const auto n = net.size();
  thread_local std::vector<double> outflow;
  outflow.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double storage = states[static_cast<std::size_t>(k)].surface;
    if (storage <= 0.0) continue;
    const double c = channel[static_cast<std::size_t>(k)] ? e.alpha[k] : e.alpha0[k];
    outflow[static_cast<std::size_t>(k)] = std::min(storage, c * e.dt_hours * std::pow(storage, e.beta[k]));
  }
  double outlet = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double o = outflow[static_cast<std::size_t>(k)];
    if (o == 0.0) continue;
    states[static_cast<std::size_t>(k)].surface -= o;
    const auto d = net.downstream[static_cast<std::size_t>(k)];
    if (d >= 0) {
      states[static_cast<std::size_t>(d)].surface += o;
    } else {
      outlet += o;
    }
  }
  return outlet / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Basin loading

Basin make_basin(const FlowDir& fd, const BasinMask& mask, const SimulationConfig::Baselines& overrides) {
  Basin basin;
  basin.network = build_network(fd, mask);
  basin.baselines = BaselineFields::uniform(basin.network.size(), overrides);
  return basin;
}

Basin load_basin(const SimulationConfig& cfg, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  const FlowDir fd(load_ascii_grid(resolve(cfg.grids.flowdir)));
  const auto& g = fd.geometry();
  if (!g.in_bounds(cfg.gauge.outlet_row, cfg.gauge.outlet_col)) {
    throw ConfigError("gauge outlet (" + std::to_string(cfg.gauge.outlet_row) + ", " +
                      std::to_string(cfg.gauge.outlet_col) + ") lies outside the flow-direction grid");
  }

  BasinMask mask;
  if (cfg.grids.mask) {
    const Grid m = load_ascii_grid(resolve(*cfg.grids.mask));
    if (!m.geometry().same_shape(g)) throw ConfigError("mask grid shape differs from flow-direction grid");
    mask.mask = Grid(m.geometry(), 0.0);
    for (CellIndex i = 0; i < m.size(); ++i) mask.mask[i] = (!m.is_nodata(i) && m[i] != 0.0) ? 1.0 : 0.0;
    mask.outlet_row = cfg.gauge.outlet_row;
    mask.outlet_col = cfg.gauge.outlet_col;
    mask.area_km2 = static_cast<double>(mask.cell_count()) * g.cell_size_m * g.cell_size_m / 1e6;
    if (!mask.contains(g.index(mask.outlet_row, mask.outlet_col))) throw ConfigError("gauge outlet is outside the mask");
    const BasinMask traced = delineate_basin(fd, mask.outlet_row, mask.outlet_col);
    for (CellIndex i = 0; i < g.size(); ++i) {
      if (mask.contains(i) && !traced.contains(i)) {
        throw ConfigError("mask cell (" + std::to_string(i / g.n_cols) + ", " + std::to_string(i % g.n_cols) +
                          ") does not drain to the outlet");
      }
    }
  } else {
    mask = delineate_basin(fd, cfg.gauge.outlet_row, cfg.gauge.outlet_col);
  }

  Basin basin = make_basin(fd, mask, cfg.baselines);
  if (cfg.gauge.basin_area_km2 &&
      std::abs(*cfg.gauge.basin_area_km2 - basin.network.area_km2) > 1e-6 * basin.network.area_km2) {
    throw ConfigError("basin_area_km2=" + format_shortest(*cfg.gauge.basin_area_km2) + " disagrees with the mask area " +
                      format_shortest(basin.network.area_km2));
  }
  for (std::size_t f = 0; f < kBaselineFieldCount; ++f) {
    if (!cfg.grids.rasters[f]) continue;
    const Grid r = load_ascii_grid(resolve(*cfg.grids.rasters[f]));
    if (!r.geometry().same_shape(g)) {
      throw ConfigError("baseline raster '" + std::string(kBaselineNames[f]) + "' differs in shape from the flow grid");
    }
    auto& field = basin.baselines.fields[f];
    for (Eigen::Index k = 0; k < basin.network.size(); ++k) {
      const CellIndex cell = basin.network.cells[static_cast<std::size_t>(k)];
      if (r.is_nodata(cell) || !std::isfinite(r[cell]) || r[cell] < 0) {
        throw ConfigError("baseline raster '" + std::string(kBaselineNames[f]) + "' has an invalid value inside the basin");
      }
      field[k] = r[cell];
    }
    if (f == static_cast<std::size_t>(BaselineField::wm) && (field <= 0.0).any()) {
      throw ConfigError("baseline wm raster must be positive inside the basin");
    }
  }
  return basin;
}

// ---------------------------------------------------------------------------
// Simulation

double MassBalance::relative_closure() const { return std::abs(residual()) / std::max(precip_in, 1.0); }

Hydrograph simulate(const Basin& basin, const ForcingSeries& forcing, const ParameterSet& p, UtcHour start,
                    UtcHour end) {
  if (const auto v = check_bounds(p, /*allow_fixed_override=*/true); !v.empty()) {
    throw std::invalid_argument("parameters out of bounds: " + describe_violations(v));
  }
  const auto& net = basin.network;
  const Eigen::Index n = net.size();
  if (n == 0) throw ConfigError("basin has no cells");
  const double dt = forcing.dt_hours;
  if (forcing.precip.size() != forcing.pet.size() && !forcing.gridded()) {
    throw ConfigError("precipitation and PET series differ in length");
  }
  if (forcing.gridded()) {
    if (static_cast<Eigen::Index>(forcing.precip_grids.size()) != forcing.pet.size()) {
      throw ConfigError("precipitation grids and PET series differ in length");
    }
    if (!forcing.precip_grids.front().geometry().same_shape(net.geometry)) {
      throw ConfigError("precipitation grids differ in shape from the basin grid");
    }
  }

  const long offset_h = hours_between(forcing.start, start);
  const long span_h = hours_between(start, end);
  if (offset_h < 0 || span_h < 0 || std::fmod(static_cast<double>(offset_h), dt) != 0.0 ||
      std::fmod(static_cast<double>(span_h), dt) != 0.0) {
    throw std::out_of_range("window " + format_utc_hour(start) + " .. " + format_utc_hour(end) +
                            " is not aligned with the forcing series");
  }
  const auto first = static_cast<Eigen::Index>(static_cast<double>(offset_h) / dt);
  const auto steps = static_cast<Eigen::Index>(static_cast<double>(span_h) / dt) + 1;
  if (first + steps > forcing.size()) {
    throw std::out_of_range("window " + format_utc_hour(start) + " .. " + format_utc_hour(end) +
                            " extends past the forcing series");
  }

  SimulationGate::Permit permit(SimulationGate::global());

  const EffectiveParams eff = apply_multipliers(basin.baselines, p, dt);
  std::vector<CellParams> cell(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> channel(static_cast<std::size_t>(n));
  std::vector<CellState> state(static_cast<std::size_t>(n));
  double initial_storage = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto u = static_cast<std::size_t>(k);
    cell[u] = eff.at(k);
    channel[u] = net.accumulation[k] >= eff.th ? 1 : 0;
    state[u].soil = std::min(cell[u].wm, eff.iwu / 100.0 * cell[u].wm);
    state[u].interflow = eff.isu;
    initial_storage += state[u].total();
  }

  Hydrograph h;
  h.start = start;
  h.dt_hours = dt;
  h.q_sim = Eigen::ArrayXd::Zero(steps);
  const double nd = static_cast<double>(n);
  const double mm_to_cms = net.area_km2 * 1000.0 / (dt * 3600.0);
  MassBalance& ledger = h.ledger;

  for (Eigen::Index t = 0; t < steps; ++t) {
    const Eigen::Index ft = first + t;
    const double pet_mm = forcing.pet[ft] * dt;
    const double uniform_precip = forcing.gridded() ? 0.0 : forcing.precip[ft] * dt;
    double precip_sum = 0.0, et_sum = 0.0, leak_sum = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto u = static_cast<std::size_t>(k);
      double precip_mm = uniform_precip;
      if (forcing.gridded()) {
        const double v = forcing.precip_grids[static_cast<std::size_t>(ft)][net.cells[u]];
        precip_mm = forcing.precip_grids[static_cast<std::size_t>(ft)].is_nodata(net.cells[u]) ? 0.0 : v * dt;
      }
      auto [s1, vf] = cell_water_balance(state[u], precip_mm, pet_mm, cell[u], dt);
      s1.surface += vf.impervious + vf.overland;
      auto [s2, inter] = interflow_step(s1, vf.to_interflow, cell[u]);
      state[u] = s2;
      precip_sum += precip_mm;
      et_sum += vf.et;
      leak_sum += inter.leaked;
    }
    const double outlet_mm = route_step(state, net, channel, eff);
    ledger.precip_in += precip_sum / nd;
    ledger.et_out += et_sum / nd;
    ledger.deep_loss += leak_sum / nd;
    ledger.outlet_total += outlet_mm;
    h.q_sim[t] = outlet_mm * mm_to_cms;
  }

  double final_storage = 0.0;
  for (const auto& s : state) final_storage += s.total();
  ledger.storage_delta = (final_storage - initial_storage) / nd;
  return h;
}

// ---------------------------------------------------------------------------
// Admission gate

SimulationGate::SimulationGate(int width) : width_(width) {
  if (width < 1) throw std::invalid_argument("gate width must be >= 1");
}

SimulationGate& SimulationGate::global() {
  static SimulationGate gate(32);
  return gate;
}

void SimulationGate::set_width(int width) {
  if (width < 1) throw std::invalid_argument("gate width must be >= 1");
  {
    std::lock_guard lock(mu_);
    width_ = width;
  }
  cv_.notify_all();
}

int SimulationGate::width() const {
  std::lock_guard lock(mu_);
  return width_;
}

int SimulationGate::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

int SimulationGate::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

void SimulationGate::reset_peak() {
  std::lock_guard lock(mu_);
  peak_ = in_flight_;
}

SimulationGate::Permit::Permit(SimulationGate& gate) : gate_(gate) {
  std::unique_lock lock(gate_.mu_);
  gate_.cv_.wait(lock, [&] { return gate_.in_flight_ < gate_.width_; });
  ++gate_.in_flight_;
  gate_.peak_ = std::max(gate_.peak_, gate_.in_flight_);
}

SimulationGate::Permit::~Permit() {
  {
    std::lock_guard lock(gate_.mu_);
    --gate_.in_flight_;
  }
  gate_.cv_.notify_one();
}

}  // namespace hydrocal

#pragma once

#include <array>
#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hydrocal/control.hpp"
#include "hydrocal/forcing.hpp"
#include "hydrocal/params.hpp"
#include "hydrocal/raster.hpp"

namespace hydrocal {

// Synthetic-basin defaults for baseline fields when the control file supplies neither raster nor scalar.
inline constexpr std::array<double, kBaselineFieldCount> kDefaultBaselines{
    100.0,  // wm: soil capacity (mm)
    1.0,    // b: curve exponent
    0.05,   // im: impervious fraction
    1.0,    // ke: PET scale
    5.0,    // ksat (mm/h)
    1.0,    // under: interflow drain-rate scale
    0.05,   // leaki: leakage (1/h)
    0.8,    // alpha: channel conveyance
    0.8,    // beta: channel exponent
    0.3,    // alpha0: overland conveyance
};
inline constexpr double kDefaultDrainFraction = 0.3;

struct CellState {
  double soil = 0.0;       // W (mm), 0 <= W <= WM
  double interflow = 0.0;  // S_int (mm)
  double surface = 0.0;    // S_surf (mm)

  double total() const { return soil + interflow + surface; }
};

/// Effective parameters of one cell for a step of length dt.
struct CellParams {
  double wm;              // mm
  double b;
  double im;              // [0, 1]
  double ke;
  double ksat;            // mm/h
  double leak_fraction;   // L_leak·Δt, [0, 1]
  double drain_fraction;  // clamp(V_under·Δt·d0, 0, 1)
};

struct VerticalFluxes {
  double impervious = 0.0;    // R_imp
  double overland = 0.0;      // R_overland
  double to_interflow = 0.0;  // R_to_interflow
  double et = 0.0;
  double infiltration = 0.0;  // F
};

struct InterflowFluxes {
  double drained = 0.0;
  double leaked = 0.0;
};

/// Baseline fields over the basin cells (network order). Multipliers scale these.
struct BaselineFields {
  std::array<Eigen::ArrayXd, kBaselineFieldCount> fields;
  double drain = kDefaultDrainFraction;

  const Eigen::ArrayXd& operator[](BaselineField f) const { return fields[static_cast<std::size_t>(f)]; }
  Eigen::ArrayXd& operator[](BaselineField f) { return fields[static_cast<std::size_t>(f)]; }

  /// Spatially uniform fields, defaults overridden by any scalars given.
  static BaselineFields uniform(Eigen::Index n_cells, const SimulationConfig::Baselines& overrides = {});
};

struct EffectiveParams {
  Eigen::ArrayXd wm, b, im, ke, ksat, under, leak, alpha, beta, alpha0;
  double drain0 = kDefaultDrainFraction;
  double iwu = 50.0;  // % of WM
  double isu = 0.0;   // mm
  double th = 10.0;   // cells
  double dt_hours = 1.0;

  Eigen::Index size() const { return wm.size(); }
  CellParams at(Eigen::Index i) const;
};

/// Elementwise baseline × multiplier; IM clamped to [0,1] and L_leak·Δt to [0,1].
/// Throws std::invalid_argument when a baseline field is missing or mis-sized.
EffectiveParams apply_multipliers(const BaselineFields& baselines, const ParameterSet& p, double dt_hours);

/// Variable-infiltration-curve partition of one step's precipitation and PET depth (mm), followed by ET.
/// Balance: P = R_imp + R_overland + R_to_interflow + ET + ΔW.
std::pair<CellState, VerticalFluxes> cell_water_balance(CellState s, double precip_mm, double pet_mm,
                                                        const CellParams& e, double dt_hours);

/// Leak to deep storage, then drain a fraction of the remainder into the surface store.
std::pair<CellState, InterflowFluxes> interflow_step(CellState s, double inflow_mm, const CellParams& e);

/// Basin cells in topological order with compact downstream links.
struct BasinNetwork {
  GridGeometry geometry;
  std::vector<CellIndex> cells;          // grid linear index per network cell
  std::vector<Eigen::Index> downstream;  // network index, -1 at the outlet
  Eigen::ArrayXd accumulation;           // upstream cell count
  double area_km2 = 0.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(cells.size()); }
};

BasinNetwork build_network(const FlowDir& fd, const BasinMask& mask);

/// One routing step. Outflow of each cell is computed from its storage at the start of the step,
/// O = min(S, c·Δt·S^β) with c = ALPHA on channel cells and ALPHA0 elsewhere, and moved downstream.
/// Returns the outlet's outflow as depth over the whole basin (mm).
double route_step(std::span<CellState> states, const BasinNetwork& net, std::span<const std::uint8_t> channel,
                  const EffectiveParams& e);

struct Basin {
  BasinNetwork network;
  BaselineFields baselines;
};

/// Basin from flow directions and a mask, with uniform baselines.
Basin make_basin(const FlowDir& fd, const BasinMask& mask, const SimulationConfig::Baselines& overrides = {});

/// Reads flowdir (+ optional mask and baseline rasters) named in `cfg`, resolving relative paths against
/// `base_dir`. Without a mask file the basin is delineated from the gauge outlet.
Basin load_basin(const SimulationConfig& cfg, const std::filesystem::path& base_dir);

/// All terms are depths over the basin (mm).
struct MassBalance {
  double precip_in = 0.0;
  double et_out = 0.0;
  double deep_loss = 0.0;
  double boundary_out = 0.0;
  double outlet_total = 0.0;
  double storage_delta = 0.0;

  double residual() const {
    return precip_in - (et_out + deep_loss + boundary_out + outlet_total + storage_delta);
  }
  double relative_closure() const;
};

struct Hydrograph {
  UtcHour start{};
  double dt_hours = 1.0;
  Eigen::ArrayXd q_sim;  // m³/s
  std::optional<Eigen::ArrayXd> q_obs;
  MassBalance ledger;
  Eigen::Index warmup_steps = 0;

  Eigen::Index size() const { return q_sim.size(); }
  UtcHour time(Eigen::Index i) const {
    return start + std::chrono::hours(static_cast<long>(static_cast<double>(i) * dt_hours));
  }
};

/// Runs the basin over [start, end] (inclusive, step = forcing.dt_hours).
/// Initial state: W = IWU/100·WM, S_int = ISU, S_surf = 0. Deterministic.
/// Throws std::out_of_range (window), std::invalid_argument (parameters), ConfigError (shapes).
Hydrograph simulate(const Basin& basin, const ForcingSeries& forcing, const ParameterSet& p, UtcHour start,
                    UtcHour end);

/// Bounds concurrent simulations process-wide.
class SimulationGate {
 public:
  explicit SimulationGate(int width = 32);

  static SimulationGate& global();

  void set_width(int width);
  int width() const;
  int in_flight() const;
  int peak() const;
  void reset_peak();

  class Permit {
   public:
    explicit Permit(SimulationGate& gate);
    ~Permit();
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    SimulationGate& gate_;
  };

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int width_;
  int in_flight_ = 0;
  int peak_ = 0;
};

}  // namespace hydrocal

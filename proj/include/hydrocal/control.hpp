#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "hydrocal/errors.hpp"
#include "hydrocal/params.hpp"
#include "hydrocal/time.hpp"

namespace hydrocal {

/// Spatially distributed baseline fields that multipliers scale.
enum class BaselineField : std::size_t { wm, b, im, ke, ksat, under, leaki, alpha, beta, alpha0 };
inline constexpr std::size_t kBaselineFieldCount = 10;
inline constexpr std::array<std::string_view, kBaselineFieldCount> kBaselineNames{
    "wm", "b", "im", "ke", "ksat", "under", "leaki", "alpha", "beta", "alpha0"};

inline constexpr double kDefaultTargetNse = 0.8075;

struct SimulationConfig {
  struct Basic {
    double timestep_hours = 1.0;
    std::optional<double> warmup_hours;
  } basic;

  struct Grids {
    std::optional<std::string> dem;
    std::string flowdir;
    std::optional<std::string> mask;
    std::array<std::optional<std::string>, kBaselineFieldCount> rasters;
  } grids;

  struct Baselines {
    std::array<std::optional<double>, kBaselineFieldCount> scalars;
    std::optional<double> drain;
    bool any() const;
  } baselines;

  ParameterSet params;

  struct Gauge {
    std::string id;
    long outlet_row = 0;
    long outlet_col = 0;
    std::optional<std::string> obs_csv;
    std::optional<double> target_nse;
    std::optional<double> basin_area_km2;
  } gauge;

  struct Forcing {
    std::string precip_csv;
    std::string pet_csv;
  } forcing;

  struct Window {
    UtcHour start;
    UtcHour end;
  } window;

  double warmup_hours() const { return basic.warmup_hours.value_or(0.0); }
  double target_nse() const { return gauge.target_nse.value_or(kDefaultTargetNse); }
};

/// A [CrestParams] value outside its documented range.
class ControlBoundsError : public ParseError {
 public:
  using ParseError::ParseError;
};

SimulationConfig parse_control(std::istream& in, const std::string& source = "<control>");
SimulationConfig parse_control_file(const std::filesystem::path& path);

/// Canonical text: fixed section and key order, optional keys only when set.
std::string format_control(const SimulationConfig& cfg);
void write_control_file(const SimulationConfig& cfg, const std::filesystem::path& path);

}  // namespace hydrocal

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hydrocal/raster.hpp"
#include "hydrocal/time.hpp"

namespace hydrocal {

/// Regularly spaced series starting at `start` with spacing `dt_hours`.
struct TimeSeries {
  UtcHour start{};
  double dt_hours = 1.0;
  Eigen::ArrayXd values;

  Eigen::Index size() const { return values.size(); }
  UtcHour time(Eigen::Index i) const {
    return start + std::chrono::hours(static_cast<long>(static_cast<double>(i) * dt_hours));
  }
  /// Step index of `t`; throws std::out_of_range when `t` is off-grid or outside the series.
  Eigen::Index index_of(UtcHour t) const;
  /// Inclusive sub-series [from, to].
  TimeSeries slice(UtcHour from, UtcHour to) const;
};

inline constexpr const char* kObservationHeader = "timestamp,discharge_cms";
inline constexpr const char* kPrecipHeader = "timestamp,precip_mm_h";
inline constexpr const char* kPrecipGridHeader = "timestamp,precip_grid";
inline constexpr const char* kPetHeader = "timestamp,pet_mm_h";

/// Reads a two-column `timestamp,<value>` CSV with the exact `header`. Values must be finite and >= 0,
/// timestamps hourly-aligned and evenly spaced. Errors are ParseError with line numbers.
TimeSeries read_series_csv(std::istream& in, const std::string& header, const std::string& source);
TimeSeries load_series_csv(const std::filesystem::path& path, const std::string& header);
void write_series_csv(const TimeSeries& s, const std::string& header, std::ostream& out);
void write_series_csv(const TimeSeries& s, const std::string& header, const std::filesystem::path& path);

/// Gauge discharge (m³/s).
inline TimeSeries load_observations(const std::filesystem::path& path) {
  return load_series_csv(path, kObservationHeader);
}

/// Basin forcing in mm/h. Precipitation is uniform per step unless `precip_grids` is non-empty,
/// in which case it holds one raster per step and `precip` is unused.
struct ForcingSeries {
  UtcHour start{};
  double dt_hours = 1.0;
  Eigen::ArrayXd precip;
  std::vector<Grid> precip_grids;
  Eigen::ArrayXd pet;

  Eigen::Index size() const { return pet.size(); }
  bool gridded() const { return !precip_grids.empty(); }
  UtcHour time(Eigen::Index i) const {
    return start + std::chrono::hours(static_cast<long>(static_cast<double>(i) * dt_hours));
  }
};

/// Loads `precip_csv` (uniform `timestamp,precip_mm_h` or gridded `timestamp,precip_grid` whose
/// second column names ASCII grids relative to the CSV) and `pet_csv`. Both must share timestamps.
ForcingSeries load_forcing(const std::filesystem::path& precip_csv, const std::filesystem::path& pet_csv,
                           double dt_hours);

}  // namespace hydrocal

#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Core>
#include <json.hpp>

namespace hydrocal {

using SeriesRef = Eigen::Ref<const Eigen::ArrayXd>;

/// Nash–Sutcliffe efficiency. Throws UndefinedMetric for length < 2, mismatched lengths or zero obs variance.
double nse(const SeriesRef& obs, const SeriesRef& sim);

struct KgeComponents {
  double r;      // Pearson correlation
  double alpha;  // std(sim) / std(obs)
  double beta;   // mean(sim) / mean(obs)
  double kge;
};

/// Throws UndefinedMetric when obs mean <= 0 or either series has zero variance.
KgeComponents kge_components(const SeriesRef& obs, const SeriesRef& sim);

struct PeakLag {
  std::optional<double> peak_ratio;  // absent when the observed peak is 0
  double peak_error_cms;             // sim peak − obs peak
  double lag_hours;                  // positive: simulated peak is late
};

/// Global maxima, ties to the earliest index.
PeakLag peak_and_lag(const SeriesRef& obs, const SeriesRef& sim, double dt_hours = 1.0);

/// Least-squares slope of ln(Q) per hour over the longest strictly decreasing run that starts at or
/// after the global peak. Absent when that run has fewer than 3 positive points.
std::optional<double> recession_slope(const SeriesRef& q, double dt_hours = 1.0);

/// Linear-interpolation percentile, `fraction` in [0, 1].
double percentile(const SeriesRef& q, double fraction);

/// Local maxima >= 2 × baseflow, at least `min_gap_hours` apart (the larger peak wins a conflict).
int event_count(const SeriesRef& q, double baseflow, double dt_hours = 1.0, double min_gap_hours = 12.0);

/// Hours from the lowest point preceding the global peak (latest if tied) to the peak.
double time_to_peak_hours(const SeriesRef& q, double dt_hours = 1.0);

struct Signatures {
  std::optional<double> volume_ratio;
  std::optional<double> recession_slope_sim;
  std::optional<double> recession_slope_obs;
  double time_to_peak_hours = 0.0;
  double baseflow_cms = 0.0;
  int event_count = 0;
};

/// Shape signatures; time-to-peak, baseflow (25th percentile) and event count describe `sim`.
/// Throws UndefinedMetric when obs sums to zero (volume ratio undefined).
Signatures signatures(const SeriesRef& obs, const SeriesRef& sim, double dt_hours = 1.0);

enum class Band { unsatisfactory, satisfactory, good, very_good };

/// NSE <= 0.50 unsatisfactory, <= 0.70 satisfactory, <= 0.85 good, else very good. NaN throws.
Band moriasi_band(double nse_value);
std::string_view to_string(Band band);

/// The evaluate payload. Undefined entries are empty and serialize as null.
struct MetricPanel {
  std::optional<double> nse;
  std::optional<double> kge;
  std::optional<double> kge_r;
  std::optional<double> kge_alpha;
  std::optional<double> kge_beta;
  std::optional<double> rmse;
  std::optional<double> pbias;
  std::optional<double> peak_ratio;
  std::optional<double> peak_error_cms;
  std::optional<double> lag_hours;
  std::optional<double> volume_ratio;
  std::optional<double> recession_slope_sim;
  std::optional<double> recession_slope_obs;
  std::optional<double> time_to_peak_hours;
  std::optional<double> baseflow_cms;
  std::optional<int> event_count;
  std::optional<Band> band;
  std::optional<double> kge_high;  // obs above its 90th percentile
  std::optional<double> kge_low;   // obs below its 50th percentile
};

MetricPanel metric_panel(const SeriesRef& obs, const SeriesRef& sim, double dt_hours = 1.0);

nlohmann::ordered_json to_json(const MetricPanel& panel);

}  // namespace hydrocal

#include "hydrocal/event_window.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hydrocal {

double event_window_score(double peak_ratio, double t_rise_hours, double t_recess_hours) {
  return std::log10(peak_ratio + 1.0) * std::sqrt(t_rise_hours * t_recess_hours);
}

EventWindow score_window(const TimeSeries& series, Eigen::Index start, Eigen::Index length) {
  if (start < 0 || length < 1 || start + length > series.size()) throw std::out_of_range("window outside the series");
  const auto w = series.values.segment(start, length);
  Eigen::Index peak = 0;
  for (Eigen::Index i = 1; i < length; ++i) {
    if (w[i] > w[peak]) peak = i;
  }
  Eigen::Index low = peak;
  for (Eigen::Index i = peak; i >= 0; --i) {
    if (w[i] < w[low]) low = i;
  }
  Eigen::Index back = length - 1;
  for (Eigen::Index i = peak + 1; i < length; ++i) {
    if (w[i] <= w[low]) {
      back = i;
      break;
    }
  }

  EventWindow ev;
  ev.start_index = start;
  ev.length = length;
  ev.t0 = series.time(start);
  ev.t1 = series.time(start + length - 1);
  const double mean = w.mean();
  ev.peak_ratio = mean > 0.0 ? w[peak] / mean : 1.0;
  ev.t_rise_hours = static_cast<double>(peak - low) * series.dt_hours;
  ev.t_recess_hours = static_cast<double>(back - peak) * series.dt_hours;
  ev.score = event_window_score(ev.peak_ratio, ev.t_rise_hours, ev.t_recess_hours);
  return ev;
}

std::vector<EventWindow> scan_event_windows(const TimeSeries& series, int window_days) {
  if (window_days < 1) throw std::invalid_argument("window_days must be >= 1");
  const double steps_per_day = 24.0 / series.dt_hours;
  if (steps_per_day != std::floor(steps_per_day) || steps_per_day < 1.0) {
    throw std::invalid_argument("series spacing must divide one day");
  }
  const auto stride = static_cast<Eigen::Index>(steps_per_day);
  const Eigen::Index length = stride * window_days;
  if (series.size() < length) {
    throw std::invalid_argument("series of " + std::to_string(series.size()) + " steps is shorter than a " +
                                std::to_string(window_days) + "-day window");
  }
  std::vector<EventWindow> out;
  for (Eigen::Index s = 0; s + length <= series.size(); s += stride) out.push_back(score_window(series, s, length));
  return out;
}

EventWindow select_event_window(const TimeSeries& series, int window_days) {
  const auto all = scan_event_windows(series, window_days);
  std::size_t best = 0;
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].score > all[best].score + kScoreTieTolerance * std::max(1.0, all[best].score)) best = i;
  }
  return all[best];
}

}  // namespace hydrocal

#pragma once

#include <vector>

#include "hydrocal/forcing.hpp"
#include "hydrocal/time.hpp"

namespace hydrocal {

/// log10(peak_ratio + 1) · sqrt(t_rise · t_recess), times in hours.
double event_window_score(double peak_ratio, double t_rise_hours, double t_recess_hours);

struct EventWindow {
  Eigen::Index start_index = 0;  // first step of the window
  Eigen::Index length = 0;       // steps
  UtcHour t0{};
  UtcHour t1{};  // last step, inclusive
  double score = 0.0;
  double peak_ratio = 0.0;  // window peak / window mean (1 for an all-zero window)
  double t_rise_hours = 0.0;
  double t_recess_hours = 0.0;
};

/// Scores the window of `length` steps starting at `start`. The rise runs from the lowest point
/// before the peak (latest if tied) to the first maximum; the recession from the peak to the first
/// step at or below that pre-event level, or to the window end.
EventWindow score_window(const TimeSeries& series, Eigen::Index start, Eigen::Index length);

/// Scores this close (relative) are ties; summation order alone can separate equal windows.
inline constexpr double kScoreTieTolerance = 1e-12;

/// Best-scoring window over daily starts; ties go to the earliest start.
/// Throws std::invalid_argument when the series is shorter than the window.
EventWindow select_event_window(const TimeSeries& series, int window_days = 60);

/// Scores of every daily window start, in order.
std::vector<EventWindow> scan_event_windows(const TimeSeries& series, int window_days = 60);

}  // namespace hydrocal

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hydrocal/metrics.hpp"
#include "hydrocal/params.hpp"

namespace hydrocal {

enum class ParamGroup { routing, et_impervious, recession, timing, partition, balance, none };

std::string_view to_string(ParamGroup g);

struct Diagnosis {
  ParamGroup group = ParamGroup::none;
  std::vector<Param> members;  // parameters to adjust, most influential first
  std::string text;
};

/// Rule-based diagnosis of a metric panel; the first matching rule wins:
///   peak deficit (ratio < 0.85) with balanced volume (|vr−1| ≤ 0.1)  → alpha, beta, alpha0
///   volume surplus (vr > 1.1) with balanced peak (|pr−1| ≤ 0.15)     → ke, im
///   recession slope off by more than 25 %                             → fc, under, leaki
///   peak lag beyond 2 h                                               → alpha0, alpha
///   remaining volume or peak mismatch                                 → wm, b, im
///   otherwise                                                         → ke, iwu
/// A null panel yields "no simulation to diagnose".
Diagnosis diagnose(const MetricPanel* panel);

}  // namespace hydrocal

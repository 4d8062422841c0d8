#include "hydrocal/diagnosis.hpp"

#include <cmath>
#include <sstream>

#include <cstdio>

namespace hydrocal {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string names(const std::vector<Param>& ps) {
  std::string s;
  for (auto p : ps) {
    if (!s.empty()) s += "/";
    s += spec(p).name;
  }
  return s;
}

Diagnosis make(ParamGroup g, std::vector<Param> members, const std::string& finding, const std::string& advice) {
  Diagnosis d{g, std::move(members), {}};
  d.text = finding + " Suspect " + std::string(to_string(g)) + " parameters (" + names(d.members) + "). " + advice;
  return d;
}

}  // namespace

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::routing: return "routing";
    case ParamGroup::et_impervious: return "evapotranspiration/impervious";
    case ParamGroup::recession: return "recession";
    case ParamGroup::timing: return "timing";
    case ParamGroup::partition: return "runoff partition";
    case ParamGroup::balance: return "balance";
    case ParamGroup::none: return "none";
  }
  return "none";
}

Diagnosis diagnose(const MetricPanel* m) {
  if (m == nullptr) return {ParamGroup::none, {}, "no simulation to diagnose"};

  const auto vr = m->volume_ratio;
  const auto pr = m->peak_ratio;

  if (pr && vr && *pr < 0.85 && std::abs(*vr - 1.0) <= 0.10) {
    return make(ParamGroup::routing, {Param::alpha, Param::beta, Param::alpha0},
                "Peak under-predicted (peak ratio " + fmt(*pr) + ") with balanced volume (volume ratio " + fmt(*vr) +
                    ").",
                "Adjust routing velocity before soil storage.");
  }
  if (pr && vr && *vr > 1.10 && std::abs(*pr - 1.0) <= 0.15) {
    return make(ParamGroup::et_impervious, {Param::ke, Param::im},
                "Volume surplus (volume ratio " + fmt(*vr) + ") with balanced peak (peak ratio " + fmt(*pr) + ").",
                "Raise evapotranspiration or lower the impervious fraction.");
  }
  if (m->recession_slope_sim && m->recession_slope_obs && *m->recession_slope_obs != 0.0) {
    const double rel = *m->recession_slope_sim / *m->recession_slope_obs;
    if (std::abs(rel - 1.0) > 0.25) {
      return make(ParamGroup::recession, {Param::fc, Param::under, Param::leaki},
                  std::string(rel > 1.0 ? "Recession too steep" : "Recession too flat") + " (slope ratio " + fmt(rel) +
                      ").",
                  "Reshape the recession limb through subsurface drainage.");
    }
  }
  if (m->lag_hours && std::abs(*m->lag_hours) > 2.0) {
    return make(ParamGroup::timing, {Param::alpha0, Param::alpha},
                std::string(*m->lag_hours > 0 ? "Simulated peak late" : "Simulated peak early") + " by " +
                    fmt(std::abs(*m->lag_hours)) + " h.",
                "Change overland and channel conveyance.");
  }
  if ((vr && std::abs(*vr - 1.0) > 0.10) || (pr && std::abs(*pr - 1.0) > 0.15)) {
    return make(ParamGroup::partition, {Param::wm, Param::b, Param::im},
                "Volume or peak mismatch (volume ratio " + (vr ? fmt(*vr) : std::string("n/a")) + ", peak ratio " +
                    (pr ? fmt(*pr) : std::string("n/a")) + ").",
                "Rebalance the rainfall-to-runoff partition.");
  }
  return make(ParamGroup::balance, {Param::ke, Param::iwu}, "Signatures broadly balanced.",
              "Fine-tune evapotranspiration and initial soil moisture.");
}

}  // namespace hydrocal

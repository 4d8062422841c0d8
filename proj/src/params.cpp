#include "hydrocal/params.hpp"

#include <cmath>

#include "hydrocal/numfmt.hpp"

namespace hydrocal {

std::optional<Param> param_from_name(std::string_view name) {
  for (const auto& s : kParamSpecs) {
    if (s.name == name) return s.id;
  }
  return std::nullopt;
}

ParameterSet::ParameterSet() {
  values_.fill(1.0);
  (*this)[Param::iwu] = 50.0;
  (*this)[Param::th] = spec(Param::th).fixed_value;
  (*this)[Param::isu] = spec(Param::isu).fixed_value;
}

std::string BoundViolation::describe() const {
  if (lo == hi) return name + "=" + format_shortest(value) + " must equal " + format_bound(lo);
  return name + "=" + format_shortest(value) + " outside [" + format_bound(lo) + "," + format_bound(hi) + "]";
}

std::vector<BoundViolation> check_bounds(const ParameterSet& p, bool allow_fixed_override) {
  std::vector<BoundViolation> out;
  for (const auto& s : kParamSpecs) {
    const double v = p[s.id];
    double lo = s.lo;
    double hi = s.hi;
    if (s.fixed && !allow_fixed_override) lo = hi = s.fixed_value;
    if (!std::isfinite(v) || v < lo || v > hi) out.push_back({std::string(s.name), v, lo, hi});
  }
  return out;
}

std::string describe_violations(const std::vector<BoundViolation>& v) {
  std::string s;
  for (const auto& x : v) {
    if (!s.empty()) s += "; ";
    s += x.describe();
  }
  return s;
}

}  // namespace hydrocal

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hydrocal {

/// The 13 scalar multipliers, in canonical order.
enum class Param : std::size_t { wm, b, im, ke, fc, under, leaki, alpha, beta, alpha0, iwu, th, isu };

inline constexpr std::size_t kParamCount = 13;
inline constexpr std::size_t kCalibratedCount = 11;  // wm .. iwu; th and isu are held fixed

struct ParamSpec {
  Param id;
  std::string_view name;
  double lo;
  double hi;
  bool fixed;          // th, isu: held at `fixed_value` unless overridden
  double fixed_value;
  std::string_view group;
};

// Physical ranges; th/isu `lo..hi` are only the syntactic limits used when an override is allowed.
inline constexpr std::array<ParamSpec, kParamCount> kParamSpecs{{
    {Param::wm, "wm", 0.1, 10.0, false, 0.0, "soil moisture"},
    {Param::b, "b", 1e-6, 3.0, false, 0.0, "infiltration"},
    {Param::im, "im", 0.0, 1.0, false, 0.0, "surface partitioning"},
    {Param::ke, "ke", 0.8, 1.2, false, 0.0, "evapotranspiration"},
    {Param::fc, "fc", 0.1, 2.0, false, 0.0, "subsurface"},
    {Param::under, "under", 0.1, 10.0, false, 0.0, "interflow"},
    {Param::leaki, "leaki", 0.1, 10.0, false, 0.0, "interflow"},
    {Param::alpha, "alpha", 0.1, 3.0, false, 0.0, "channel routing"},
    {Param::beta, "beta", 0.1, 3.0, false, 0.0, "channel routing"},
    {Param::alpha0, "alpha0", 0.0, 3.0, false, 0.0, "overland routing"},
    {Param::iwu, "iwu", 0.1, 100.0, false, 0.0, "initial state"},
    {Param::th, "th", 1.0, 1e9, true, 10.0, "network"},
    {Param::isu, "isu", 0.0, 1e9, true, 0.0, "initial state"},
}};

constexpr const ParamSpec& spec(Param p) { return kParamSpecs[static_cast<std::size_t>(p)]; }
std::optional<Param> param_from_name(std::string_view name);

class ParameterSet {
 public:
  /// All multipliers 1.0, iwu 50 %, th and isu at their fixed values.
  ParameterSet();

  double operator[](Param p) const { return values_[static_cast<std::size_t>(p)]; }
  double& operator[](Param p) { return values_[static_cast<std::size_t>(p)]; }

  const std::array<double, kParamCount>& values() const { return values_; }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::array<double, kParamCount> values_{};
};

struct BoundViolation {
  std::string name;
  double value;
  double lo;
  double hi;

  /// e.g. "im=-0.1 outside [0.0,1.0]"; fixed parameters read "th=12 must equal 10.0".
  std::string describe() const;
};

/// Inclusive range checks. th/isu must equal their fixed values unless `allow_fixed_override`.
std::vector<BoundViolation> check_bounds(const ParameterSet& p, bool allow_fixed_override = false);

std::string describe_violations(const std::vector<BoundViolation>& v);

}  // namespace hydrocal

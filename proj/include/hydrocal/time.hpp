#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace hydrocal {

/// Hour-resolution UTC instant.
using UtcHour = std::chrono::sys_time<std::chrono::hours>;

/// Parses `YYYY-MM-DDTHH`, optionally followed by `:00`, `:00:00` and/or `Z`.
/// Non-zero minutes or seconds are rejected. Throws std::invalid_argument.
UtcHour parse_utc_hour(std::string_view text);

/// Formats as `YYYY-MM-DDTHH`.
std::string format_utc_hour(UtcHour t);

inline long hours_between(UtcHour from, UtcHour to) {
  return static_cast<long>((to - from).count());
}

}  // namespace hydrocal

#pragma once

#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace hydrocal {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("to_chars failed");
  return std::string(buf, ptr);
}

/// `%.6g`, the pinned precision of grid cell values.
inline std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Bound text as written in parameter tables: integers keep a trailing ".0".
inline std::string format_bound(double v) {
  std::string s = format_shortest(v);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

/// Strict full-token parse of a double; returns false on any trailing junk.
inline bool parse_double(std::string_view token, double& out) {
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

inline bool parse_int(std::string_view token, long& out) {
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

}  // namespace hydrocal

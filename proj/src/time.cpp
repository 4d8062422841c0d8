#include "hydrocal/time.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace hydrocal {
namespace {

int read_fixed(std::string_view text, std::size_t pos, std::size_t width) {
  int value = 0;
  if (pos + width > text.size()) {
    throw std::invalid_argument("truncated timestamp '" + std::string(text) + "'");
  }
  auto first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + width, value);
  if (ec != std::errc() || ptr != first + width) {
    throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
  }
}

}  // namespace

UtcHour parse_utc_hour(std::string_view text) {
  using namespace std::chrono;
  const int y = read_fixed(text, 0, 4);
  expect(text, 4, '-');
  const int mo = read_fixed(text, 5, 2);
  expect(text, 7, '-');
  const int d = read_fixed(text, 8, 2);
  expect(text, 10, 'T');
  const int h = read_fixed(text, 11, 2);
  std::size_t pos = 13;
  for (int field = 0; field < 2 && pos < text.size() && text[pos] == ':'; ++field) {
    if (read_fixed(text, pos + 1, 2) != 0) {
      throw std::invalid_argument("timestamp '" + std::string(text) + "' is not on the hour");
    }
    pos += 3;
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) {
    throw std::invalid_argument("trailing characters in timestamp '" + std::string(text) + "'");
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23) {
    throw std::invalid_argument("invalid date in timestamp '" + std::string(text) + "'");
  }
  return sys_days{ymd} + hours{h};
}

std::string format_utc_hour(UtcHour t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const auto h = (t - day_start).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(h));
  return buf;
}

}  // namespace hydrocal

#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace pqr {

// Milliseconds since the Unix epoch, or a duration in milliseconds.
using Millis = std::int64_t;

namespace detail {

inline bool read_digits(std::string_view s, std::size_t& pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  pos += n;
  out = v;
  return true;
}

inline bool expect(std::string_view s, std::size_t& pos, char c) {
  if (pos < s.size() && s[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

}  // namespace detail

// Accepts integer milliseconds or "YYYY-MM-DD[T ]HH:MM:SS[.fff][Z|+HH:MM|-HH:MM]".
// A timestamp without zone designator is read as UTC.
inline std::optional<Millis> parse_time(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;

  bool integral = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (!((c >= '0' && c <= '9') || (i == 0 && c == '-'))) {
      integral = false;
      break;
    }
  }
  if (integral) {
    Millis v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
  }

  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  bool neg_year = detail::expect(s, pos, '-');
  if (!detail::read_digits(s, pos, 4, y) || !detail::expect(s, pos, '-') ||
      !detail::read_digits(s, pos, 2, mo) || !detail::expect(s, pos, '-') ||
      !detail::read_digits(s, pos, 2, d))
    return std::nullopt;
  if (neg_year) y = -y;
  if (!(detail::expect(s, pos, 'T') || detail::expect(s, pos, ' '))) return std::nullopt;
  if (!detail::read_digits(s, pos, 2, h) || !detail::expect(s, pos, ':') ||
      !detail::read_digits(s, pos, 2, mi) || !detail::expect(s, pos, ':') ||
      !detail::read_digits(s, pos, 2, sec))
    return std::nullopt;
  int ms = 0;
  if (detail::expect(s, pos, '.')) {
    int scale = 100;
    std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      ms += (s[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) return std::nullopt;
  }
  int offset_min = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int sign = s[pos] == '+' ? 1 : -1;
      ++pos;
      int oh = 0, om = 0;
      if (!detail::read_digits(s, pos, 2, oh)) return std::nullopt;
      detail::expect(s, pos, ':');
      if (!detail::read_digits(s, pos, 2, om)) return std::nullopt;
      offset_min = sign * (oh * 60 + om);
    }
  }
  if (pos != s.size()) return std::nullopt;
  if (h > 23 || mi > 59 || sec > 60) return std::nullopt;

  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  Millis days = sys_days{ymd}.time_since_epoch().count();
  Millis total = days * 86'400'000 + (Millis{h} * 3600 + mi * 60 + sec) * 1000 + ms;
  return total - Millis{offset_min} * 60'000;
}

// ISO-8601 UTC; the fraction is emitted only when non-zero.
inline std::string format_time(Millis t) {
  using namespace std::chrono;
  Millis day_ms = 86'400'000;
  Millis days = t >= 0 ? t / day_ms : -((-t + day_ms - 1) / day_ms);
  Millis rem = t - days * day_ms;
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  int h = static_cast<int>(rem / 3'600'000);
  int mi = static_cast<int>(rem / 60'000 % 60);
  int sec = static_cast<int>(rem / 1000 % 60);
  int ms = static_cast<int>(rem % 1000);
  char buf[40];
  if (ms == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), h, mi, sec);
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), h, mi, sec, ms);
  }
  return buf;
}

}  // namespace pqr

#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>

#include "devsnet/core/time.hpp"

namespace devsnet {

/// Parses "250us", "10ms", "2s", "1.5s" or a bare microsecond count.
inline SimTime parse_duration(std::string_view text) {
  auto fail = [&]() -> SimTime {
    throw std::invalid_argument("malformed duration '" + std::string(text) + "'");
  };
  if (text.empty()) return fail();
  std::size_t split = 0;
  while (split < text.size() &&
         ((text[split] >= '0' && text[split] <= '9') || text[split] == '.')) {
    ++split;
  }
  std::string_view number = text.substr(0, split);
  std::string_view unit = text.substr(split);
  double scale = 1.0;
  if (unit.empty() || unit == "us") scale = 1.0;
  else if (unit == "ms") scale = 1e3;
  else if (unit == "s") scale = 1e6;
  else return fail();
  if (number.empty()) return fail();

  if (number.find('.') == std::string_view::npos) {
    SimTime::rep v = 0;
    auto [p, ec] = std::from_chars(number.data(), number.data() + number.size(), v);
    if (ec != std::errc() || p != number.data() + number.size()) return fail();
    return SimTime::us(v) * static_cast<SimTime::rep>(scale);
  }
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(std::string(number), &used);
    if (used != number.size()) return fail();
  } catch (const std::logic_error&) {
    return fail();
  }
  const double us = v * scale;
  if (us < 0 || us >= 1.8e19) return fail();
  return SimTime::us(static_cast<SimTime::rep>(us + 0.5));
}

/// Shortest exact rendering accepted by parse_duration.
inline std::string format_duration(SimTime t) {
  if (t.is_infinite()) return "inf";
  const auto us = t.micros();
  if (us != 0 && us % 1000000 == 0) return std::to_string(us / 1000000) + "s";
  if (us != 0 && us % 1000 == 0) return std::to_string(us / 1000) + "ms";
  return std::to_string(us) + "us";
}

}  // namespace devsnet

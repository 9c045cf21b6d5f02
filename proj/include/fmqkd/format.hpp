#pragma once

#include <charconv>
#include <cmath>
#include <iomanip>
#include <locale>
#include <sstream>
#include <string>

namespace fmqkd {

// Locale-independent, fixed-significance number text for CSV and config output.
inline std::string format_number(double x, int significant = 10) {
  if (std::isnan(x)) return "";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(significant) << x;
  return os.str();
}

// Shortest text that parses back to the same double.
inline std::string format_shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace fmqkd

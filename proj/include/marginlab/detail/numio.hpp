#pragma once

#include <charconv>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>

namespace marginlab::detail {

// Shortest decimal form that round-trips to the identical double.
inline std::string double_to_string(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double string_to_double(std::string_view s) {
  double out = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("unparseable real: '" + std::string(s) + "'");
  }
  return out;
}

}  // namespace marginlab::detail

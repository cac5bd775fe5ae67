#pragma once

#include <array>
#include <charconv>
#include <string>

namespace onn {

/// Shortest decimal with at most `digits` significant digits.
inline std::string fmt_num(double v, int digits = 10) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::general, digits);
  return std::string(buf.data(), res.ptr);
}

/// Nearest double to the `digits`-significant-digit decimal form of `v`.
/// Grid values such as 722 * 1e-6 then print as 0.000722.
inline double snap_decimal(double v, int digits = 12) {
  const auto text = fmt_num(v, digits);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

}  // namespace onn

#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>

#include "onn/switch_model.hpp"

namespace onn {

inline constexpr std::size_t kNumOscillators = 11;
inline constexpr std::size_t kReference = 0;
inline constexpr std::size_t kOutput = 10;
inline constexpr std::size_t kGridSide = 3;
inline constexpr std::size_t kGridCells = kGridSide * kGridSide;

/// Thermal coupling strengths in volts, indexed [source][target].
struct CouplingMatrix {
  std::array<std::array<double, kNumOscillators>, kNumOscillators> s{};

  double operator()(std::size_t source, std::size_t target) const { return s[source][target]; }

  /// Sum of all couplings that can act on `target` at once.
  double incoming_total(std::size_t target) const {
    double sum = 0.0;
    for (std::size_t src = 0; src < kNumOscillators; ++src) sum += s[src][target];
    return sum;
  }

  bool operator==(const CouplingMatrix&) const = default;
};

/// Grid oscillator number (1..9) of the cell at (row, col).
constexpr std::size_t grid_oscillator(std::size_t row, std::size_t col) {
  return 1 + row * kGridSide + col;
}

/// Reference -> everything (s_r), 4-neighbour grid links both ways (s_m),
/// every grid cell -> output (s_o).  Oscillator 0 has no inputs and
/// oscillator 10 has no outputs.
inline CouplingMatrix build_coupling_matrix(double s_r, double s_m, double s_o) {
  if (s_r < 0.0 || s_m < 0.0 || s_o < 0.0)
    throw std::invalid_argument("coupling strengths must be non-negative");

  CouplingMatrix m;
  for (std::size_t t = 1; t < kNumOscillators; ++t) m.s[kReference][t] = s_r;

  for (std::size_t row = 0; row < kGridSide; ++row) {
    for (std::size_t col = 0; col < kGridSide; ++col) {
      const auto here = grid_oscillator(row, col);
      if (col + 1 < kGridSide) {
        const auto right = grid_oscillator(row, col + 1);
        m.s[here][right] = m.s[right][here] = s_m;
      }
      if (row + 1 < kGridSide) {
        const auto below = grid_oscillator(row + 1, col);
        m.s[here][below] = m.s[below][here] = s_m;
      }
      m.s[here][kOutput] = s_o;
    }
  }
  return m;
}

/// The summed thermal action on any oscillator must keep its effective
/// threshold above the holder voltage.  The worst cases are the output
/// (reference + nine grid cells) and the grid centre (reference + four
/// neighbours).
inline bool check_coupling_constraint(double s_r, double s_m, double s_o,
                                      const SwitchParams& p = {}) {
  const double margin = p.u_th - p.u_h;
  return (s_r + 9.0 * s_o) < margin && (s_r + 4.0 * s_m) < margin;
}

}  // namespace onn

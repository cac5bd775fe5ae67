#pragma once

// 3x3 binary input patterns and their symmetry classes.
//
// Pattern n (0..511) has cells x_1..x_9 in row-major order with x_1 as the
// most significant bit, so X_489 = (1,1,1,1,0,1,0,0,1).  Patterns related
// by a rotation or reflection of the square share a class; there are 102.

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "onn/coupling.hpp"

namespace onn {

inline constexpr std::size_t kNumPatterns = 512;

class Pattern {
 public:
  constexpr Pattern() = default;
  constexpr explicit Pattern(std::uint16_t index) : index_(index) {
    if (index >= kNumPatterns) throw std::out_of_range("pattern index must be below 512");
  }

  static constexpr Pattern from_cells(const std::array<int, kGridCells>& x) {
    std::uint16_t n = 0;
    for (auto v : x) n = static_cast<std::uint16_t>((n << 1) | (v != 0 ? 1 : 0));
    return Pattern(n);
  }

  constexpr std::uint16_t index() const { return index_; }

  /// Cell value x_k for k = 1..9.
  constexpr bool cell(std::size_t k) const { return (index_ >> (kGridCells - k)) & 1u; }

  constexpr bool at(std::size_t row, std::size_t col) const { return cell(1 + row * kGridSide + col); }

  constexpr int fill_count() const { return std::popcount(static_cast<unsigned>(index_)); }

  constexpr Pattern complement() const {
    return Pattern(static_cast<std::uint16_t>(index_ ^ (kNumPatterns - 1)));
  }

  constexpr auto operator<=>(const Pattern&) const = default;

 private:
  std::uint16_t index_ = 0;
};

/// The eight symmetries of the square acting on grid cells.
enum class GridSymmetry : unsigned char {
  Identity,
  Rotate90,
  Rotate180,
  Rotate270,
  FlipHorizontal,  // mirror left-right
  FlipVertical,    // mirror top-bottom
  FlipMainDiagonal,
  FlipAntiDiagonal,
};

inline constexpr std::array<GridSymmetry, 8> kAllGridSymmetries = {
    GridSymmetry::Identity,       GridSymmetry::Rotate90,       GridSymmetry::Rotate180,
    GridSymmetry::Rotate270,      GridSymmetry::FlipHorizontal, GridSymmetry::FlipVertical,
    GridSymmetry::FlipMainDiagonal, GridSymmetry::FlipAntiDiagonal};

/// Destination (row, col) of the cell at (row, col) under `g`.
constexpr std::pair<std::size_t, std::size_t> map_cell(GridSymmetry g, std::size_t r, std::size_t c) {
  constexpr std::size_t m = kGridSide - 1;
  switch (g) {
    case GridSymmetry::Identity: return {r, c};
    case GridSymmetry::Rotate90: return {c, m - r};  // clockwise
    case GridSymmetry::Rotate180: return {m - r, m - c};
    case GridSymmetry::Rotate270: return {m - c, r};
    case GridSymmetry::FlipHorizontal: return {r, m - c};
    case GridSymmetry::FlipVertical: return {m - r, c};
    case GridSymmetry::FlipMainDiagonal: return {c, r};
    case GridSymmetry::FlipAntiDiagonal: return {m - c, m - r};
  }
  return {r, c};
}

/// Oscillator permutation induced by `g`: grid oscillators move with their
/// cells, the reference and output stay put.
constexpr std::array<std::size_t, kNumOscillators> oscillator_permutation(GridSymmetry g) {
  std::array<std::size_t, kNumOscillators> perm{};
  perm[kReference] = kReference;
  perm[kOutput] = kOutput;
  for (std::size_t r = 0; r < kGridSide; ++r)
    for (std::size_t c = 0; c < kGridSide; ++c) {
      const auto [r2, c2] = map_cell(g, r, c);
      perm[grid_oscillator(r, c)] = grid_oscillator(r2, c2);
    }
  return perm;
}

constexpr Pattern transform(Pattern x, GridSymmetry g) {
  std::array<int, kGridCells> cells{};
  for (std::size_t r = 0; r < kGridSide; ++r)
    for (std::size_t c = 0; c < kGridSide; ++c) {
      const auto [r2, c2] = map_cell(g, r, c);
      cells[r2 * kGridSide + c2] = x.at(r, c) ? 1 : 0;
    }
  return Pattern::from_cells(cells);
}

/// Feed currents of grid oscillators 1..9 (index k-1 holds oscillator k).
inline std::array<double, kGridCells> pattern_currents(Pattern x, double i_on, double i_off) {
  std::array<double, kGridCells> out{};
  for (std::size_t k = 1; k <= kGridCells; ++k) out[k - 1] = x.cell(k) ? i_on : i_off;
  return out;
}

struct PatternClass {
  std::size_t id = 0;                 // 1-based
  std::vector<std::uint16_t> members; // ascending
  int fill_count = 0;

  Pattern representative() const { return Pattern(members.front()); }
  std::size_t orbit_size() const { return members.size(); }
};

class ClassTable {
 public:
  const std::vector<PatternClass>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  const PatternClass& operator[](std::size_t id) const { return classes_.at(id - 1); }

  std::size_t class_of(Pattern x) const { return class_of_[x.index()]; }

 private:
  friend ClassTable enumerate_classes();
  std::vector<PatternClass> classes_;
  std::array<std::size_t, kNumPatterns> class_of_{};
};

/// Orbits of all 512 patterns under the square's symmetry group, ordered
/// by (fill count, smallest member).  Class 1 is the empty grid and the
/// last class the full grid.
inline ClassTable enumerate_classes() {
  ClassTable table;
  std::array<bool, kNumPatterns> seen{};
  std::vector<PatternClass> found;
  for (std::uint16_t n = 0; n < kNumPatterns; ++n) {
    if (seen[n]) continue;
    PatternClass cls;
    for (auto g : kAllGridSymmetries) {
      const auto image = transform(Pattern(n), g).index();
      if (!seen[image]) {
        seen[image] = true;
        cls.members.push_back(image);
      }
    }
    std::sort(cls.members.begin(), cls.members.end());
    cls.fill_count = Pattern(n).fill_count();
    found.push_back(std::move(cls));
  }
  std::sort(found.begin(), found.end(), [](const PatternClass& a, const PatternClass& b) {
    return std::pair(a.fill_count, a.members.front()) < std::pair(b.fill_count, b.members.front());
  });
  for (std::size_t i = 0; i < found.size(); ++i) {
    found[i].id = i + 1;
    for (auto m : found[i].members) table.class_of_[m] = i + 1;
  }
  table.classes_ = std::move(found);
  return table;
}

inline std::size_t class_of(Pattern x, const ClassTable& table) { return table.class_of(x); }

}  // namespace onn

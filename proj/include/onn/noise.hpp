#pragma once

// Seeded Gaussian noise for the oscillator circuits.
//
// Every oscillator draws from its own substream derived from one master
// seed, so a simulation is reproducible regardless of how work is spread
// over threads and the streams can be permuted together with the grid.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "onn/coupling.hpp"

namespace onn {

/// Deterministic child seed from a parent seed and a path of tags.
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  words.push_back(static_cast<std::uint32_t>(parent));
  words.push_back(static_cast<std::uint32_t>(parent >> 32));
  for (auto tag : path) {
    words.push_back(static_cast<std::uint32_t>(tag));
    words.push_back(static_cast<std::uint32_t>(tag >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// U_n(t) = u_n0 * randn(t): `n` independent zero-mean, unit-variance draws
/// scaled by the amplitude.
inline std::vector<double> gen_noise(std::uint64_t seed, std::size_t n, double u_n0) {
  if (u_n0 < 0.0) throw std::invalid_argument("noise amplitude must be non-negative");
  std::vector<double> out(n, 0.0);
  if (u_n0 == 0.0) return out;
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> randn(0.0, 1.0);
  for (auto& v : out) v = u_n0 * randn(engine);
  return out;
}

/// Noise for all oscillators of one run, stored time-major so a step reads
/// one contiguous row.
class NoiseField {
 public:
  NoiseField() = default;

  NoiseField(std::uint64_t seed, std::size_t n_points, double u_n0)
      : n_points_(n_points), values_(n_points * kNumOscillators, 0.0) {
    for (std::size_t osc = 0; osc < kNumOscillators; ++osc) {
      const auto stream = gen_noise(oscillator_seed(seed, osc), n_points, u_n0);
      for (std::size_t t = 0; t < n_points; ++t) values_[t * kNumOscillators + osc] = stream[t];
    }
  }

  static std::uint64_t oscillator_seed(std::uint64_t seed, std::size_t osc) {
    return derive_seed(seed, {0x6e6f697365ULL, osc});
  }

  std::size_t size() const noexcept { return n_points_; }

  std::span<const double, kNumOscillators> row(std::size_t t) const {
    return std::span<const double, kNumOscillators>(values_.data() + t * kNumOscillators,
                                                    kNumOscillators);
  }

  /// Reorders oscillator streams: stream of `from` ends up on `perm[from]`.
  NoiseField permuted(const std::array<std::size_t, kNumOscillators>& perm) const {
    NoiseField out = *this;
    for (std::size_t t = 0; t < n_points_; ++t)
      for (std::size_t osc = 0; osc < kNumOscillators; ++osc)
        out.values_[t * kNumOscillators + perm[osc]] = values_[t * kNumOscillators + osc];
    return out;
  }

 private:
  std::size_t n_points_ = 0;
  std::vector<double> values_;
};

}  // namespace onn

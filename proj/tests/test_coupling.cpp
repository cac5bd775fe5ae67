#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "onn/coupling.hpp"

using namespace onn;
using Catch::Approx;

TEST_CASE("coupling matrix has the reference, grid and output structure", "[coupling]") {
  const double sr = 0.1, sm = 0.2, so = 0.3;
  const auto m = build_coupling_matrix(sr, sm, so);

  for (std::size_t t = 1; t < kNumOscillators; ++t) CHECK(m(kReference, t) == sr);
  CHECK(m(kReference, kReference) == 0.0);
  for (std::size_t s = 1; s < kNumOscillators; ++s) CHECK(m(s, kReference) == 0.0);
  for (std::size_t t = 0; t < kNumOscillators; ++t) CHECK(m(kOutput, t) == 0.0);
  for (std::size_t g = 1; g <= kGridCells; ++g) CHECK(m(g, kOutput) == so);

  // Grid edges: 4-neighbour, symmetric.
  std::size_t edges = 0;
  for (std::size_t a = 1; a <= kGridCells; ++a)
    for (std::size_t b = 1; b <= kGridCells; ++b) {
      const auto ra = (a - 1) / 3, ca = (a - 1) % 3, rb = (b - 1) / 3, cb = (b - 1) % 3;
      const bool adjacent = (ra == rb && (ca + 1 == cb || cb + 1 == ca)) ||
                            (ca == cb && (ra + 1 == rb || rb + 1 == ra));
      CHECK(m(a, b) == (adjacent ? sm : 0.0));
      CHECK(m(a, b) == m(b, a));
      edges += adjacent;
    }
  CHECK(edges == 24);  // 12 undirected links
}

TEST_CASE("incoming totals reach the constraint sums at the centre and output", "[coupling]") {
  const double sr = 0.13, sm = 0.2, so = 0.05;
  const auto m = build_coupling_matrix(sr, sm, so);
  CHECK(m.incoming_total(kOutput) == Approx(sr + 9 * so));
  CHECK(m.incoming_total(grid_oscillator(1, 1)) == Approx(sr + 4 * sm));
  CHECK(m.incoming_total(grid_oscillator(0, 0)) == Approx(sr + 2 * sm));
  CHECK(m.incoming_total(grid_oscillator(0, 1)) == Approx(sr + 3 * sm));
  CHECK(m.incoming_total(kReference) == 0.0);
}

TEST_CASE("grid oscillators are numbered row-major from 1", "[coupling]") {
  std::set<std::size_t> ids;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) ids.insert(grid_oscillator(r, c));
  CHECK(ids == std::set<std::size_t>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(grid_oscillator(0, 0) == 1);
  CHECK(grid_oscillator(1, 1) == 5);
  CHECK(grid_oscillator(2, 2) == 9);
}

TEST_CASE("coupling constraint examples", "[coupling]") {
  CHECK(check_coupling_constraint(0.1036, 0.207, 0.29298));
  CHECK(check_coupling_constraint(0.0, 0.0, 0.0));
  CHECK_FALSE(check_coupling_constraint(0.5, 0.5, 0.34));
  CHECK_FALSE(check_coupling_constraint(0.2, 0.83, 0.0));  // 0.2 + 3.32 > 3.5
  CHECK_FALSE(check_coupling_constraint(0.5, 0.75, 0.0));  // equality is rejected
  CHECK(check_coupling_constraint(0.2, 0.8, 0.3));
}

TEST_CASE("negative couplings are rejected", "[coupling]") {
  CHECK_THROWS_AS(build_coupling_matrix(-0.1, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_coupling_matrix(0.0, -0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_coupling_matrix(0.0, 0.0, -0.1), std::invalid_argument);
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "onn/sync_metrics.hpp"

using namespace onn;
using Catch::Approx;

namespace {

// Train i with frequency ratio p:q against train j: periods q*L and p*L,
// locked every p*q*L, preceded by `junk` irregular edges.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> locked_trains(
    std::size_t p, std::size_t q, std::size_t L, std::size_t cycles, std::size_t junk) {
  std::vector<std::size_t> a, b;
  for (std::size_t k = 0; k < junk; ++k) {
    a.push_back(3 + 7 * k);
    b.push_back(5 + 11 * k);
  }
  const std::size_t t0 = 1000;
  for (std::size_t k = 0; k <= cycles * p; ++k) a.push_back(t0 + k * q * L);
  for (std::size_t k = 0; k <= cycles * q; ++k) b.push_back(t0 + k * p * L);
  return {a, b};
}

}  // namespace

TEST_CASE("histogram of the worked example", "[sync]") {
  std::vector<PeriodPair> pairs = {{7, 2}, {9, 2}, {7, 2}, {5, 2}};
  const auto h = pair_histogram(pairs, 28);
  REQUIRE(h.entries.size() == 3);
  CHECK(h.entries[0].ratio == ShrRatio{2, 5});
  CHECK(h.entries[1].ratio == ShrRatio{2, 7});
  CHECK(h.entries[2].ratio == ShrRatio{2, 9});
  CHECK(h.entries[1].count == 2);
  CHECK(h.entries[1].weight == 14);
  CHECK(h.entries[1].percent == 50.0);
  CHECK(h.entries[2].percent == Approx(32.142857).epsilon(1e-6));
  CHECK(h.entries[0].percent == Approx(17.857143).epsilon(1e-6));

  const auto r = shr_eta(h, 90.0);
  CHECK(r.shr == ShrRatio{2, 7});
  CHECK(r.eta == 50.0);
  CHECK_FALSE(r.synchronized);
  CHECK(shr_eta(h, 50.0).synchronized);  // threshold is inclusive
}

TEST_CASE("greedy matching pairs edges within the tolerance", "[sync]") {
  const std::vector<std::size_t> i = {10, 20, 30, 40};
  const std::vector<std::size_t> j = {12, 25, 29, 43};
  const auto ev = match_locked_edges(i, j, 2);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0] == LockedEvent{0, 0});
  CHECK(ev[1] == LockedEvent{2, 2});
  CHECK(match_locked_edges(i, j, 3).size() == 3);
  CHECK(match_locked_edges(i, j, 5).size() == 4);
  CHECK(match_locked_edges(i, j, 0).empty());
  CHECK(match_locked_edges({}, j, 5).empty());
}

TEST_CASE("each edge joins at most one locked event", "[sync][property]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> i(40), j(40);
    std::uniform_int_distribution<std::size_t> t(0, 2000);
    for (auto& v : i) v = t(rng);
    for (auto& v : j) v = t(rng);
    std::sort(i.begin(), i.end());
    std::sort(j.begin(), j.end());
    const std::size_t tol = trial % 6;
    const auto ev = match_locked_edges(i, j, tol);
    for (std::size_t k = 0; k < ev.size(); ++k) {
      const auto d = i[ev[k].edge_i] > j[ev[k].edge_j] ? i[ev[k].edge_i] - j[ev[k].edge_j]
                                                       : j[ev[k].edge_j] - i[ev[k].edge_i];
      CHECK(d <= tol);
      if (k) {
        CHECK(ev[k].edge_i > ev[k - 1].edge_i);
        CHECK(ev[k].edge_j > ev[k - 1].edge_j);
      }
    }
  }
}

TEST_CASE("period counts are edge-index differences", "[sync]") {
  const std::vector<std::size_t> i = {0, 70, 140, 210, 280, 350, 420, 490, 560, 630, 700};
  const std::vector<std::size_t> j = {0, 100, 200, 300, 400, 500, 600, 700};
  const auto ev = match_locked_edges(i, j, 2);
  REQUIRE(ev.size() == 2);
  const auto pairs = period_counts(ev, i, j);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == PeriodPair{10, 7});

  const SyncResult r = measure_sync(i, j, {2, 90.0, 0});
  CHECK(r.shr == ShrRatio{7, 10});
  CHECK(r.eta == 100.0);
  CHECK(r.synchronized);
  CHECK(r.shr_value() == Approx(0.7));
}

TEST_CASE("period_counts rejects malformed events", "[sync]") {
  const std::vector<std::size_t> i = {0, 10, 20}, j = {0, 10, 20};
  CHECK_THROWS_AS(period_counts({{1, 1}, {1, 2}}, i, j), std::invalid_argument);
  CHECK_THROWS_AS(period_counts({{0, 0}, {5, 1}}, i, j), std::invalid_argument);
}

TEST_CASE("histogram rejects inconsistent input", "[sync]") {
  const std::vector<PeriodPair> pairs = {{5, 3}, {5, 3}};
  CHECK_THROWS_AS(pair_histogram(pairs, 9), std::invalid_argument);
  CHECK_NOTHROW(pair_histogram(pairs, 10));
  const std::vector<PeriodPair> zero = {{0, 3}};
  CHECK_THROWS_AS(pair_histogram(zero, 10), std::invalid_argument);
  CHECK(pair_histogram({}, 0).entries.empty());
  CHECK_THROWS_AS(shr_real({1, 0}), std::invalid_argument);
}

TEST_CASE("ties go to the smallest ratio whatever the input order", "[sync][property]") {
  // (M_j, M_i): 3:4 x3, 6:4 x3 and 2:6 x2 all weigh 12.
  std::vector<PeriodPair> pairs = {{4, 3}, {4, 3}, {4, 3}, {4, 6}, {4, 6}, {4, 6}, {6, 2}, {6, 2}};
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto r = shr_eta(pair_histogram(pairs, 40), 10.0);
    CHECK(r.shr == ShrRatio{2, 6});
    CHECK(r.eta == 30.0);
  }
}

TEST_CASE("percentages sum to at most 100", "[sync][property]") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::uint32_t> m(1, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PeriodPair> pairs(1 + trial % 17);
    std::size_t covered = 0;
    for (auto& p : pairs) {
      p = {m(rng), m(rng)};
      covered += p.m_i;
    }
    const auto h = pair_histogram(pairs, covered + trial % 5);
    double sum = 0.0;
    for (const auto& e : h.entries) sum += e.percent;
    CHECK(sum <= 100.0 + 1e-9);
    const auto r = shr_eta(h, 90.0);
    for (const auto& e : h.entries) CHECK(r.eta >= e.percent);
  }
}

TEST_CASE("synthetic p:q trains give the inverse ratio at full effectiveness", "[sync]") {
  for (std::size_t p = 1; p <= 6; ++p)
    for (std::size_t q = 1; q <= 6; ++q) {
      if (std::gcd(p, q) != 1) continue;
      const auto [a, b] = locked_trains(p, q, 5, 6, 5);
      const auto r = measure_sync(a, b);
      INFO(p << ":" << q);
      CHECK(r.shr == ShrRatio{static_cast<std::uint32_t>(q), static_cast<std::uint32_t>(p)});
      CHECK(r.eta == 100.0);
      CHECK(r.synchronized);

      const auto swapped = measure_sync(b, a);
      CHECK(swapped.shr == ShrRatio{static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q)});
      CHECK(swapped.eta == 100.0);
    }
}

TEST_CASE("short trains and uncorrelated trains are not synchronized", "[sync]") {
  const std::vector<std::size_t> few = {1, 2, 3, 4, 5, 6};
  const auto r = measure_sync(few, few);
  CHECK(r.histogram.entries.empty());
  CHECK_FALSE(r.synchronized);

  std::vector<std::size_t> a, b;
  for (std::size_t k = 0; k < 200; ++k) {
    a.push_back(100 * k);
    b.push_back(50 + 100 * k);
  }
  const auto apart = measure_sync(a, b);
  CHECK(apart.histogram.entries.empty());
  CHECK(apart.n_periods_i == 194);
  CHECK(apart.eta == 0.0);
}

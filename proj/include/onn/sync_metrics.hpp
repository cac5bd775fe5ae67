#pragma once

// High-order synchronization between two pulse trains.
//
// Pulses of the two trains that coincide within a tolerance are treated as
// phase-locked.  Between consecutive locked events oscillator i completes
// M_i periods and oscillator j completes M_j; each (M_j : M_i) pair type is
// weighted by the share of i's periods it covers,
//
//     P(M_j:M_i) = 100 % * NP(M_j:M_i) * M_i / N_i,
//
// and the dominant pair is the synchronization ratio SHR with effectiveness
// eta = max P.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace onn {

/// Unreduced ratio M_j : M_i as counted.  2:4 and 1:2 are different values.
struct ShrRatio {
  std::uint32_t m_j = 0;
  std::uint32_t m_i = 0;

  auto operator<=>(const ShrRatio&) const = default;
};

/// M_j / M_i as a real number.
inline double shr_real(ShrRatio r) {
  if (r.m_i == 0) throw std::invalid_argument("SHR denominator is zero");
  return static_cast<double>(r.m_j) / static_cast<double>(r.m_i);
}

struct LockedEvent {
  std::size_t edge_i;  // index into train i
  std::size_t edge_j;  // index into train j

  bool operator==(const LockedEvent&) const = default;
};

using LockedEventList = std::vector<LockedEvent>;

struct PeriodPair {
  std::uint32_t m_i;
  std::uint32_t m_j;

  bool operator==(const PeriodPair&) const = default;
};

struct HistogramEntry {
  ShrRatio ratio;
  std::uint64_t count = 0;   // NP
  std::uint64_t weight = 0;  // NP * M_i, the periods of i covered
  double percent = 0.0;
};

/// Pair types in ascending (M_j, M_i) order.
struct PairHistogram {
  std::vector<HistogramEntry> entries;
  std::size_t n_periods_i = 0;
};

struct SyncResult {
  ShrRatio shr{};  // meaningless when the histogram is empty
  double eta = 0.0;
  PairHistogram histogram;
  std::size_t n_periods_i = 0;
  bool synchronized = false;

  double shr_value() const { return shr_real(shr); }
};

/// Greedy time-ordered pairing: the earliest pair of edges lying within
/// `tol` timesteps forms an event and both edges are consumed.
inline LockedEventList match_locked_edges(std::span<const std::size_t> le_i,
                                          std::span<const std::size_t> le_j, std::size_t tol) {
  LockedEventList events;
  std::size_t a = 0, b = 0;
  while (a < le_i.size() && b < le_j.size()) {
    const std::size_t ti = le_i[a], tj = le_j[b];
    const std::size_t gap = ti > tj ? ti - tj : tj - ti;
    if (gap <= tol) {
      events.push_back({a, b});
      ++a;
      ++b;
    } else if (ti < tj) {
      ++a;
    } else {
      ++b;
    }
  }
  return events;
}

/// Periods of each oscillator between consecutive locked events.  A period
/// belongs to the interval containing its starting edge.
inline std::vector<PeriodPair> period_counts(const LockedEventList& events,
                                             std::span<const std::size_t> le_i,
                                             std::span<const std::size_t> le_j) {
  std::vector<PeriodPair> pairs;
  if (events.size() < 2) return pairs;
  pairs.reserve(events.size() - 1);
  for (std::size_t z = 0; z + 1 < events.size(); ++z) {
    const auto& e0 = events[z];
    const auto& e1 = events[z + 1];
    if (e1.edge_i <= e0.edge_i || e1.edge_j <= e0.edge_j || e1.edge_i >= le_i.size() ||
        e1.edge_j >= le_j.size())
      throw std::invalid_argument("locked events must be strictly increasing and in range");
    pairs.push_back({static_cast<std::uint32_t>(e1.edge_i - e0.edge_i),
                     static_cast<std::uint32_t>(e1.edge_j - e0.edge_j)});
  }
  return pairs;
}

inline PairHistogram pair_histogram(std::span<const PeriodPair> pairs, std::size_t n_i) {
  PairHistogram hist;
  hist.n_periods_i = n_i;
  if (pairs.empty()) return hist;
  if (n_i == 0) throw std::invalid_argument("N_i must be positive");

  std::map<ShrRatio, std::uint64_t> counts;
  std::uint64_t covered = 0;
  for (const auto& p : pairs) {
    if (p.m_i == 0 || p.m_j == 0) throw std::invalid_argument("period counts must be positive");
    ++counts[ShrRatio{p.m_j, p.m_i}];
    covered += p.m_i;
  }
  if (covered > n_i) throw std::invalid_argument("pairs cover more periods than N_i");

  hist.entries.reserve(counts.size());
  for (const auto& [ratio, count] : counts) {
    const std::uint64_t weight = count * ratio.m_i;
    hist.entries.push_back(
        {ratio, count, weight, 100.0 * static_cast<double>(weight) / static_cast<double>(n_i)});
  }
  return hist;
}

/// Dominant pair and its effectiveness.  Ties go to the lexicographically
/// smallest (M_j, M_i).
inline SyncResult shr_eta(const PairHistogram& hist, double eta_th) {
  SyncResult out;
  out.histogram = hist;
  out.n_periods_i = hist.n_periods_i;
  const HistogramEntry* best = nullptr;
  for (const auto& e : hist.entries)
    if (best == nullptr || e.weight > best->weight) best = &e;
  if (best != nullptr) {
    out.shr = best->ratio;
    out.eta = best->percent;
  }
  out.synchronized = best != nullptr && out.eta >= eta_th;
  return out;
}

struct SyncOptions {
  std::size_t tolerance = 2;        // timesteps
  double eta_threshold = 90.0;      // percent
  std::size_t transient_pulses = 5; // dropped from the front of each train
};

/// Full pipeline from two raw pulse trains to a SyncResult.
inline SyncResult measure_sync(std::span<const std::size_t> le_i, std::span<const std::size_t> le_j,
                               const SyncOptions& opts = {}) {
  const auto drop = [&](std::span<const std::size_t> le) {
    return le.size() > opts.transient_pulses ? le.subspan(opts.transient_pulses)
                                             : std::span<const std::size_t>{};
  };
  const auto ti = drop(le_i);
  const auto tj = drop(le_j);
  if (ti.size() < 2 || tj.size() < 2) {
    SyncResult empty;
    empty.n_periods_i = ti.empty() ? 0 : ti.size() - 1;
    empty.histogram.n_periods_i = empty.n_periods_i;
    return empty;
  }
  const auto events = match_locked_edges(ti, tj, opts.tolerance);
  const auto pairs = period_counts(events, ti, tj);
  return shr_eta(pair_histogram(pairs, ti.size() - 1), opts.eta_threshold);
}

}  // namespace onn

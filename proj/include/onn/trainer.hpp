#pragma once

// Three-step random search over the network parameters.
//
// Step 1 samples the full parameter box; steps 2 and 3 sample boxes 5x and
// 25x narrower than the full box, centred on the best solution found so
// far.  A parameter set scores P, the number of pattern classes whose
// reference/output synchronization ratio is unique among the synchronized
// classes; any duplicate ratio makes the set invalid (score 0).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "onn/coupling.hpp"
#include "onn/decimal.hpp"
#include "onn/network.hpp"
#include "onn/noise.hpp"
#include "onn/parallel.hpp"
#include "onn/patterns.hpp"
#include "onn/sync_metrics.hpp"

namespace onn {

struct ParamSet {
  double i_on = 0.0;   // [A]
  double i_off = 0.0;  // [A]
  double i_0 = 0.0;    // [A]
  double i_10 = 0.0;   // [A]
  double s_r = 0.0;    // [V]
  double s_m = 0.0;    // [V]
  double s_o = 0.0;    // [V]
  double u_n0 = 80e-6; // [V], fixed during a search
  double eta_th = 90.0;// [%], fixed during a search

  bool operator==(const ParamSet&) const = default;
};

/// Closed interval sampled on the grid {k * step}.
struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;

  double span() const { return hi - lo; }
  bool degenerate() const { return !(hi > lo); }

  /// Integer grid indices inside [lo, hi].
  std::pair<std::int64_t, std::int64_t> grid_bounds() const {
    constexpr double eps = 1e-9;
    return {static_cast<std::int64_t>(std::ceil(lo / step - eps)),
            static_cast<std::int64_t>(std::floor(hi / step + eps))};
  }

  double lowest_grid_value() const {
    if (degenerate()) return lo;
    return static_cast<double>(grid_bounds().first) * step;
  }
};

inline constexpr double kCurrentStep = 1e-6;    // [A]
inline constexpr double kCouplingStepFraction = 1e-3;
inline constexpr double kMaxSr = 0.2;
inline constexpr double kMaxSm = 0.5;
inline constexpr double kMaxSo = 0.3;

struct SearchRanges {
  ParamRange i_on, i_off, i_0, i_10, s_r, s_m, s_o;

  /// The full search box.
  static SearchRanges global() {
    const ParamRange cur{kMinFeedCurrent, kMaxFeedCurrent, kCurrentStep};
    return {cur,
            cur,
            cur,
            cur,
            {0.0, kMaxSr, kMaxSr * kCouplingStepFraction},
            {0.0, kMaxSm, kMaxSm * kCouplingStepFraction},
            {0.0, kMaxSo, kMaxSo * kCouplingStepFraction}};
  }

  /// Box `factor` times narrower than the full box, centred on `c` and
  /// clipped to the full box.  Coupling steps shrink with the box; the
  /// current step stays at 1 uA.
  static SearchRanges narrowed(const ParamSet& c, double factor) {
    if (!(factor >= 1.0)) throw std::invalid_argument("narrowing factor must be >= 1");
    const auto g = global();
    const auto shrink = [factor](const ParamRange& full, double centre, bool coupling) {
      const double half = full.span() / factor / 2.0;
      ParamRange r;
      r.lo = std::max(full.lo, centre - half);
      r.hi = std::min(full.hi, centre + half);
      r.step = coupling ? full.span() / factor * kCouplingStepFraction : full.step;
      return r;
    };
    return {shrink(g.i_on, c.i_on, false), shrink(g.i_off, c.i_off, false),
            shrink(g.i_0, c.i_0, false),   shrink(g.i_10, c.i_10, false),
            shrink(g.s_r, c.s_r, true),    shrink(g.s_m, c.s_m, true),
            shrink(g.s_o, c.s_o, true)};
  }
};

namespace detail {

template <typename Rng>
double draw_on_grid(const ParamRange& r, Rng& rng) {
  if (r.degenerate()) return r.lo;
  const auto [k_lo, k_hi] = r.grid_bounds();
  if (k_hi < k_lo) return r.lo;
  std::uniform_int_distribution<std::int64_t> pick(k_lo, k_hi);
  return snap_decimal(static_cast<double>(pick(rng)) * r.step);
}

}  // namespace detail

/// Uniform draw on the parameter grid, rejected until the summed-coupling
/// bound holds.  `u_n0` and `eta_th` are copied from `fixed`.
template <typename Rng>
ParamSet sample_params(const SearchRanges& ranges, Rng& rng, const ParamSet& fixed = {},
                       const SwitchParams& sw = {}) {
  if (!check_coupling_constraint(ranges.s_r.lowest_grid_value(), ranges.s_m.lowest_grid_value(),
                                 ranges.s_o.lowest_grid_value(), sw))
    throw std::invalid_argument("search ranges admit no coupling that satisfies the threshold bound");

  ParamSet p = fixed;
  p.i_on = detail::draw_on_grid(ranges.i_on, rng);
  p.i_off = detail::draw_on_grid(ranges.i_off, rng);
  p.i_0 = detail::draw_on_grid(ranges.i_0, rng);
  p.i_10 = detail::draw_on_grid(ranges.i_10, rng);
  do {
    p.s_r = detail::draw_on_grid(ranges.s_r, rng);
    p.s_m = detail::draw_on_grid(ranges.s_m, rng);
    p.s_o = detail::draw_on_grid(ranges.s_o, rng);
  } while (!check_coupling_constraint(p.s_r, p.s_m, p.s_o, sw));
  return p;
}

/// Simulation and metric settings shared by every class evaluation.
struct EvalSettings {
  std::size_t n_points = 250'000;
  double dt = 1e-5;
  double capacitance = 100e-9;
  SwitchParams switch_params{};
  BranchIntegrator integrator = BranchIntegrator::Exact;
  std::size_t tolerance = 2;
  std::size_t transient_pulses = 5;
  bool short_circuit = true;  // stop at the first duplicate ratio
};

/// Network for one input pattern under a parameter set.
inline NetworkConfig make_network_config(const ParamSet& ps, Pattern x, const EvalSettings& es,
                                         std::uint64_t seed) {
  NetworkConfig cfg;
  const auto grid = pattern_currents(x, ps.i_on, ps.i_off);
  cfg.feed_currents[kReference] = ps.i_0;
  for (std::size_t k = 0; k < kGridCells; ++k) cfg.feed_currents[k + 1] = grid[k];
  cfg.feed_currents[kOutput] = ps.i_10;
  cfg.capacitance = es.capacitance;
  cfg.noise_amplitude = ps.u_n0;
  cfg.coupling = build_coupling_matrix(ps.s_r, ps.s_m, ps.s_o);
  cfg.dt = es.dt;
  cfg.n_points = es.n_points;
  cfg.seed = seed;
  cfg.switch_params = es.switch_params;
  cfg.integrator = es.integrator;
  return cfg;
}

inline SyncOptions sync_options(const ParamSet& ps, const EvalSettings& es) {
  return {es.tolerance, ps.eta_th, es.transient_pulses};
}

struct ClassMapping {
  std::size_t class_id = 0;
  ShrRatio shr{};
  double eta = 0.0;

  bool operator==(const ClassMapping&) const = default;
};

struct SolutionRecord {
  ParamSet params;
  std::uint64_t seed = 0;
  std::vector<ClassMapping> mapping;  // synchronized classes, by class id
  std::size_t p_value = 0;            // |mapping| when valid, else 0
  bool valid = false;
  std::size_t evaluated_classes = 0;
  std::optional<std::pair<std::size_t, std::size_t>> duplicate;  // first clashing class ids
};

class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::size_t class_id, const std::string& what)
      : std::runtime_error("class " + std::to_string(class_id) + ": " + what), class_id_(class_id) {}
  std::size_t class_id() const { return class_id_; }

 private:
  std::size_t class_id_;
};

/// Simulates every class representative with one shared noise realisation
/// and scores the reference/output synchronization map.
inline SolutionRecord evaluate_params(const ParamSet& ps, const ClassTable& table,
                                      const EvalSettings& es, std::uint64_t seed) {
  SolutionRecord rec;
  rec.params = ps;
  rec.seed = seed;
  rec.valid = true;

  const NoiseField noise(seed, es.n_points, ps.u_n0);
  const auto opts = sync_options(ps, es);
  std::map<ShrRatio, std::size_t> owner;

  for (const auto& cls : table.classes()) {
    SimulationResult sim;
    try {
      sim = simulate(make_network_config(ps, cls.representative(), es, seed), noise);
    } catch (const std::exception& e) {
      throw EvaluationError(cls.id, e.what());
    }
    ++rec.evaluated_classes;
    const auto r = measure_sync(sim.pulse_trains[kReference], sim.pulse_trains[kOutput], opts);
    if (!r.synchronized) continue;
    rec.mapping.push_back({cls.id, r.shr, r.eta});
    const auto [it, inserted] = owner.emplace(r.shr, cls.id);
    if (!inserted && rec.valid) {
      rec.valid = false;
      rec.duplicate = std::pair(it->second, cls.id);
      if (es.short_circuit) break;
    }
  }
  rec.p_value = rec.valid ? rec.mapping.size() : 0;
  return rec;
}

/// Result for one orbit member simulated on its own noise realisation.
struct MemberCheck {
  std::uint16_t pattern = 0;
  std::optional<ShrRatio> shr;  // set when synchronized
  double eta = 0.0;
};

struct OrbitCheck {
  std::size_t class_id = 0;
  std::optional<ShrRatio> representative;  // set when synchronized
  std::vector<MemberCheck> members;
  std::size_t agreeing = 0;  // members whose outcome equals the representative's

  bool consistent() const { return agreeing == members.size(); }
};

/// Simulates every member of every class with independent seeds and
/// compares each outcome (synchronized ratio, or no synchronization) with
/// the class representative.  Checks the symmetry shortcut used by
/// evaluate_params.
inline std::vector<OrbitCheck> verify_orbits(const ParamSet& ps, const ClassTable& table,
                                             const EvalSettings& es, std::uint64_t seed,
                                             unsigned threads = 1) {
  const auto opts = sync_options(ps, es);
  const auto run = [&](Pattern x) {
    const auto member_seed = derive_seed(seed, {0x6f72626974ULL, x.index()});
    const auto sim = simulate(make_network_config(ps, x, es, member_seed));
    const auto r = measure_sync(sim.pulse_trains[kReference], sim.pulse_trains[kOutput], opts);
    return MemberCheck{x.index(), r.synchronized ? std::optional(r.shr) : std::nullopt, r.eta};
  };
  std::vector<MemberCheck> by_pattern(kNumPatterns);
  parallel_for(kNumPatterns, threads,
               [&](std::size_t n) { by_pattern[n] = run(Pattern(static_cast<std::uint16_t>(n))); });

  std::vector<OrbitCheck> out;
  for (const auto& cls : table.classes()) {
    OrbitCheck c;
    c.class_id = cls.id;
    c.representative = by_pattern[cls.members.front()].shr;
    for (auto m : cls.members) {
      c.members.push_back(by_pattern[m]);
      c.agreeing += by_pattern[m].shr == c.representative;
    }
    out.push_back(std::move(c));
  }
  return out;
}

struct AttemptRecord {
  std::size_t step = 0;     // 1-based
  std::size_t attempt = 0;  // 0-based within the step
  SolutionRecord record;
};

struct AnnealConfig {
  double u_n0 = 80e-6;
  double eta_th = 90.0;
  std::size_t attempts_per_step = 1000;
  std::size_t steps = 3;
  std::array<double, 3> narrowing = {1.0, 5.0, 25.0};
  std::uint64_t seed = 0;
  EvalSettings eval{};
  unsigned threads = 1;
  std::function<void(const AttemptRecord&)> on_attempt;  // called in index order per step
};

struct AnnealResult {
  std::optional<AttemptRecord> best;             // best valid record over all steps
  std::vector<AttemptRecord> attempts;           // ordered by (step, attempt)
  std::vector<std::map<std::size_t, std::size_t>> histograms;  // per step: P -> N_P
  std::vector<SearchRanges> ranges;              // box used by each step
};

inline std::uint64_t attempt_seed(std::uint64_t seed, std::size_t step, std::size_t attempt,
                                  std::uint64_t purpose) {
  return derive_seed(seed, {step, attempt, purpose});
}

/// Ranking: higher P wins, earlier attempt wins ties.
inline bool better_than(const AttemptRecord& a, const AttemptRecord& b) {
  return a.record.valid && a.record.p_value > b.record.p_value;
}

inline AnnealResult anneal(const AnnealConfig& cfg, const ClassTable& table) {
  if (cfg.steps < 1 || cfg.steps > cfg.narrowing.size())
    throw std::invalid_argument("anneal supports 1 to 3 steps");
  AnnealResult out;
  ParamSet fixed;
  fixed.u_n0 = cfg.u_n0;
  fixed.eta_th = cfg.eta_th;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const auto ranges = step == 1 || !out.best
                            ? SearchRanges::global()
                            : SearchRanges::narrowed(out.best->record.params, cfg.narrowing[step - 1]);
    out.ranges.push_back(ranges);

    std::vector<AttemptRecord> batch(cfg.attempts_per_step);
    parallel_for(batch.size(), cfg.threads, [&](std::size_t a) {
      std::mt19937_64 rng(attempt_seed(cfg.seed, step, a, 1));
      const auto ps = sample_params(ranges, rng, fixed, cfg.eval.switch_params);
      batch[a] = {step, a,
                  evaluate_params(ps, table, cfg.eval, attempt_seed(cfg.seed, step, a, 2))};
    });

    auto& hist = out.histograms.emplace_back();
    for (auto& rec : batch) {
      ++hist[rec.record.p_value];
      if (cfg.on_attempt) cfg.on_attempt(rec);
      if (rec.record.valid && (!out.best || better_than(rec, *out.best))) out.best = rec;
      out.attempts.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace onn

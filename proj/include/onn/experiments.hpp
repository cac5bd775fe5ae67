#pragma once

// Experiment drivers behind the command-line tool.
//
// Every command reads a resolved configuration tree, writes its data
// products plus a manifest into an output directory, and is a pure
// function of (configuration, seed): thread count never changes a byte.
//
// Configuration is INI.  Units in configuration keys follow the key
// suffix (_uA, _uV, _nF); output files use SI units.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fftw3.h>

#include "onn/decimal.hpp"
#include "onn/io.hpp"
#include "onn/network.hpp"
#include "onn/noise.hpp"
#include "onn/parallel.hpp"
#include "onn/patterns.hpp"
#include "onn/sync_metrics.hpp"
#include "onn/trainer.hpp"

#ifndef ONN_VERSION
#define ONN_VERSION "0.1.0"
#endif

namespace onn::experiments {

namespace fs = std::filesystem;
using ptree = boost::property_tree::ptree;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"simulate",  "sweep2d",  "noise-sweep",
                                                 "eta-sweep", "base-sync", "converge",
                                                 "classes",   "train"};
  return names;
}

// ---------------------------------------------------------------------------
// Configuration

using Defaults = std::vector<std::pair<std::string, std::string>>;

inline std::string linspace_list(double lo, double hi, std::size_t n, bool include_hi = true) {
  std::string out;
  const double denom = include_hi ? static_cast<double>(n - 1) : static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (k) out += ',';
    out += fmt_num(snap_decimal(lo + (hi - lo) * static_cast<double>(k) / denom), 10);
  }
  return out;
}

/// Keys shared by all commands.  The network defaults are the parameter set
/// used for the convergence study.
inline Defaults common_defaults() {
  return {
      {"network.i_on_uA", "725"},       {"network.i_off_uA", "1035"},
      {"network.i_0_uA", "1017"},       {"network.i_10_uA", "891"},
      {"network.s_r", "0.1036"},        {"network.s_m", "0.207"},
      {"network.s_o", "0.29298"},       {"network.u_n_uV", "80"},
      {"network.eta_th", "90"},         {"network.pattern", "3"},
      {"network.feed_uA", ""},          {"network.n_points", "250000"},
      {"network.dt", "1e-05"},          {"network.capacitance_nF", "100"},
      {"network.integrator", "exact"},  {"metrics.tolerance", "2"},
      {"metrics.transient_pulses", "5"},
  };
}

inline Defaults command_defaults(const std::string& cmd) {
  if (cmd == "simulate")
    return {{"simulate.record_currents", "true"}, {"simulate.record_voltages", "false"},
            {"simulate.trace_start", "0"},        {"simulate.trace_points", "0"},
            {"simulate.metric_i", "0"},           {"simulate.metric_j", "10"},
            {"simulate.fft_channel", "-1"},       {"simulate.fft_max_hz", "10000"},
            {"simulate.fft_quantity", "voltage"}};
  if (cmd == "sweep2d")
    return {{"network.i_on_uA", "725"},  {"network.i_off_uA", "1036"},
            {"network.s_r", "0.3"},      {"network.s_m", "0.207"},
            {"network.s_o", "0"},        {"sweep2d.axis1", "i_0"},
            {"sweep2d.axis2", "i_10"},   {"sweep2d.axis1_min_uA", "550"},
            {"sweep2d.axis1_max_uA", "1061"}, {"sweep2d.axis1_points", "64"},
            {"sweep2d.axis2_min_uA", "550"},  {"sweep2d.axis2_max_uA", "1061"},
            {"sweep2d.axis2_points", "64"}};
  if (cmd == "noise-sweep")
    return {{"noise_sweep.u_n_uV", linspace_list(20, 900, 12)}, {"noise_sweep.attempts", "200"}};
  if (cmd == "eta-sweep")
    return {{"eta_sweep.eta_th", linspace_list(10, 100, 25, false)}, {"eta_sweep.attempts", "200"}};
  if (cmd == "base-sync")
    return {{"network.s_r", "0.13"},   {"network.i_0_uA", "650"}, {"network.i_10_uA", "950"},
            {"base_sync.samples", "200"}, {"base_sync.pattern", "-1"}};
  if (cmd == "converge")
    return {{"converge.prefix_step", "5000"}, {"converge.window", "50000"}};
  if (cmd == "classes") return {};
  if (cmd == "train")
    return {{"train.attempts_per_step", "1000"}, {"train.steps", "3"},
            {"train.verify_orbits", "false"}};
  throw ConfigError("unknown command '" + cmd + "'");
}

/// Defaults, then the INI file, then `section.key=value` overrides.  Keys
/// absent from the defaults are rejected so typos do not pass silently.
inline ptree resolve_config(const std::string& cmd, const std::optional<fs::path>& file,
                            const std::vector<std::string>& overrides) {
  ptree cfg;
  for (const auto& [k, v] : common_defaults()) cfg.put(k, v);
  for (const auto& [k, v] : command_defaults(cmd)) cfg.put(k, v);

  const auto apply = [&](const std::string& key, const std::string& value, const std::string& origin) {
    if (!cfg.get_child_optional(key))
      throw ConfigError(origin + ": unknown key '" + key + "' for command '" + cmd + "'");
    cfg.put(key, value);
  };

  if (file) {
    if (!fs::exists(*file)) throw ConfigError("config file not found: " + file->string());
    ptree user;
    try {
      boost::property_tree::read_ini(file->string(), user);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("cannot parse " + file->string() + ": " + e.message() + " (line " +
                        std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : user) {
      if (body.empty()) {
        throw ConfigError(file->string() + ": key '" + section + "' must live in a [section]");
      }
      for (const auto& [key, value] : body)
        if (cfg.get_child_optional(section)) apply(section + "." + key, value.data(), file->string());
    }
    for (const auto& [section, body] : user)
      if (!cfg.get_child_optional(section))
        throw ConfigError(file->string() + ": section [" + section + "] is not used by '" + cmd + "'");
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not key=value");
    apply(ov.substr(0, eq), ov.substr(eq + 1), "--set");
  }
  return cfg;
}

template <typename T>
T get(const ptree& cfg, const std::string& key) {
  const auto raw = cfg.get<std::string>(key);
  if constexpr (std::is_same_v<T, std::string>) {
    return raw;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    throw ConfigError(key + ": expected a boolean, got '" + raw + "'");
  } else {
    std::istringstream in(raw);
    T value{};
    in >> value;
    if (!in || !(in >> std::ws).eof())
      throw ConfigError(key + ": cannot parse '" + raw + "'");
    return value;
  }
}

inline std::vector<double> get_list(const ptree& cfg, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(cfg.get<std::string>(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(key + ": cannot parse list item '" + item + "'");
    }
  }
  return out;
}

/// Parameter set, evaluation settings and input pattern from [network] and
/// [metrics].
struct NetworkSetup {
  ParamSet params;
  EvalSettings eval;
  Pattern pattern;
  std::optional<std::array<double, kNumOscillators>> feed;  // explicit currents
};

inline NetworkSetup network_setup(const ptree& cfg) {
  NetworkSetup s;
  s.params.i_on = get<double>(cfg, "network.i_on_uA") * 1e-6;
  s.params.i_off = get<double>(cfg, "network.i_off_uA") * 1e-6;
  s.params.i_0 = get<double>(cfg, "network.i_0_uA") * 1e-6;
  s.params.i_10 = get<double>(cfg, "network.i_10_uA") * 1e-6;
  s.params.s_r = get<double>(cfg, "network.s_r");
  s.params.s_m = get<double>(cfg, "network.s_m");
  s.params.s_o = get<double>(cfg, "network.s_o");
  s.params.u_n0 = get<double>(cfg, "network.u_n_uV") * 1e-6;
  s.params.eta_th = get<double>(cfg, "network.eta_th");
  const auto pattern = get<long>(cfg, "network.pattern");
  if (pattern < 0 || pattern >= static_cast<long>(kNumPatterns))
    throw ConfigError("network.pattern must be in 0..511");
  s.pattern = Pattern(static_cast<std::uint16_t>(pattern));

  s.eval.n_points = get<std::size_t>(cfg, "network.n_points");
  s.eval.dt = get<double>(cfg, "network.dt");
  s.eval.capacitance = get<double>(cfg, "network.capacitance_nF") * 1e-9;
  const auto integ = get<std::string>(cfg, "network.integrator");
  if (integ == "exact") s.eval.integrator = BranchIntegrator::Exact;
  else if (integ == "implicit-euler") s.eval.integrator = BranchIntegrator::ImplicitEuler;
  else throw ConfigError("network.integrator must be 'exact' or 'implicit-euler'");
  s.eval.tolerance = get<std::size_t>(cfg, "metrics.tolerance");
  s.eval.transient_pulses = get<std::size_t>(cfg, "metrics.transient_pulses");

  const auto feed = get_list(cfg, "network.feed_uA");
  if (!feed.empty()) {
    if (feed.size() != kNumOscillators)
      throw ConfigError("network.feed_uA must list 11 currents (oscillators 0..10)");
    std::array<double, kNumOscillators> f{};
    for (std::size_t i = 0; i < kNumOscillators; ++i) f[i] = feed[i] * 1e-6;
    s.feed = f;
  }
  if (s.params.s_r < 0 || s.params.s_m < 0 || s.params.s_o < 0)
    throw ConfigError("coupling strengths must be non-negative");
  if (s.params.u_n0 < 0) throw ConfigError("network.u_n_uV must be non-negative");
  if (s.eval.n_points < 2) throw ConfigError("network.n_points must be at least 2");
  if (!(s.eval.dt > 0)) throw ConfigError("network.dt must be positive");
  return s;
}

inline NetworkConfig network_config(const NetworkSetup& s, std::uint64_t seed) {
  auto cfg = make_network_config(s.params, s.pattern, s.eval, seed);
  if (s.feed) cfg.feed_currents = *s.feed;
  return cfg;
}

// ---------------------------------------------------------------------------
// Run context

struct RunContext {
  std::string command;
  ptree config;
  std::uint64_t seed = 0;
  fs::path out_dir = ".";
  unsigned threads = 1;
  std::ostream* log = &std::cerr;  // progress, never data

  void progress(const std::string& msg) const {
    if (log) *log << "[" << command << "] " << msg << '\n';
  }
};

inline json ptree_json(const ptree& t) {
  if (t.empty()) return t.data();
  json j = json::object();
  for (const auto& [k, v] : t) j[k] = ptree_json(v);
  return j;
}

/// Resolved configuration, seed and version; enough to rerun the command.
inline void write_manifest(const RunContext& ctx, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = ctx.command;
  m["version"] = ONN_VERSION;
  m["seed"] = ctx.seed;
  m["config"] = ptree_json(ctx.config);
  m["outputs"] = outputs;
  write_json(ctx.out_dir / "manifest.json", m);
}

/// Rebuilds a config tree from a manifest written by write_manifest.
inline ptree config_from_manifest(const json& manifest) {
  ptree cfg;
  for (const auto& [section, body] : manifest.at("config").items())
    for (const auto& [key, value] : body.items()) cfg.put(section + "." + key, value.get<std::string>());
  return cfg;
}

// ---------------------------------------------------------------------------
// Spectrum diagnostic

struct Spectrum {
  double bin_hz = 0.0;
  std::vector<double> magnitude;  // bins 0..n/2
  std::size_t dominant_bin = 0;   // largest non-DC bin

  double dominant_hz() const { return static_cast<double>(dominant_bin) * bin_hz; }
};

/// Magnitude spectrum of a real signal sampled every `dt` (mean removed).
inline Spectrum spectrum(std::span<const double> signal, double dt) {
  const std::size_t n = signal.size();
  if (n < 4) throw std::invalid_argument("spectrum needs at least 4 samples");
  const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / static_cast<double>(n);

  std::vector<double> in(n);
  for (std::size_t k = 0; k < n; ++k) in[k] = signal[k] - mean;
  const std::size_t n_out = n / 2 + 1;
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_out));
  static std::mutex plan_mutex;  // FFTW planning is not thread-safe
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);

  Spectrum s;
  s.bin_hz = 1.0 / (static_cast<double>(n) * dt);
  s.magnitude.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k)
    s.magnitude[k] = std::hypot(out[k][0], out[k][1]) / static_cast<double>(n);
  {
    std::lock_guard lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(out);
  s.dominant_bin = static_cast<std::size_t>(
      std::max_element(s.magnitude.begin() + 1, s.magnitude.end()) - s.magnitude.begin());
  return s;
}

// ---------------------------------------------------------------------------
// Commands

inline void emit_warnings(const RunContext& ctx, const NetworkConfig& cfg) {
  for (const auto& w : cfg.warnings()) ctx.progress("warning: " + w);
}

inline void cmd_simulate(const RunContext& ctx) {
  const auto setup = network_setup(ctx.config);
  const auto cfg = network_config(setup, ctx.seed);
  emit_warnings(ctx, cfg);
  const auto& c = ctx.config;

  SimulationOptions opts;
  opts.record_currents = get<bool>(c, "simulate.record_currents");
  opts.record_voltages = get<bool>(c, "simulate.record_voltages");
  const auto fft_channel = get<long>(c, "simulate.fft_channel");
  if (fft_channel >= static_cast<long>(kNumOscillators)) throw ConfigError("simulate.fft_channel out of range");
  const auto fft_quantity = get<std::string>(c, "simulate.fft_quantity");
  if (fft_quantity != "voltage" && fft_quantity != "current")
    throw ConfigError("simulate.fft_quantity must be 'voltage' or 'current'");
  // The switch voltage is a sawtooth whose fundamental dominates; the
  // current is a spike train with strong harmonics.
  SimulationOptions run_opts = opts;
  if (fft_channel >= 0) (fft_quantity == "voltage" ? run_opts.record_voltages : run_opts.record_currents) = true;
  const auto mi = get<std::size_t>(c, "simulate.metric_i");
  const auto mj = get<std::size_t>(c, "simulate.metric_j");
  if (mi >= kNumOscillators || mj >= kNumOscillators) throw ConfigError("metric oscillator out of range");

  ctx.progress("simulating " + std::to_string(cfg.n_points) + " points");
  const auto sim = simulate(cfg, run_opts);
  std::vector<std::string> outputs;

  const auto start = std::min(get<std::size_t>(c, "simulate.trace_start"), cfg.n_points);
  auto count = get<std::size_t>(c, "simulate.trace_points");
  if (count == 0 || start + count > cfg.n_points) count = cfg.n_points - start;
  const auto window = [&](const std::array<std::vector<double>, kNumOscillators>& traces) {
    std::array<std::vector<double>, kNumOscillators> w;
    for (std::size_t i = 0; i < kNumOscillators; ++i)
      w[i].assign(traces[i].begin() + static_cast<std::ptrdiff_t>(start),
                  traces[i].begin() + static_cast<std::ptrdiff_t>(start + count));
    return w;
  };
  const auto write_traces = [&](const std::string& name, const std::string& quantity,
                                const std::array<std::vector<double>, kNumOscillators>& traces) {
    auto out = open_output(ctx.out_dir / name);
    const auto w = window(traces);
    out << "t_index";
    for (std::size_t i = 0; i < kNumOscillators; ++i) out << ",osc" << i << '_' << quantity;
    out << '\n';
    for (std::size_t t = 0; t < count; ++t) {
      out << start + t;
      for (std::size_t i = 0; i < kNumOscillators; ++i) out << ',' << fmt_num(w[i][t], 9);
      out << '\n';
    }
    outputs.push_back(name);
  };
  if (opts.record_currents) write_traces("oscillogram.csv", "current", sim.currents);
  if (opts.record_voltages) write_traces("voltages.csv", "voltage", sim.voltages);

  {
    auto out = open_output(ctx.out_dir / "pulses.csv");
    write_pulse_trains_csv(out, sim.pulse_trains);
    outputs.push_back("pulses.csv");
  }

  const SyncOptions so{setup.eval.tolerance, setup.params.eta_th, setup.eval.transient_pulses};
  json metrics = sync_result_json(measure_sync(sim.pulse_trains[mi], sim.pulse_trains[mj], so));
  metrics["pair"] = json::array({mi, mj});
  json counts = json::array();
  for (const auto& tr : sim.pulse_trains) counts.push_back(tr.size());
  metrics["pulse_counts"] = counts;

  if (fft_channel >= 0) {
    const auto ch = static_cast<std::size_t>(fft_channel);
    const auto sp = spectrum(fft_quantity == "voltage" ? sim.voltages[ch] : sim.currents[ch], cfg.dt);
    const double max_hz = get<double>(c, "simulate.fft_max_hz");
    auto out = open_output(ctx.out_dir / "fft.csv");
    out << "bin,frequency_hz,magnitude\n";
    for (std::size_t k = 0; k < sp.magnitude.size(); ++k) {
      const double f = static_cast<double>(k) * sp.bin_hz;
      if (f > max_hz) break;
      out << k << ',' << fmt_num(f) << ',' << fmt_num(sp.magnitude[k], 9) << '\n';
    }
    outputs.push_back("fft.csv");
    metrics["fft"] = {{"channel", fft_channel},
                      {"quantity", fft_quantity},
                      {"bin_hz", snap_decimal(sp.bin_hz)},
                      {"dominant_bin", sp.dominant_bin},
                      {"dominant_hz", snap_decimal(sp.dominant_hz())}};
  }
  write_json(ctx.out_dir / "metrics.json", metrics);
  outputs.push_back("metrics.json");
  write_manifest(ctx, outputs);
}

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes = {"i_0", "i_10", "i_on", "i_off"};
  return axes;
}

inline void set_axis(ParamSet& p, const std::string& axis, double amps) {
  if (axis == "i_0") p.i_0 = amps;
  else if (axis == "i_10") p.i_10 = amps;
  else if (axis == "i_on") p.i_on = amps;
  else if (axis == "i_off") p.i_off = amps;
  else throw ConfigError("sweep axis must be one of i_0, i_10, i_on, i_off (got '" + axis + "')");
}

inline std::vector<double> axis_values(const ptree& c, const std::string& prefix) {
  const auto lo = get<double>(c, prefix + "_min_uA");
  const auto hi = get<double>(c, prefix + "_max_uA");
  const auto n = get<std::size_t>(c, prefix + "_points");
  if (n == 0) throw ConfigError(prefix + "_points must be positive");
  if (n == 1) return {snap_decimal(lo * 1e-6)};
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k)
    v[k] = snap_decimal((lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1)) * 1e-6);
  return v;
}

struct SweepPoint {
  double a1 = 0, a2 = 0;
  SyncResult sync;
};

inline std::vector<SweepPoint> run_sweep2d(const RunContext& ctx) {
  const auto setup = network_setup(ctx.config);
  const auto& c = ctx.config;
  const auto axis1 = get<std::string>(c, "sweep2d.axis1");
  const auto axis2 = get<std::string>(c, "sweep2d.axis2");
  if (axis1 == axis2) throw ConfigError("sweep2d axes must differ");
  ParamSet probe;
  set_axis(probe, axis1, 0);
  set_axis(probe, axis2, 0);
  const auto v1 = axis_values(c, "sweep2d.axis1");
  const auto v2 = axis_values(c, "sweep2d.axis2");

  const NoiseField noise(ctx.seed, setup.eval.n_points, setup.params.u_n0);
  std::vector<SweepPoint> grid(v1.size() * v2.size());
  std::atomic<std::size_t> done{0};
  parallel_for(grid.size(), ctx.threads, [&](std::size_t k) {
    auto ps = setup.params;
    const double a1 = v1[k / v2.size()], a2 = v2[k % v2.size()];
    set_axis(ps, axis1, a1);
    set_axis(ps, axis2, a2);
    auto s2 = setup;
    s2.params = ps;
    const auto sim = simulate(network_config(s2, ctx.seed), noise);
    grid[k] = {a1, a2, measure_sync(sim.pulse_trains[kReference], sim.pulse_trains[kOutput],
                                     sync_options(ps, setup.eval))};
    const auto n = ++done;
    if (n % 256 == 0) ctx.progress(std::to_string(n) + "/" + std::to_string(grid.size()) + " points");
  });
  return grid;
}

inline void cmd_sweep2d(const RunContext& ctx) {
  const auto grid = run_sweep2d(ctx);
  const auto axis1 = get<std::string>(ctx.config, "sweep2d.axis1");
  const auto axis2 = get<std::string>(ctx.config, "sweep2d.axis2");
  auto out = open_output(ctx.out_dir / "sweep2d.csv");
  out << axis1 << ',' << axis2 << ",shr_real,eta,shr_mj,shr_mi,synchronized\n";
  for (const auto& p : grid) {
    out << fmt_num(p.a1) << ',' << fmt_num(p.a2) << ',';
    if (p.sync.synchronized) out << fmt_num(p.sync.shr_value());
    out << ',' << fmt_num(p.sync.eta) << ',';
    if (!p.sync.histogram.entries.empty()) out << p.sync.shr.m_j << ',' << p.sync.shr.m_i;
    else out << ',';
    out << ',' << (p.sync.synchronized ? 1 : 0) << '\n';
  }
  write_manifest(ctx, {"sweep2d.csv"});
}

/// Step-1 search statistics for one (u_n0, eta_th) level.
struct LevelStats {
  double level = 0.0;
  std::size_t attempts = 0;
  std::map<std::size_t, std::size_t> n_p;  // P -> N_P over valid attempts
  std::size_t invalid = 0;

  std::size_t solutions() const {  // valid attempts with P >= 1
    std::size_t s = 0;
    for (const auto& [p, n] : n_p)
      if (p >= 1) s += n;
    return s;
  }
  std::size_t max_p() const { return n_p.empty() ? 0 : n_p.rbegin()->first; }
};

inline LevelStats step1_statistics(const RunContext& ctx, const NetworkSetup& setup, double u_n0,
                                   double eta_th, std::size_t attempts, std::uint64_t seed,
                                   const ClassTable& table, std::ostream* log_csv) {
  AnnealConfig ac;
  ac.u_n0 = u_n0;
  ac.eta_th = eta_th;
  ac.attempts_per_step = attempts;
  ac.steps = 1;
  ac.seed = seed;
  ac.eval = setup.eval;
  ac.threads = ctx.threads;
  const auto res = anneal(ac, table);
  LevelStats st;
  st.attempts = attempts;
  for (const auto& a : res.attempts) {
    if (log_csv) write_attempt_row(*log_csv, a);
    if (a.record.valid) ++st.n_p[a.record.p_value];
    else ++st.invalid;
  }
  return st;
}

inline void write_level_tables(const RunContext& ctx, const std::string& stem,
                               const std::string& level_name, const std::vector<LevelStats>& levels) {
  std::size_t max_p = 0;
  for (const auto& l : levels) max_p = std::max(max_p, l.max_p());
  {
    auto out = open_output(ctx.out_dir / (stem + ".csv"));
    out << level_name << ",P,N_P\n";
    for (const auto& l : levels)
      for (std::size_t p = 0; p <= max_p; ++p) {
        const auto it = l.n_p.find(p);
        out << fmt_num(l.level) << ',' << p << ',' << (it == l.n_p.end() ? 0 : it->second) << '\n';
      }
  }
  auto out = open_output(ctx.out_dir / (stem + "_summary.csv"));
  out << level_name << ",attempts,solutions,invalid,no_sync,max_p\n";
  for (const auto& l : levels) {
    const auto it = l.n_p.find(0);
    out << fmt_num(l.level) << ',' << l.attempts << ',' << l.solutions() << ',' << l.invalid << ','
        << (it == l.n_p.end() ? 0 : it->second) << ',' << l.max_p() << '\n';
  }
}

inline std::vector<LevelStats> run_level_sweep(const RunContext& ctx, const std::string& section,
                                               const std::string& list_key, bool noise_axis) {
  const auto setup = network_setup(ctx.config);
  const auto values = get_list(ctx.config, section + "." + list_key);
  const auto attempts = get<std::size_t>(ctx.config, section + ".attempts");
  if (values.empty()) throw ConfigError(section + "." + list_key + " is empty");
  const auto table = enumerate_classes();
  auto log = open_output(ctx.out_dir / (section + "_attempts.csv"));
  log << "level," << kAttemptLogHeader << '\n';

  std::vector<LevelStats> levels;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double u_n0 = noise_axis ? values[k] * 1e-6 : setup.params.u_n0;
    const double eta_th = noise_axis ? setup.params.eta_th : values[k];
    if (!noise_axis && (eta_th <= 0 || eta_th >= 100))
      throw ConfigError("eta_th levels must lie strictly between 0 and 100");
    if (noise_axis && u_n0 < 0) throw ConfigError("noise levels must be non-negative");
    ctx.progress(list_key + " = " + fmt_num(values[k]) + " (" + std::to_string(k + 1) + "/" +
                 std::to_string(values.size()) + ")");
    std::ostringstream rows;
    auto st = step1_statistics(ctx, setup, u_n0, eta_th, attempts, derive_seed(ctx.seed, {k}),
                               table, &rows);
    std::istringstream in(rows.str());
    for (std::string line; std::getline(in, line);) log << fmt_num(values[k]) << ',' << line << '\n';
    st.level = values[k];
    levels.push_back(std::move(st));
  }
  return levels;
}

inline void cmd_noise_sweep(const RunContext& ctx) {
  const auto levels = run_level_sweep(ctx, "noise_sweep", "u_n_uV", true);
  write_level_tables(ctx, "noise_sweep", "u_n_uV", levels);
  write_manifest(ctx, {"noise_sweep.csv", "noise_sweep_summary.csv", "noise_sweep_attempts.csv"});
}

inline void cmd_eta_sweep(const RunContext& ctx) {
  const auto levels = run_level_sweep(ctx, "eta_sweep", "eta_th", false);
  write_level_tables(ctx, "eta_sweep", "eta_th", levels);
  write_manifest(ctx, {"eta_sweep.csv", "eta_sweep_summary.csv", "eta_sweep_attempts.csv"});
}

struct BaseSyncSample {
  long sample = -1;  // -1 is the uncoupled baseline
  std::uint16_t pattern = 0;
  ParamSet params;
  SyncResult sync;
};

struct BaseSyncResult {
  BaseSyncSample baseline;
  std::vector<BaseSyncSample> samples;
};

/// Baseline with the grid disconnected from the output, then random
/// (s_o, s_m, I_ON, I_OFF) draws at the same reference/output settings.
inline BaseSyncResult run_base_sync(const RunContext& ctx) {
  const auto setup = network_setup(ctx.config);
  const auto n = get<std::size_t>(ctx.config, "base_sync.samples");
  const auto fixed_pattern = get<long>(ctx.config, "base_sync.pattern");
  if (fixed_pattern >= static_cast<long>(kNumPatterns)) throw ConfigError("base_sync.pattern out of range");

  const auto run_one = [&](const ParamSet& ps, Pattern x, std::uint64_t seed) {
    auto s = setup;
    s.params = ps;
    s.pattern = x;
    const auto sim = simulate(network_config(s, seed));
    return measure_sync(sim.pulse_trains[kReference], sim.pulse_trains[kOutput],
                        sync_options(ps, setup.eval));
  };

  BaseSyncResult out;
  out.baseline.params = setup.params;
  out.baseline.params.s_o = 0.0;
  out.baseline.pattern = setup.pattern.index();
  out.baseline.sync = run_one(out.baseline.params, setup.pattern, derive_seed(ctx.seed, {0}));

  auto ranges = SearchRanges::global();
  ranges.i_0 = {setup.params.i_0, setup.params.i_0, kCurrentStep};
  ranges.i_10 = {setup.params.i_10, setup.params.i_10, kCurrentStep};
  ranges.s_r = {setup.params.s_r, setup.params.s_r, 0.0};

  out.samples.resize(n);
  std::atomic<std::size_t> done{0};
  parallel_for(n, ctx.threads, [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(ctx.seed, {1, k}));
    const auto ps = sample_params(ranges, rng, setup.params, setup.eval.switch_params);
    const auto x = fixed_pattern >= 0
                       ? Pattern(static_cast<std::uint16_t>(fixed_pattern))
                       : Pattern(static_cast<std::uint16_t>(
                             std::uniform_int_distribution<int>(0, kNumPatterns - 1)(rng)));
    out.samples[k] = {static_cast<long>(k), x.index(), ps, run_one(ps, x, derive_seed(ctx.seed, {2, k}))};
    const auto d = ++done;
    if (d % 50 == 0) ctx.progress(std::to_string(d) + "/" + std::to_string(n) + " samples");
  });
  return out;
}

inline void cmd_base_sync(const RunContext& ctx) {
  const auto res = run_base_sync(ctx);
  auto out = open_output(ctx.out_dir / "base_sync.csv");
  out << "sample,pattern,s_o,s_m,i_on,i_off,shr_mj,shr_mi,shr_real,eta,synchronized\n";
  const auto row = [&](const BaseSyncSample& s) {
    out << s.sample << ',' << s.pattern << ',' << fmt_num(s.params.s_o) << ','
        << fmt_num(s.params.s_m) << ',' << fmt_num(s.params.i_on) << ',' << fmt_num(s.params.i_off)
        << ',';
    if (!s.sync.histogram.entries.empty())
      out << s.sync.shr.m_j << ',' << s.sync.shr.m_i << ',' << fmt_num(s.sync.shr_value());
    else
      out << ",,";
    out << ',' << fmt_num(s.sync.eta) << ',' << (s.sync.synchronized ? 1 : 0) << '\n';
  };
  row(res.baseline);
  for (const auto& s : res.samples) row(s);

  json summary;
  summary["baseline"] = sync_result_json(res.baseline.sync);
  std::vector<double> synced;
  for (const auto& s : res.samples)
    if (s.sync.synchronized) synced.push_back(s.sync.shr_value());
  summary["samples"] = res.samples.size();
  summary["synchronized_samples"] = synced.size();
  if (!synced.empty() && !res.baseline.sync.histogram.entries.empty()) {
    const auto [lo, hi] = std::minmax_element(synced.begin(), synced.end());
    const double base = res.baseline.sync.shr_value();
    summary["min_shr_real"] = snap_decimal(*lo);
    summary["max_shr_real"] = snap_decimal(*hi);
    summary["dispersion"] = snap_decimal(*hi - base);
    summary["below_baseline"] = std::count_if(synced.begin(), synced.end(),
                                              [&](double v) { return v < base - 0.02; });
  }
  write_json(ctx.out_dir / "base_sync.json", summary);
  write_manifest(ctx, {"base_sync.csv", "base_sync.json"});
}

struct ConvergeRow {
  std::size_t n_points = 0;
  SyncResult sync;
  std::size_t pulses_ref = 0, pulses_out = 0;
};

struct ConvergeResult {
  std::vector<ConvergeRow> rows;
  std::optional<std::size_t> first_synchronized;
  double eta_fluctuation = 0.0;  // max - min of eta over the final window
  bool ratio_stable = false;     // same SHR over the final window
  std::size_t window = 0;
};

/// SyncResult over growing prefixes of one long run.
inline ConvergeResult run_converge(const RunContext& ctx) {
  const auto setup = network_setup(ctx.config);
  const auto step = get<std::size_t>(ctx.config, "converge.prefix_step");
  const auto window = get<std::size_t>(ctx.config, "converge.window");
  if (step == 0) throw ConfigError("converge.prefix_step must be positive");
  const auto cfg = network_config(setup, ctx.seed);
  emit_warnings(ctx, cfg);
  const auto sim = simulate(cfg);
  const auto& ref = sim.pulse_trains[kReference];
  const auto& outp = sim.pulse_trains[kOutput];
  const auto opts = sync_options(setup.params, setup.eval);

  ConvergeResult res;
  res.window = window;
  for (std::size_t n = step; n <= cfg.n_points; n += step) {
    const auto cut = [n](const PulseTrain& tr) {
      return static_cast<std::size_t>(std::lower_bound(tr.begin(), tr.end(), n) - tr.begin());
    };
    ConvergeRow row;
    row.n_points = n;
    row.pulses_ref = cut(ref);
    row.pulses_out = cut(outp);
    row.sync = measure_sync(std::span(ref).first(row.pulses_ref), std::span(outp).first(row.pulses_out), opts);
    if (row.sync.synchronized && !res.first_synchronized) res.first_synchronized = n;
    res.rows.push_back(std::move(row));
  }
  if (!res.rows.empty()) {
    const std::size_t last = res.rows.back().n_points;
    double lo = 1e300, hi = -1e300;
    std::set<ShrRatio> ratios;
    for (const auto& r : res.rows) {
      if (r.n_points + window < last) continue;
      lo = std::min(lo, r.sync.eta);
      hi = std::max(hi, r.sync.eta);
      ratios.insert(r.sync.shr);
    }
    res.eta_fluctuation = hi - lo;
    res.ratio_stable = ratios.size() == 1 && !res.rows.back().sync.histogram.entries.empty();
  }
  return res;
}

inline void cmd_converge(const RunContext& ctx) {
  const auto res = run_converge(ctx);
  auto out = open_output(ctx.out_dir / "converge.csv");
  out << "n_points,eta,shr_mj,shr_mi,synchronized,pulses_ref,pulses_out\n";
  for (const auto& r : res.rows) {
    out << r.n_points << ',' << fmt_num(r.sync.eta) << ',';
    if (!r.sync.histogram.entries.empty()) out << r.sync.shr.m_j << ',' << r.sync.shr.m_i;
    else out << ',';
    out << ',' << (r.sync.synchronized ? 1 : 0) << ',' << r.pulses_ref << ',' << r.pulses_out << '\n';
  }
  json s;
  s["first_synchronized_n_points"] = res.first_synchronized ? json(*res.first_synchronized) : json(nullptr);
  s["eta_fluctuation"] = snap_decimal(res.eta_fluctuation);
  s["window"] = res.window;
  s["ratio_stable"] = res.ratio_stable;
  if (!res.rows.empty()) {
    s["final"] = sync_result_json(res.rows.back().sync);
    s["pulses_ref"] = res.rows.back().pulses_ref;
    s["pulses_out"] = res.rows.back().pulses_out;
  }
  write_json(ctx.out_dir / "converge.json", s);
  write_manifest(ctx, {"converge.csv", "converge.json"});
}

inline void cmd_classes(const RunContext& ctx) {
  auto out = open_output(ctx.out_dir / "classes.txt");
  write_class_table(out, enumerate_classes());
  write_manifest(ctx, {"classes.txt"});
}

inline void cmd_train(const RunContext& ctx) {
  const auto setup = network_setup(ctx.config);
  AnnealConfig ac;
  ac.u_n0 = setup.params.u_n0;
  ac.eta_th = setup.params.eta_th;
  ac.attempts_per_step = get<std::size_t>(ctx.config, "train.attempts_per_step");
  ac.steps = get<std::size_t>(ctx.config, "train.steps");
  if (ac.steps < 1 || ac.steps > 3) throw ConfigError("train.steps must be 1, 2 or 3");
  ac.seed = ctx.seed;
  ac.eval = setup.eval;
  ac.threads = ctx.threads;

  auto log = open_output(ctx.out_dir / "attempts.csv");
  log << kAttemptLogHeader << '\n';
  std::size_t best_p = 0;
  ac.on_attempt = [&](const AttemptRecord& a) {
    write_attempt_row(log, a);
    if (a.record.valid && a.record.p_value > best_p) {
      best_p = a.record.p_value;
      ctx.progress("step " + std::to_string(a.step) + " attempt " + std::to_string(a.attempt) +
                   ": P = " + std::to_string(best_p));
    }
  };
  const auto res = anneal(ac, enumerate_classes());
  log.close();

  {
    auto out = open_output(ctx.out_dir / "histogram.csv");
    out << "step,P,N_P\n";
    for (std::size_t s = 0; s < res.histograms.size(); ++s)
      for (const auto& [p, n] : res.histograms[s]) out << s + 1 << ',' << p << ',' << n << '\n';
  }
  json report;
  report["best"] = res.best ? solution_json(res.best->record) : json(nullptr);
  if (res.best) {
    report["best_step"] = res.best->step;
    report["best_attempt"] = res.best->attempt;
  }
  json steps = json::array();
  for (std::size_t s = 0; s < res.ranges.size(); ++s) {
    const auto& r = res.ranges[s];
    const auto rj = [](const ParamRange& p) {
      return json::array({snap_decimal(p.lo), snap_decimal(p.hi), snap_decimal(p.step)});
    };
    json hist = json::object();
    for (const auto& [p, n] : res.histograms[s]) hist[std::to_string(p)] = n;
    steps.push_back({{"step", s + 1},
                     {"ranges", {{"i_on", rj(r.i_on)}, {"i_off", rj(r.i_off)}, {"i_0", rj(r.i_0)},
                                 {"i_10", rj(r.i_10)}, {"s_r", rj(r.s_r)}, {"s_m", rj(r.s_m)},
                                 {"s_o", rj(r.s_o)}}},
                     {"histogram", hist}});
  }
  report["steps"] = steps;
  write_json(ctx.out_dir / "best.json", report);
  std::vector<std::string> outputs = {"attempts.csv", "histogram.csv", "best.json"};

  if (get<bool>(ctx.config, "train.verify_orbits") && res.best) {
    ctx.progress("verifying all 512 patterns for the best solution");
    const auto checks = verify_orbits(res.best->record.params, enumerate_classes(), setup.eval,
                                      res.best->record.seed, ctx.threads);
    auto out = open_output(ctx.out_dir / "orbit_check.csv");
    out << "class_id,pattern,shr_mj,shr_mi,eta,agrees\n";
    std::size_t consistent = 0;
    for (const auto& c : checks) {
      consistent += c.consistent();
      for (const auto& m : c.members) {
        out << c.class_id << ',' << m.pattern << ',';
        if (m.shr) out << m.shr->m_j << ',' << m.shr->m_i;
        else out << ',';
        out << ',' << fmt_num(m.eta) << ',' << (m.shr == c.representative ? 1 : 0) << '\n';
      }
    }
    ctx.progress(std::to_string(consistent) + " of " + std::to_string(checks.size()) +
                 " classes agree across their orbits");
    outputs.push_back("orbit_check.csv");
  }
  write_manifest(ctx, outputs);
}

inline void run_command(const RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  const auto& c = ctx.command;
  if (c == "simulate") cmd_simulate(ctx);
  else if (c == "sweep2d") cmd_sweep2d(ctx);
  else if (c == "noise-sweep") cmd_noise_sweep(ctx);
  else if (c == "eta-sweep") cmd_eta_sweep(ctx);
  else if (c == "base-sync") cmd_base_sync(ctx);
  else if (c == "converge") cmd_converge(ctx);
  else if (c == "classes") cmd_classes(ctx);
  else if (c == "train") cmd_train(ctx);
  else throw ConfigError("unknown command '" + c + "'");
}

}  // namespace onn::experiments

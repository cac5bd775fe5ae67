#pragma once

// Eleven thermally coupled relaxation oscillators.
//
// Each oscillator is a current source feeding a capacitor in parallel with
// a VO2 switch; a noise source sits in series with the switch.  Per step:
//   1. switch voltage U = U_c - U_n,
//   2. flags settle to a fixed point of the hysteresis rule, with every
//      threshold lowered by the couplings of the switches currently ON,
//   3. capacitor voltages advance one step on the settled linear branch,
//      solved in closed form (exact exponential relaxation by default,
//      backward Euler on request).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "onn/coupling.hpp"
#include "onn/noise.hpp"
#include "onn/switch_model.hpp"

namespace onn {

/// Feed-current range in which a lone oscillator with default switch
/// parameters is expected to oscillate.
inline constexpr double kMinFeedCurrent = 550e-6;
inline constexpr double kMaxFeedCurrent = 1061e-6;

/// How a linear branch is advanced over one step with the noise held
/// constant.  Both are closed-form; `Exact` is the analytic solution of the
/// branch ODE, `ImplicitEuler` the backward-Euler update.
enum class BranchIntegrator : unsigned char { Exact, ImplicitEuler };

struct NetworkConfig {
  std::array<double, kNumOscillators> feed_currents{};  // [A]
  double capacitance = 100e-9;                          // [F]
  double noise_amplitude = 0.0;                         // [V]
  CouplingMatrix coupling{};
  double dt = 1e-5;                                     // [s]
  std::size_t n_points = 250'000;
  std::uint64_t seed = 0;
  SwitchParams switch_params{};
  BranchIntegrator integrator = BranchIntegrator::Exact;

  /// Throws on configurations the integrator cannot run.
  void validate() const {
    switch_params.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (n_points < 2) throw std::invalid_argument("n_points must be at least 2");
    if (!(capacitance > 0.0)) throw std::invalid_argument("capacitance must be positive");
    if (noise_amplitude < 0.0) throw std::invalid_argument("noise amplitude must be non-negative");
    for (std::size_t i = 0; i < kNumOscillators; ++i) {
      if (coupling.s[i][i] != 0.0) throw std::invalid_argument("coupling matrix has a self-loop");
      for (std::size_t j = 0; j < kNumOscillators; ++j)
        if (coupling.s[i][j] < 0.0) throw std::invalid_argument("coupling strengths must be non-negative");
    }
  }

  /// Soft problems worth reporting but not fatal.
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < kNumOscillators; ++i) {
      const double ip = feed_currents[i];
      if (ip < kMinFeedCurrent || ip > kMaxFeedCurrent) {
        std::ostringstream msg;
        msg << "feed current of oscillator " << i << " (" << ip * 1e6
            << " uA) is outside the nominal oscillation range [550, 1061] uA";
        out.push_back(msg.str());
      }
    }
    for (std::size_t i = 0; i < kNumOscillators; ++i) {
      if (switch_params.u_th - coupling.incoming_total(i) <= switch_params.u_h) {
        std::ostringstream msg;
        msg << "total coupling into oscillator " << i
            << " can pull its threshold down to the holder voltage";
        out.push_back(msg.str());
      }
    }
    return out;
  }
};

struct NetworkState {
  std::array<double, kNumOscillators> cap_voltages{};
  std::array<SwitchFlag, kNumOscillators> flags{};
  std::size_t time_index = 0;

  bool operator==(const NetworkState&) const = default;
};

/// Timestep indices at which a switch turned ON.
using PulseTrain = std::vector<std::size_t>;

/// Raised when the flag cascade fails to settle, which can only happen
/// when the summed coupling into some switch violates the threshold bound.
class CascadeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precomputed per-oscillator integration coefficients for one config.
class NetworkStepper {
 public:
  explicit NetworkStepper(const NetworkConfig& cfg)
      : params_(cfg.switch_params), feed_(cfg.feed_currents) {
    // New voltage = decay * old + (1 - decay) * branch equilibrium.
    const double x_off = cfg.dt / (params_.r_off * cfg.capacitance);
    const double x_on = cfg.dt / (params_.r_on * cfg.capacitance);
    if (cfg.integrator == BranchIntegrator::Exact) {
      decay_off_ = std::exp(-x_off);
      decay_on_ = std::exp(-x_on);
    } else {
      decay_off_ = 1.0 / (1.0 + x_off);
      decay_on_ = 1.0 / (1.0 + x_on);
    }
    // Threshold shifts are summed as integers so the result does not depend
    // on the order of the sources (needed for exact grid-symmetry
    // equivariance).
    for (std::size_t src = 0; src < kNumOscillators; ++src)
      for (std::size_t dst = 0; dst < kNumOscillators; ++dst) {
        coupling_pv_[src][dst] = std::llround(cfg.coupling.s[src][dst] / kVoltQuantum);
        if (coupling_pv_[src][dst] != 0) has_outputs_[src] = true;
      }
  }

  /// Advances `state` by one step.  Returns a bitmask of oscillators that
  /// turned ON in this step.  When `currents` is given it receives the
  /// switch currents at the start of the step on the settled branches.
  std::uint32_t advance(NetworkState& state, std::span<const double, kNumOscillators> noise,
                        std::span<double> currents = {},
                        std::span<double> switch_voltages = {}) const {
    std::array<double, kNumOscillators> u;
    for (std::size_t i = 0; i < kNumOscillators; ++i) u[i] = state.cap_voltages[i] - noise[i];

    auto& flags = state.flags;
    const auto before = flags;
    std::array<std::int64_t, kNumOscillators> lowered;
    // Each settling sweep after the first can only turn switches ON, so a
    // valid network needs at most kNumOscillators sweeps that change anything.
    for (std::size_t sweep = 0;; ++sweep) {
      lowered.fill(0);
      for (std::size_t src = 0; src < kNumOscillators; ++src) {
        if (flags[src] != SwitchFlag::On || !has_outputs_[src]) continue;
        const auto& row = coupling_pv_[src];
        for (std::size_t dst = 0; dst < kNumOscillators; ++dst) lowered[dst] += row[dst];
      }
      bool changed = false;
      std::array<SwitchFlag, kNumOscillators> next;
      for (std::size_t i = 0; i < kNumOscillators; ++i) {
        const double th = params_.u_th - static_cast<double>(lowered[i]) * kVoltQuantum;
        next[i] = update_flag(flags[i], u[i], th, params_.u_h);
        changed |= next[i] != flags[i];
      }
      if (!changed) break;
      if (sweep >= kNumOscillators)
        throw CascadeError("switch flags did not settle within " +
                           std::to_string(kNumOscillators) + " sweeps at step " +
                           std::to_string(state.time_index));
      flags = next;
    }

    std::uint32_t turned_on = 0;
    for (std::size_t i = 0; i < kNumOscillators; ++i) {
      if (before[i] == SwitchFlag::Off && flags[i] == SwitchFlag::On) turned_on |= 1u << i;
      if (!currents.empty()) currents[i] = iv_current(u[i], flags[i], params_);
      if (!switch_voltages.empty()) switch_voltages[i] = u[i];
      const double vc = state.cap_voltages[i];
      if (flags[i] == SwitchFlag::Off) {
        const double eq = feed_[i] * params_.r_off + noise[i];
        state.cap_voltages[i] = eq + (vc - eq) * decay_off_;
      } else {
        const double eq = feed_[i] * params_.r_on + params_.u_cf + noise[i];
        state.cap_voltages[i] = eq + (vc - eq) * decay_on_;
      }
    }
    ++state.time_index;
    return turned_on;
  }

 private:
  static constexpr double kVoltQuantum = 1e-12;  // coupling resolution [V]

  SwitchParams params_;
  std::array<std::array<std::int64_t, kNumOscillators>, kNumOscillators> coupling_pv_{};
  std::array<double, kNumOscillators> feed_;
  std::array<bool, kNumOscillators> has_outputs_{};
  double decay_off_ = 0.0;
  double decay_on_ = 0.0;
};

/// One step of the network as a pure function of its inputs.
inline NetworkState step(NetworkState state, const NetworkConfig& cfg,
                         std::span<const double, kNumOscillators> noise) {
  NetworkStepper(cfg).advance(state, noise);
  return state;
}

struct SimulationOptions {
  bool record_currents = false;
  bool record_voltages = false;
};

struct SimulationResult {
  std::array<PulseTrain, kNumOscillators> pulse_trains;
  // Per-oscillator traces, present only when requested.
  std::array<std::vector<double>, kNumOscillators> currents;
  std::array<std::vector<double>, kNumOscillators> voltages;
  NetworkState final_state;
};

/// Runs cfg.n_points steps from a cold start (capacitors at 0 V, all
/// switches OFF) using a pre-generated noise field.
inline SimulationResult simulate(const NetworkConfig& cfg, const NoiseField& noise,
                                 SimulationOptions opts = {}) {
  cfg.validate();
  if (noise.size() < cfg.n_points)
    throw std::invalid_argument("noise field is shorter than the simulation");

  const NetworkStepper stepper(cfg);
  SimulationResult out;
  NetworkState state;
  state.flags.fill(SwitchFlag::Off);

  for (auto& train : out.pulse_trains) train.reserve(cfg.n_points / 64);
  if (opts.record_currents)
    for (auto& tr : out.currents) tr.resize(cfg.n_points);
  if (opts.record_voltages)
    for (auto& tr : out.voltages) tr.resize(cfg.n_points);

  std::array<double, kNumOscillators> cur{};
  std::array<double, kNumOscillators> volt{};
  std::span<double> cur_out;
  std::span<double> volt_out;
  if (opts.record_currents) cur_out = cur;
  if (opts.record_voltages) volt_out = volt;

  for (std::size_t t = 0; t < cfg.n_points; ++t) {
    std::uint32_t on = stepper.advance(state, noise.row(t), cur_out, volt_out);
    while (on != 0) {
      const auto i = static_cast<std::size_t>(std::countr_zero(on));
      out.pulse_trains[i].push_back(t);
      on &= on - 1;
    }
    if (opts.record_currents)
      for (std::size_t i = 0; i < kNumOscillators; ++i) out.currents[i][t] = cur[i];
    if (opts.record_voltages)
      for (std::size_t i = 0; i < kNumOscillators; ++i) out.voltages[i][t] = volt[i];
  }
  out.final_state = state;
  return out;
}

inline SimulationResult simulate(const NetworkConfig& cfg, SimulationOptions opts = {}) {
  cfg.validate();
  return simulate(cfg, NoiseField(cfg.seed, cfg.n_points, cfg.noise_amplitude), opts);
}

}  // namespace onn

#pragma once

// Piecewise-linear two-state model of a VO2 switch.
//
// The I-V curve has a high-resistance OFF branch through the origin and a
// low-resistance ON branch crossing zero at the cutoff voltage.  Switching
// is hysteretic: OFF -> ON above the (possibly coupling-lowered) threshold,
// ON -> OFF below the holder voltage.

#include <span>
#include <stdexcept>
#include <utility>

namespace onn {

enum class SwitchFlag : unsigned char { Off, On };

struct SwitchParams {
  double u_th = 5.0;    // natural threshold voltage [V]
  double u_h = 1.5;     // holder voltage [V]
  double u_cf = 0.82;   // cutoff voltage of the ON branch [V]
  double r_off = 9100.0;
  double r_on = 615.0;

  bool valid() const noexcept {
    return u_th > u_h && u_h > u_cf && u_cf > 0.0 && r_off > r_on && r_on > 0.0;
  }

  void validate() const {
    if (!valid())
      throw std::invalid_argument(
          "switch parameters must satisfy u_th > u_h > u_cf > 0 and r_off > r_on > 0");
  }
};

/// Switch current for voltage `u` on the branch selected by `flag`.
inline double iv_current(double u, SwitchFlag flag, const SwitchParams& p) noexcept {
  return flag == SwitchFlag::Off ? u / p.r_off : (u - p.u_cf) / p.r_on;
}

struct IncomingCoupling {
  double strength;     // [V]
  SwitchFlag source;
};

/// Natural threshold lowered by every coupling whose source switch is ON.
inline double effective_threshold(const SwitchParams& p,
                                  std::span<const IncomingCoupling> incoming) noexcept {
  double lowered = 0.0;
  for (const auto& c : incoming)
    if (c.source == SwitchFlag::On) lowered += c.strength;
  return p.u_th - lowered;
}

// OFF -> ON uses a strict comparison, as does ON -> OFF.
inline SwitchFlag update_flag(SwitchFlag flag, double u, double u_th_eff, double u_h) noexcept {
  if (flag == SwitchFlag::Off && u > u_th_eff) return SwitchFlag::On;
  if (flag == SwitchFlag::On && u < u_h) return SwitchFlag::Off;
  return flag;
}

}  // namespace onn

#pragma once

#include <optional>
#include <span>
#include <string>

#include "rotorlab/dynamics.hpp"
#include "rotorlab/types.hpp"

namespace rotorlab {

// ---------------------------------------------------------------------------
// Throttle mixing for the neural controller
// ---------------------------------------------------------------------------

struct MixResult {
  double t_hat = 0.0;  // throttle actually added to every output
  Vec4 u{};
};

/// Adds collective throttle to attitude outputs without stealing range from
/// them: the throttle is scaled by the headroom left above the largest output.
/// Throws InvalidInput when y or throttle leave [0, 1].
MixResult mix_throttle(const Vec4& y, double throttle);

// ---------------------------------------------------------------------------
// PID rate controller
// ---------------------------------------------------------------------------

struct AxisGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;

  bool operator==(const AxisGains&) const = default;
};

struct PidGains {
  std::array<AxisGains, kAxes> axis{};

  AxisGains& operator[](Axis a) { return axis[static_cast<std::size_t>(a)]; }
  const AxisGains& operator[](Axis a) const { return axis[static_cast<std::size_t>(a)]; }

  void validate() const;
  bool operator==(const PidGains&) const = default;

  /// Gains obtained in simulation after Ziegler-Nichols plus manual overshoot reduction.
  static PidGains reference();
};

struct PidState {
  Vec3 integral{};
  Vec3 prev_measurement{};
  bool primed = false;
};

struct PidOutput {
  Vec3 out{};
  PidState state;
};

/// One controller step. The derivative acts on the measurement, so setpoint
/// steps do not kick. `integral_limit` bounds |ki * integral| per axis.
PidOutput pid_step(const PidGains& gains, const Vec3& error, const Vec3& measurement,
                   const PidState& state, double dt, double integral_limit);

/// Quad-X motor mixing with the airframe sign tables, clamped to [0, 1].
Vec4 pid_mix(const Vec3& axis_out, double throttle, const AirframeModel& airframe);

// ---------------------------------------------------------------------------
// Ziegler-Nichols tuning
// ---------------------------------------------------------------------------

struct ZnOptions {
  double kp_start = 1e-4;
  double kp_limit = 100.0;
  double sweep_factor = 1.1;      // multiplicative step of the coarse sweep
  double step_amplitude = 20.0;   // deg/s setpoint step used to excite the loop
  double throttle = 0.5;
  double sim_time = 2.0;          // s per trial
  int min_periods = 4;
  double ratio_low = 0.95;
  double ratio_high = 1.05;
  int refine_iterations = 40;
};

struct OscillationProbe {
  double peak_ratio = 0.0;  // per-period amplitude ratio, 0 if no oscillation
  double period = 0.0;      // s
  int periods = 0;
};

struct ZnResult {
  double ultimate_gain = 0.0;
  double ultimate_period = 0.0;
  AxisGains gains;
  int trials = 0;
};

class ZnTuneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Classic table: Kp = 0.6 Ku, Ki = Kp / (0.5 Tu), Kd = Kp * 0.125 Tu.
AxisGains zn_classic_gains(double ultimate_gain, double ultimate_period);

/// Runs a P-only closed loop on `axis` and measures the oscillation.
OscillationProbe probe_oscillation(const AirframeModel& airframe, Axis axis, double kp,
                                   const ZnOptions& options);

/// Sweeps kp upward until the loop sustains oscillation and returns the
/// classic-table gains for that axis. Throws ZnTuneError if the sweep bound
/// is reached first.
ZnResult zn_tune(const AirframeModel& airframe, Axis axis, const ZnOptions& options = {});

}  // namespace rotorlab

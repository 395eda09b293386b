#pragma once

#include "rotorlab/types.hpp"

namespace rotorlab {

/// Physical description of a quad-X airframe fixed about its center of mass.
///
/// Rotor order follows the common flight-controller convention:
/// 0 rear-right, 1 front-right, 2 rear-left, 3 front-left. The sign tables
/// give the contribution of each rotor's thrust to positive roll and pitch
/// torque, and the spin direction of each rotor (the sign of its reaction
/// torque about the yaw axis). The same tables drive the PID motor mixer.
///
/// The inertia and rotor coefficients are placeholders for a small racing
/// quad, not measured values. Only omega_max and the rotor PI gains come from
/// the real propulsion system.
struct AirframeModel {
  Vec3 inertia{0.007, 0.007, 0.012};  // kg*m^2, principal axes
  double arm_length = 0.11;           // m, thrust moment arm
  Vec4 roll_sign{-1.0, -1.0, 1.0, 1.0};
  Vec4 pitch_sign{1.0, -1.0, 1.0, -1.0};
  Vec4 spin{-1.0, 1.0, 1.0, -1.0};
  double k_thrust = 3.46e-7;    // N / (rad/s)^2, hover near u = 0.5 for 0.43 kg
  double k_drag = 5.5e-9;       // N*m / (rad/s)^2
  double omega_max = rpm_to_rad_per_s(33422.0);
  double rotor_kp = 0.01;
  double rotor_ki = 1.0;
  double rotor_inertia = 2.7e-4;  // kg*m^2, rotor plus propeller
  double dt = 0.001;              // s
  double max_body_rate = 10000.0; // deg/s, divergence guard

  /// Throws InvalidInput naming the first offending field.
  void validate() const;
};

/// Rotational state. Body rates are in deg/s, rotor speeds in rad/s.
struct BodyState {
  Vec3 omega_body{};
  Vec4 rotor_speed{};
  Vec4 rotor_pid_integral{};
  double t = 0.0;

  bool operator==(const BodyState&) const = default;
};

enum class StepStatus { ok, diverged };

struct StepResult {
  BodyState state;
  StepStatus status = StepStatus::ok;
};

/// Advances every rotor one step under its velocity PI loop tracking
/// u_i * omega_max. Rejects non-finite commands, naming the rotor.
BodyState rotor_step(const BodyState& state, const Vec4& u, const AirframeModel& model);

/// Torque on the airframe (N*m per axis) produced by the current rotor speeds.
Vec3 body_torque(const BodyState& state, const AirframeModel& model);

/// One explicit-Euler physics step. Rotor and body derivatives are both
/// evaluated at the incoming state.
StepResult step(const BodyState& state, const Vec4& u, const AirframeModel& model);

}  // namespace rotorlab

#include "rotorlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rotorlab {

namespace {

void require_positive(double value, const char* field) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidInput(std::string("airframe.") + field + " must be positive and finite");
  }
}

}  // namespace

const char* axis_name(Axis axis) {
  switch (axis) {
    case Axis::roll: return "roll";
    case Axis::pitch: return "pitch";
    case Axis::yaw: return "yaw";
  }
  return "?";
}

Axis parse_axis(const std::string& name) {
  if (name == "roll") return Axis::roll;
  if (name == "pitch") return Axis::pitch;
  if (name == "yaw") return Axis::yaw;
  throw InvalidInput("unknown axis '" + name + "' (expected roll, pitch or yaw)");
}

void AirframeModel::validate() const {
  for (double i : inertia) require_positive(i, "inertia");
  require_positive(arm_length, "arm_length");
  require_positive(k_thrust, "k_thrust");
  if (!(k_drag >= 0.0)) throw InvalidInput("airframe.k_drag must be non-negative");
  require_positive(omega_max, "omega_max");
  require_positive(rotor_inertia, "rotor_inertia");
  require_positive(dt, "dt");
  require_positive(max_body_rate, "max_body_rate");
  if (!(rotor_kp >= 0.0) || !(rotor_ki >= 0.0)) {
    throw InvalidInput("airframe.rotor_kp and rotor_ki must be non-negative");
  }
}

BodyState rotor_step(const BodyState& state, const Vec4& u, const AirframeModel& model) {
  for (std::size_t i = 0; i < kRotors; ++i) {
    if (!std::isfinite(u[i])) {
      throw InvalidInput("non-finite actuator command for rotor " + std::to_string(i));
    }
  }

  // The integral term carries the torque needed to hold a speed against
  // propeller drag; its range is capped at the hold torque at omega_max.
  const double hold_max = model.k_drag * model.omega_max * model.omega_max;
  const double integral_max = model.rotor_ki > 0.0 ? hold_max / model.rotor_ki : 0.0;

  BodyState next = state;
  for (std::size_t i = 0; i < kRotors; ++i) {
    const double target = std::clamp(u[i], 0.0, 1.0) * model.omega_max;
    const double omega = state.rotor_speed[i];
    const double error = target - omega;

    double integral = state.rotor_pid_integral[i] + error * model.dt;
    integral = std::clamp(integral, 0.0, integral_max);

    const double motor_torque = model.rotor_kp * error + model.rotor_ki * integral;
    const double drag_torque = model.k_drag * omega * omega;
    const double accel = (motor_torque - drag_torque) / model.rotor_inertia;

    next.rotor_speed[i] = std::clamp(omega + accel * model.dt, 0.0, model.omega_max);
    next.rotor_pid_integral[i] = integral;
  }
  return next;
}

Vec3 body_torque(const BodyState& state, const AirframeModel& model) {
  Vec3 torque{};
  for (std::size_t i = 0; i < kRotors; ++i) {
    const double w2 = state.rotor_speed[i] * state.rotor_speed[i];
    const double thrust = model.k_thrust * w2;
    torque[0] += model.roll_sign[i] * thrust * model.arm_length;
    torque[1] += model.pitch_sign[i] * thrust * model.arm_length;
    torque[2] += model.spin[i] * model.k_drag * w2;
  }
  return torque;
}

StepResult step(const BodyState& state, const Vec4& u, const AirframeModel& model) {
  // All derivatives are taken at the current state (plain explicit Euler).
  const Vec3 torque = body_torque(state, model);
  StepResult result{rotor_step(state, u, model), StepStatus::ok};
  BodyState& next = result.state;

  const Vec3& I = model.inertia;
  Vec3 w{};
  for (std::size_t a = 0; a < kAxes; ++a) w[a] = deg_to_rad(state.omega_body[a]);

  // I * dw/dt = tau - w x (I w)
  const Vec3 Iw{I[0] * w[0], I[1] * w[1], I[2] * w[2]};
  const Vec3 gyro{w[1] * Iw[2] - w[2] * Iw[1], w[2] * Iw[0] - w[0] * Iw[2], w[0] * Iw[1] - w[1] * Iw[0]};

  for (std::size_t a = 0; a < kAxes; ++a) {
    const double accel = (torque[a] - gyro[a]) / I[a];
    next.omega_body[a] = state.omega_body[a] + rad_to_deg(accel * model.dt);
    if (!std::isfinite(next.omega_body[a]) || std::abs(next.omega_body[a]) > model.max_body_rate) {
      result.status = StepStatus::diverged;
    }
  }
  next.t = state.t + model.dt;
  return result;
}

}  // namespace rotorlab

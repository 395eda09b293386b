#include "rotorlab/control.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rotorlab {

MixResult mix_throttle(const Vec4& y, double throttle) {
  if (!(throttle >= 0.0 && throttle <= 1.0)) {
    throw InvalidInput("throttle must lie in [0, 1]");
  }
  double y_max = 0.0;
  for (std::size_t i = 0; i < kRotors; ++i) {
    if (!(y[i] >= 0.0 && y[i] <= 1.0)) {
      throw InvalidInput("controller output y[" + std::to_string(i) + "] must lie in [0, 1]");
    }
    y_max = std::max(y_max, y[i]);
  }

  MixResult mix;
  // A saturated output leaves no headroom; no throttle is added.
  mix.t_hat = y_max >= 1.0 ? 0.0 : throttle * (1.0 - y_max);
  for (std::size_t i = 0; i < kRotors; ++i) mix.u[i] = mix.t_hat + y[i];
  return mix;
}

void PidGains::validate() const {
  for (std::size_t a = 0; a < kAxes; ++a) {
    const AxisGains& g = axis[a];
    const std::string name = axis_name(static_cast<Axis>(a));
    if (!std::isfinite(g.kp) || !std::isfinite(g.ki) || !std::isfinite(g.kd)) {
      throw InvalidInput("pid gains for " + name + " must be finite");
    }
    if (g.ki < 0.0 || g.kd < 0.0) {
      throw InvalidInput("pid ki and kd for " + name + " must be non-negative");
    }
  }
}

PidGains PidGains::reference() {
  PidGains g;
  g[Axis::roll] = {0.032029, 0.0, 0.000396};
  g[Axis::pitch] = {0.032029, 0.0, 0.000396};
  g[Axis::yaw] = {0.032029, 0.0, 0.0};
  return g;
}

PidOutput pid_step(const PidGains& gains, const Vec3& error, const Vec3& measurement,
                   const PidState& state, double dt, double integral_limit) {
  if (!(dt > 0.0)) throw InvalidInput("pid_step requires dt > 0");

  PidOutput result{{}, state};
  PidState& next = result.state;
  for (std::size_t a = 0; a < kAxes; ++a) {
    const AxisGains& g = gains.axis[a];

    double integral = state.integral[a] + error[a] * dt;
    if (g.ki > 0.0) {
      const double bound = integral_limit / g.ki;
      integral = std::clamp(integral, -bound, bound);
    }
    next.integral[a] = integral;

    const double prev = state.primed ? state.prev_measurement[a] : measurement[a];
    const double derivative = -(measurement[a] - prev) / dt;
    next.prev_measurement[a] = measurement[a];

    result.out[a] = g.kp * error[a] + g.ki * integral + g.kd * derivative;
  }
  next.primed = true;
  return result;
}

Vec4 pid_mix(const Vec3& axis_out, double throttle, const AirframeModel& airframe) {
  Vec4 u{};
  for (std::size_t i = 0; i < kRotors; ++i) {
    const double raw = throttle + airframe.roll_sign[i] * axis_out[0] +
                       airframe.pitch_sign[i] * axis_out[1] + airframe.spin[i] * axis_out[2];
    u[i] = std::clamp(raw, 0.0, 1.0);
  }
  return u;
}

AxisGains zn_classic_gains(double ultimate_gain, double ultimate_period) {
  AxisGains g;
  g.kp = 0.6 * ultimate_gain;
  g.ki = g.kp / (0.5 * ultimate_period);
  g.kd = g.kp * 0.125 * ultimate_period;
  return g;
}

OscillationProbe probe_oscillation(const AirframeModel& airframe, Axis axis, double kp,
                                   const ZnOptions& options) {
  const auto ax = static_cast<std::size_t>(axis);
  PidGains gains;
  gains.axis[ax].kp = kp;

  // Spin the rotors up to the working throttle before exciting the loop.
  BodyState state;
  const Vec4 idle{options.throttle, options.throttle, options.throttle, options.throttle};
  for (int k = 0; k < 300; ++k) state = rotor_step(state, idle, airframe);

  const auto steps = static_cast<std::size_t>(std::llround(options.sim_time / airframe.dt));
  std::vector<double> deviation;
  deviation.reserve(steps);
  PidState pid;
  Vec3 setpoint{};
  setpoint[ax] = options.step_amplitude;
  for (std::size_t k = 0; k < steps; ++k) {
    Vec3 err{};
    for (std::size_t a = 0; a < kAxes; ++a) err[a] = setpoint[a] - state.omega_body[a];
    const PidOutput out = pid_step(gains, err, state.omega_body, pid, airframe.dt, 0.0);
    pid = out.state;
    const StepResult r = step(state, pid_mix(out.out, options.throttle, airframe), airframe);
    state = r.state;
    deviation.push_back(state.omega_body[ax] - setpoint[ax]);
    if (r.status == StepStatus::diverged) break;
  }

  // Peak-to-trough amplitude of each cycle, measured from successive maxima.
  const double floor = 1e-9 * options.step_amplitude;
  std::vector<std::size_t> maxima;
  for (std::size_t k = 1; k + 1 < deviation.size(); ++k) {
    if (deviation[k] > deviation[k - 1] && deviation[k] >= deviation[k + 1]) maxima.push_back(k);
  }
  std::vector<double> amplitude;
  std::vector<double> period;
  for (std::size_t j = 0; j + 1 < maxima.size(); ++j) {
    const auto lo = deviation.begin() + static_cast<std::ptrdiff_t>(maxima[j]);
    const auto hi = deviation.begin() + static_cast<std::ptrdiff_t>(maxima[j + 1]);
    const double trough = *std::min_element(lo, hi);
    const double a = deviation[maxima[j]] - trough;
    if (a < floor) break;
    amplitude.push_back(a);
    period.push_back(static_cast<double>(maxima[j + 1] - maxima[j]) * airframe.dt);
  }

  OscillationProbe probe;
  probe.periods = static_cast<int>(amplitude.size());
  if (probe.periods < options.min_periods) return probe;
  probe.peak_ratio =
      std::pow(amplitude.back() / amplitude.front(), 1.0 / static_cast<double>(amplitude.size() - 1));
  double total = 0.0;
  for (double p : period) total += p;
  probe.period = total / static_cast<double>(period.size());
  return probe;
}

ZnResult zn_tune(const AirframeModel& airframe, Axis axis, const ZnOptions& options) {
  airframe.validate();
  if (!(options.sweep_factor > 1.0) || !(options.kp_start > 0.0)) {
    throw InvalidInput("zn sweep needs kp_start > 0 and sweep_factor > 1");
  }

  ZnResult result;
  const auto sustained = [&](const OscillationProbe& p) {
    return p.peak_ratio >= options.ratio_low && p.peak_ratio <= options.ratio_high;
  };
  const auto finish = [&](double kp, const OscillationProbe& p) {
    result.ultimate_gain = kp;
    result.ultimate_period = p.period;
    result.gains = zn_classic_gains(kp, p.period);
    return result;
  };

  double below = 0.0;
  double kp = options.kp_start;
  for (; kp <= options.kp_limit; kp *= options.sweep_factor) {
    const OscillationProbe p = probe_oscillation(airframe, axis, kp, options);
    ++result.trials;
    if (p.peak_ratio >= options.ratio_low) {
      if (sustained(p)) return finish(kp, p);
      break;
    }
    below = kp;
  }
  if (kp > options.kp_limit) {
    throw ZnTuneError(std::string("no sustained oscillation on ") + axis_name(axis) +
                      " axis for kp up to " + std::to_string(options.kp_limit));
  }

  // Bracketed between a decaying loop (below) and a growing one (above).
  double above = kp;
  if (below == 0.0) below = above / options.sweep_factor;
  OscillationProbe best{};
  double best_kp = above;
  for (int it = 0; it < options.refine_iterations; ++it) {
    const double mid = std::sqrt(below * above);
    const OscillationProbe p = probe_oscillation(airframe, axis, mid, options);
    ++result.trials;
    if (p.periods >= options.min_periods) {
      best = p;
      best_kp = mid;
    }
    if (sustained(p)) return finish(mid, p);
    if (p.peak_ratio < options.ratio_low) {
      below = mid;
    } else {
      above = mid;
    }
  }
  if (best.periods == 0) {
    throw ZnTuneError(std::string("oscillation on ") + axis_name(axis) + " axis never settled into a limit cycle");
  }
  return finish(best_kp, best);
}

}  // namespace rotorlab

#include "rotorlab/env.hpp"

#include <algorithm>
#include <cmath>

namespace rotorlab {

const char* to_string(ObservationMode mode) {
  return mode == ObservationMode::error_delta ? "error_delta" : "error_motor";
}

const char* to_string(TaskMode mode) { return mode == TaskMode::continuous ? "continuous" : "episodic"; }

ObservationMode parse_observation_mode(const std::string& s) {
  if (s == "error_delta") return ObservationMode::error_delta;
  if (s == "error_motor") return ObservationMode::error_motor;
  throw InvalidInput("unknown observation_mode '" + s + "'");
}

TaskMode parse_task_mode(const std::string& s) {
  if (s == "continuous") return TaskMode::continuous;
  if (s == "episodic") return TaskMode::episodic;
  throw InvalidInput("unknown task_mode '" + s + "'");
}

std::vector<double> Observation::flatten() const {
  std::vector<double> out(size());
  flatten_into(out);
  return out;
}

void Observation::flatten_into(std::span<double> out) const {
  if (out.size() != size()) throw InvalidInput("observation buffer has the wrong length");
  std::copy(e.begin(), e.end(), out.begin());
  if (mode == ObservationMode::error_delta) {
    std::copy(delta_e.begin(), delta_e.end(), out.begin() + 3);
  } else {
    std::copy(rotor_norm.begin(), rotor_norm.end(), out.begin() + 3);
  }
}

Vec3 TaskScript::setpoint_at(double t) const {
  double start = 0.0;
  for (const TaskSegment& s : segments) {
    if (t < start + s.duration) return s.setpoint;
    start += s.duration;
  }
  return segments.empty() ? Vec3{} : segments.back().setpoint;
}

void EnvConfig::validate() const {
  if (!(alpha > 0.0)) throw InvalidInput("env.alpha must be > 0");
  if (!(beta > 0.0)) throw InvalidInput("env.beta must be > 0");
  if (!(delta_y_max > 0.0)) throw InvalidInput("env.delta_y_max must be > 0");
  if (!(output_scale > 0.0)) throw InvalidInput("env.output_scale must be > 0");
  if (!(error_band > 0.0)) throw InvalidInput("env.error_band must be > 0");
  if (!(setpoint_bound >= 0.0)) throw InvalidInput("env.setpoint_bound must be >= 0");
  if (!(episode_time > 0.0)) throw InvalidInput("env.episode_time must be > 0");
  if (!(gyro_noise_sigma >= 0.0)) throw InvalidInput("env.gyro_noise_sigma must be >= 0");
  for (const auto* r : {&command_duration_range, &idle_duration_range}) {
    if (!((*r)[0] > 0.0) || !((*r)[1] >= (*r)[0])) {
      throw InvalidInput("env duration ranges must satisfy 0 < lo <= hi");
    }
  }
}

TaskScript sample_task(std::uint64_t seed, const EnvConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rate(-config.setpoint_bound, config.setpoint_bound);
  const auto draw_setpoint = [&] { return Vec3{rate(rng), rate(rng), rate(rng)}; };

  TaskScript task;
  task.seed = seed;
  task.total_time = config.episode_time;

  if (config.task_mode == TaskMode::episodic) {
    task.segments.push_back({draw_setpoint(), config.episode_time});
    return task;
  }

  std::uniform_real_distribution<double> command_time(config.command_duration_range[0],
                                                      config.command_duration_range[1]);
  std::uniform_real_distribution<double> idle_time(config.idle_duration_range[0], config.idle_duration_range[1]);

  // Starts at rest, then alternates command / idle until the episode is full.
  double used = 0.0;
  bool idle = true;
  while (used < config.episode_time) {
    TaskSegment seg;
    if (idle) {
      seg.duration = idle_time(rng);
    } else {
      seg.setpoint = draw_setpoint();
      seg.duration = command_time(rng);
    }
    seg.duration = std::min(seg.duration, config.episode_time - used);
    used += seg.duration;
    task.segments.push_back(seg);
    idle = !idle;
  }
  return task;
}

Observation observe(const Vec3& prev_error, const Vec3& omega_star, const Vec3& omega_measured) {
  Observation obs;
  for (std::size_t a = 0; a < kAxes; ++a) {
    obs.e[a] = omega_star[a] - omega_measured[a];
    obs.delta_e[a] = obs.e[a] - prev_error[a];
  }
  return obs;
}

Vec3 inject_gyro_noise(const Vec3& omega_true, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw InvalidInput("gyro noise sigma must be >= 0");
  if (sigma == 0.0) return omega_true;
  std::normal_distribution<double> noise(0.0, sigma);
  Vec3 out = omega_true;
  for (double& w : out) w += noise(rng);
  return out;
}

double reward_e(const Vec3& e) { return -(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]); }

double reward_y(const Vec4& y, double alpha) {
  double sum = 0.0;
  for (double v : y) sum += v;
  return alpha * (1.0 - sum / static_cast<double>(kRotors));
}

double reward_delta(const Vec4& y, const Vec4& y_prev, const Vec3& e, const EnvConfig& config) {
  for (double err : e) {
    if (std::abs(err) >= config.error_band) return 0.0;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < kRotors; ++i) {
    const double dy = (y[i] - y_prev[i]) * config.output_scale;
    sum += std::max(0.0, config.delta_y_max - dy * dy);
  }
  return config.beta * sum;
}

RewardBreakdown reward(const Vec3& e, const Vec4& y, const Vec4& y_prev, const EnvConfig& config) {
  RewardBreakdown r;
  r.r_e = reward_e(e);
  r.r_y = reward_y(y, config.alpha);
  r.r_delta = reward_delta(y, y_prev, e, config);
  r.total = r.r_e + r.r_y + r.r_delta;
  return r;
}

AttitudeEnv::AttitudeEnv(AirframeModel airframe, EnvConfig config, std::uint64_t seed)
    : airframe_(airframe), config_(config) {
  airframe_.validate();
  config_.validate();
  std::seed_seq task_seq{seed, std::uint64_t{0x7461736bULL}};
  std::seed_seq noise_seq{seed, std::uint64_t{0x6e6f6973ULL}};
  task_rng_.seed(task_seq);
  noise_rng_.seed(noise_seq);
}

Observation AttitudeEnv::reset() { return reset(sample_task(task_rng_(), config_)); }

Observation AttitudeEnv::reset(TaskScript task) {
  task_ = std::move(task);
  body_ = BodyState{};
  prev_error_ = Vec3{};
  prev_y_ = Vec4{};
  steps_ = 0;
  episode_steps_ = static_cast<std::size_t>(std::llround(task_.total_time / airframe_.dt));
  finished_ = episode_steps_ == 0;
  const Vec3 measured = inject_gyro_noise(body_.omega_body, config_.gyro_noise_sigma, noise_rng_);
  return make_observation(measured);
}

Observation AttitudeEnv::make_observation(const Vec3& measured) {
  Observation obs = observe(prev_error_, task_.setpoint_at(body_.t), measured);
  obs.mode = config_.observation_mode;
  for (std::size_t i = 0; i < kRotors; ++i) obs.rotor_norm[i] = body_.rotor_speed[i] / airframe_.omega_max;
  prev_error_ = obs.e;
  return obs;
}

EnvStep AttitudeEnv::step(const Vec4& y_raw) {
  if (finished_) throw EpisodeFinished("step() called on a finished episode; call reset() first");

  EnvStep out;
  for (std::size_t i = 0; i < kRotors; ++i) out.y[i] = std::clamp(y_raw[i], 0.0, 1.0);

  const StepResult r = rotorlab::step(body_, out.y, airframe_);
  body_ = r.state;
  ++steps_;

  out.omega_measured = inject_gyro_noise(body_.omega_body, config_.gyro_noise_sigma, noise_rng_);
  out.setpoint = task_.setpoint_at(body_.t);
  out.obs = make_observation(out.omega_measured);
  out.reward = reward(out.obs.e, out.y, prev_y_, config_);
  prev_y_ = out.y;

  out.diverged = r.status == StepStatus::diverged;
  out.done = out.diverged || steps_ >= episode_steps_;
  finished_ = out.done;
  return out;
}

}  // namespace rotorlab

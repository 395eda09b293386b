#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rotorlab/dynamics.hpp"
#include "rotorlab/types.hpp"

namespace rotorlab {

enum class ObservationMode { error_delta, error_motor };
enum class TaskMode { continuous, episodic };

const char* to_string(ObservationMode mode);
const char* to_string(TaskMode mode);
ObservationMode parse_observation_mode(const std::string& s);
TaskMode parse_task_mode(const std::string& s);

/// Policy input: rate error and its one-step difference, both deg/s. In
/// error_motor mode the difference is replaced by normalized rotor speeds.
struct Observation {
  ObservationMode mode = ObservationMode::error_delta;
  Vec3 e{};
  Vec3 delta_e{};
  Vec4 rotor_norm{};

  std::size_t size() const { return dim(mode); }
  std::vector<double> flatten() const;
  void flatten_into(std::span<double> out) const;

  static std::size_t dim(ObservationMode mode) { return mode == ObservationMode::error_delta ? 6 : 7; }
};

struct TaskSegment {
  Vec3 setpoint{};
  double duration = 0.0;
};

struct TaskScript {
  std::vector<TaskSegment> segments;
  double total_time = 0.0;
  std::uint64_t seed = 0;

  Vec3 setpoint_at(double t) const;
  bool operator==(const TaskScript&) const = default;
};

inline bool operator==(const TaskSegment& a, const TaskSegment& b) {
  return a.setpoint == b.setpoint && a.duration == b.duration;
}

struct RewardBreakdown {
  double r_e = 0.0;
  double r_y = 0.0;
  double r_delta = 0.0;
  double total = 0.0;
};

struct EnvConfig {
  double alpha = 300.0;
  double beta = 0.5;
  double delta_y_max = 100.0 * 100.0;
  double output_scale = 1000.0;   // outputs are scaled by this before squaring Delta y
  double error_band = 25.0;       // deg/s
  double setpoint_bound = 400.0;  // deg/s
  std::array<double, 2> command_duration_range{0.1, 1.0};
  std::array<double, 2> idle_duration_range{0.2, 1.0};
  double episode_time = 30.0;     // s
  double gyro_noise_sigma = 5.0;  // deg/s
  ObservationMode observation_mode = ObservationMode::error_delta;
  TaskMode task_mode = TaskMode::continuous;

  void validate() const;
};

TaskScript sample_task(std::uint64_t seed, const EnvConfig& config);

Observation observe(const Vec3& prev_error, const Vec3& omega_star, const Vec3& omega_measured);

Vec3 inject_gyro_noise(const Vec3& omega_true, double sigma, std::mt19937_64& rng);

double reward_e(const Vec3& e);
double reward_y(const Vec4& y, double alpha);
double reward_delta(const Vec4& y, const Vec4& y_prev, const Vec3& e, const EnvConfig& config);
RewardBreakdown reward(const Vec3& e, const Vec4& y, const Vec4& y_prev, const EnvConfig& config);

struct EnvStep {
  Observation obs;
  RewardBreakdown reward;
  bool done = false;
  bool diverged = false;
  Vec3 setpoint{};
  Vec3 omega_measured{};
  Vec4 y{};
};

class EpisodeFinished : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Rate-tracking environment. Each instance owns its simulator and RNG
/// streams; nothing is shared between instances.
class AttitudeEnv {
 public:
  AttitudeEnv(AirframeModel airframe, EnvConfig config, std::uint64_t seed);

  /// Starts an episode on the next task drawn from this env's seed sequence.
  Observation reset();
  Observation reset(TaskScript task);

  EnvStep step(const Vec4& y);

  const TaskScript& task() const { return task_; }
  const BodyState& body() const { return body_; }
  const EnvConfig& config() const { return config_; }
  const AirframeModel& airframe() const { return airframe_; }
  std::size_t steps_taken() const { return steps_; }
  std::size_t episode_steps() const { return episode_steps_; }
  bool finished() const { return finished_; }
  std::size_t obs_dim() const { return Observation::dim(config_.observation_mode); }

 private:
  Observation make_observation(const Vec3& measured);

  AirframeModel airframe_;
  EnvConfig config_;
  std::mt19937_64 task_rng_;
  std::mt19937_64 noise_rng_;
  TaskScript task_;
  BodyState body_;
  Vec3 prev_error_{};
  Vec4 prev_y_{};
  std::size_t steps_ = 0;
  std::size_t episode_steps_ = 0;
  bool finished_ = true;
};

}  // namespace rotorlab

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rotorlab/control.hpp"
#include "rotorlab/dynamics.hpp"
#include "rotorlab/env.hpp"
#include "rotorlab/policy.hpp"

namespace rotorlab {

/// One commanded sample of a flight log: what the pilot asked for.
struct SetpointSample {
  double t = 0.0;
  Vec3 setpoint{};
  double throttle = 0.0;
};

using SetpointLog = std::vector<SetpointSample>;

struct FlightLogRecord {
  double t = 0.0;
  Vec3 setpoint{};
  Vec3 gyro{};
  Vec4 y{};
  Vec4 u{};
  double throttle = 0.0;
};

inline constexpr const char* kFlightLogHeader = "t,sp_r,sp_p,sp_y,gy_r,gy_p,gy_y,y0,y1,y2,y3,u0,u1,u2,u3,thr";

void write_flight_log_csv(std::ostream& os, std::span<const FlightLogRecord> log);
/// Reads setpoints from any CSV with columns t, sp_r, sp_p, sp_y and
/// optionally thr (default `default_throttle`). Other columns are ignored.
/// Throws InvalidInput with the offending line number.
SetpointLog read_setpoint_csv(std::istream& is, double default_throttle = 0.0);
void write_setpoint_csv(std::ostream& os, const SetpointLog& log);

/// Samples a task script every dt seconds at a constant throttle.
SetpointLog log_from_task(const TaskScript& task, double dt, double throttle = 0.0);

/// Roll, flip and Split-S, separated by level idle periods.
SetpointLog aerobatic_log(double dt = 0.001);

struct AxisMetrics {
  double mae = 0.0, mse = 0.0, iae = 0.0, ise = 0.0, itae = 0.0, itse = 0.0;
};

struct MetricsReport {
  std::array<AxisMetrics, kAxes> axis{};
  AxisMetrics average;
  std::size_t n_samples = 0;

  const AxisMetrics& operator[](Axis a) const { return axis[static_cast<std::size_t>(a)]; }
};

/// errors[k] = setpoint - gyro at times[k] (seconds from log start).
MetricsReport compute_metrics(std::span<const Vec3> errors, std::span<const double> times);
MetricsReport compute_metrics(std::span<const FlightLogRecord> log);

/// IAE = n * MAE and ISE = n * MSE for each axis. MAE and MSE are defined as
/// IAE / n and ISE / n, so this checks the report's internal consistency.
bool metric_identities_hold(const MetricsReport& report);

nlohmann::json metrics_to_json(const MetricsReport& report);

using Controller = std::variant<PolicyParams, PidGains>;

const char* controller_kind(const Controller& c);

struct ReplayOptions {
  double gyro_noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  double pid_integral_limit = 0.3;  // bound on |ki * integral| in mixer units
  bool nn_throttle_mix = true;      // false: u = y, as during training
};

struct ReplayResult {
  std::vector<FlightLogRecord> log;
  MetricsReport metrics;
  bool diverged = false;
  std::size_t diverged_at = 0;  // sample index, if diverged
};

/// Drives a fresh simulation from rest with the logged setpoint stream. Each
/// record holds the state the controller saw and the command it produced.
ReplayResult replay(const SetpointLog& setpoints, const Controller& controller, const AirframeModel& airframe,
                    const ReplayOptions& options = {});

struct Comparison {
  std::string label_a, label_b;
  ReplayResult a, b;
};

Comparison compare(const Controller& a, const Controller& b, const SetpointLog& setpoints,
                   const AirframeModel& airframe, const ReplayOptions& options = {});
Comparison compare(const PolicyParams& nn, const PidGains& pid, const SetpointLog& setpoints,
                   const AirframeModel& airframe, const ReplayOptions& options = {});
Comparison compare(const PidGains& pid, const PolicyParams& nn, const SetpointLog& setpoints,
                   const AirframeModel& airframe, const ReplayOptions& options = {});

/// Merged per-step trace for plotting: t, setpoint, then gyro/u of each side.
void write_comparison_csv(std::ostream& os, const Comparison& c);

struct TimingReport {
  double wcet_us = 0.0;
  double bcet_us = 0.0;
  double mean_us = 0.0;
  double median_us = 0.0;
  double variability_window = 0.0;
  std::size_t n_samples = 0;
  double timer_resolution_us = 0.0;
  bool low_confidence = false;  // clock resolution coarser than 10% of BCET
};

/// Smallest observable nonzero step of the monotonic clock.
double timer_resolution_us();

using InferenceFn = std::function<void(std::span<const double> in, std::span<double> out)>;

/// Times n single evaluations on uniform random inputs in [-range, range],
/// after `warmup` untimed ones.
TimingReport bench_inference(const InferenceFn& fn, std::size_t in_dim, std::size_t out_dim, std::size_t n = 5000,
                             std::size_t warmup = 500, std::uint64_t seed = 0, double range = 1000.0);

nlohmann::json timing_to_json(const TimingReport& report);

}  // namespace rotorlab

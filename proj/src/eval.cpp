#include "rotorlab/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <optional>
#include <limits>
#include <sstream>

namespace rotorlab {
namespace {

template <class T>
void write_row(std::ostream& os, const T& values, bool& first) {
  for (double v : values) {
    if (!first) os << ',';
    os << v;
    first = false;
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

AxisMetrics axis_metrics(std::span<const Vec3> errors, std::span<const double> times, std::size_t a) {
  AxisMetrics m;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const double e = errors[k][a];
    const double t = times[k] - times[0];
    m.iae += std::abs(e);
    m.ise += e * e;
    m.itae += t * std::abs(e);
    m.itse += t * e * e;
  }
  const auto n = static_cast<double>(errors.size());
  m.mae = m.iae / n;
  m.mse = m.ise / n;
  return m;
}

struct NnRunner {
  const PolicyParams& policy;
  Vec3 prev_error{};
  std::vector<double> obs;

  explicit NnRunner(const PolicyParams& p) : policy(p), obs(p.obs_dim()) {}

  Vec4 act(const Vec3& setpoint, const Vec3& gyro, const BodyState& body, const AirframeModel& airframe) {
    Observation o = observe(prev_error, setpoint, gyro);
    prev_error = o.e;
    o.mode = policy.obs_dim() == Observation::dim(ObservationMode::error_delta) ? ObservationMode::error_delta
                                                                                  : ObservationMode::error_motor;
    for (std::size_t i = 0; i < kRotors; ++i) o.rotor_norm[i] = body.rotor_speed[i] / airframe.omega_max;
    o.flatten_into(obs);
    return act_deterministic(policy, obs);
  }
};

}  // namespace

void write_flight_log_csv(std::ostream& os, std::span<const FlightLogRecord> log) {
  os << kFlightLogHeader << '\n';
  os.precision(17);
  for (const FlightLogRecord& r : log) {
    bool first = true;
    write_row(os, std::array<double, 1>{r.t}, first);
    write_row(os, r.setpoint, first);
    write_row(os, r.gyro, first);
    write_row(os, r.y, first);
    write_row(os, r.u, first);
    write_row(os, std::array<double, 1>{r.throttle}, first);
    os << '\n';
  }
}

SetpointLog read_setpoint_csv(std::istream& is, double default_throttle) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("line 1: empty setpoint log");
  const std::vector<std::string> header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
  for (const char* required : {"t", "sp_r", "sp_p", "sp_y"}) {
    if (!col.count(required)) throw InvalidInput(std::string("line 1: missing column '") + required + "'");
  }
  const bool has_thr = col.count("thr") > 0;

  SetpointLog log;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv(line);
    auto get = [&](const char* name) {
      const std::size_t k = col.at(name);
      if (k >= cells.size()) throw InvalidInput("line " + std::to_string(line_no) + ": missing value for '" + name + "'");
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[k], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[k].size() || !std::isfinite(v)) {
        throw InvalidInput("line " + std::to_string(line_no) + ": bad number '" + cells[k] + "' in column '" + name + "'");
      }
      return v;
    };
    SetpointSample s;
    s.t = get("t");
    s.setpoint = {get("sp_r"), get("sp_p"), get("sp_y")};
    s.throttle = has_thr ? get("thr") : default_throttle;
    if (!log.empty() && s.t <= log.back().t) {
      throw InvalidInput("line " + std::to_string(line_no) + ": time does not increase");
    }
    if (s.throttle < 0.0 || s.throttle > 1.0) throw InvalidInput("line " + std::to_string(line_no) + ": throttle outside [0,1]");
    log.push_back(s);
  }
  return log;
}

void write_setpoint_csv(std::ostream& os, const SetpointLog& log) {
  os << "t,sp_r,sp_p,sp_y,thr\n";
  os.precision(17);
  for (const SetpointSample& s : log) {
    os << s.t << ',' << s.setpoint[0] << ',' << s.setpoint[1] << ',' << s.setpoint[2] << ',' << s.throttle << '\n';
  }
}

SetpointLog log_from_task(const TaskScript& task, double dt, double throttle) {
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  const auto n = static_cast<std::size_t>(std::llround(task.total_time / dt));
  SetpointLog log(n);
  for (std::size_t k = 0; k < n; ++k) {
    log[k].t = static_cast<double>(k) * dt;
    log[k].setpoint = task.setpoint_at(log[k].t);
    log[k].throttle = throttle;
  }
  return log;
}

SetpointLog aerobatic_log(double dt) {
  struct Phase {
    double duration;
    Vec3 rate;
    double throttle;
  };
  // Rates in deg/s. Level flight at hover throttle between maneuvers,
  // reduced throttle while inverted or rotating.
  static const Phase phases[] = {
      {0.50, {0, 0, 0}, 0.5},
      {0.90, {400, 0, 0}, 0.3},    // roll: 360 deg
      {0.60, {0, 0, 0}, 0.5},
      {0.90, {0, 400, 0}, 0.3},    // flip: 360 deg
      {0.60, {0, 0, 0}, 0.5},
      {0.50, {360, 0, 0}, 0.3},    // Split-S: half roll to inverted
      {0.15, {0, 0, 0}, 0.3},
      {0.60, {0, 300, 0}, 0.4},    // then a half loop out
      {0.60, {0, 0, 0}, 0.5},
      {0.60, {0, 0, 200}, 0.5},    // yaw pirouette, 120 deg
      {0.50, {0, 0, 0}, 0.5},
  };
  TaskScript task;
  for (const Phase& p : phases) task.segments.push_back({p.rate, p.duration});
  for (const Phase& p : phases) task.total_time += p.duration;
  SetpointLog log = log_from_task(task, dt);
  double start = 0.0;
  std::size_t k = 0;
  for (const Phase& p : phases) {
    const double end = start + p.duration;
    for (; k < log.size() && log[k].t < end - 1e-12; ++k) log[k].throttle = p.throttle;
    start = end;
  }
  for (; k < log.size(); ++k) log[k].throttle = phases[std::size(phases) - 1].throttle;
  return log;
}

MetricsReport compute_metrics(std::span<const Vec3> errors, std::span<const double> times) {
  if (errors.empty()) throw InvalidInput("metrics need at least one sample");
  if (errors.size() != times.size()) throw InvalidInput("errors and timestamps differ in length");
  MetricsReport rep;
  rep.n_samples = errors.size();
  for (std::size_t a = 0; a < kAxes; ++a) rep.axis[a] = axis_metrics(errors, times, a);
  auto mean3 = [&](double AxisMetrics::*f) {
    return (rep.axis[0].*f + rep.axis[1].*f + rep.axis[2].*f) / 3.0;
  };
  rep.average = {mean3(&AxisMetrics::mae), mean3(&AxisMetrics::mse),  mean3(&AxisMetrics::iae),
                 mean3(&AxisMetrics::ise), mean3(&AxisMetrics::itae), mean3(&AxisMetrics::itse)};
  return rep;
}

MetricsReport compute_metrics(std::span<const FlightLogRecord> log) {
  std::vector<Vec3> errors(log.size());
  std::vector<double> times(log.size());
  for (std::size_t k = 0; k < log.size(); ++k) {
    for (std::size_t a = 0; a < kAxes; ++a) errors[k][a] = log[k].setpoint[a] - log[k].gyro[a];
    times[k] = log[k].t;
  }
  return compute_metrics(errors, times);
}

bool metric_identities_hold(const MetricsReport& r) {
  if (r.n_samples == 0) return false;
  const auto n = static_cast<double>(r.n_samples);
  for (const AxisMetrics& m : r.axis) {
    if (m.iae / n != m.mae || m.ise / n != m.mse) return false;
    // n * MAE reproduces IAE up to the rounding of one division and one product.
    if (std::abs(n * m.mae - m.iae) > 4.0 * std::numeric_limits<double>::epsilon() * m.iae) return false;
    if (std::abs(n * m.mse - m.ise) > 4.0 * std::numeric_limits<double>::epsilon() * m.ise) return false;
  }
  return true;
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
  auto one = [](const AxisMetrics& m) {
    return nlohmann::json{{"mae", m.mae}, {"mse", m.mse}, {"iae", m.iae}, {"ise", m.ise}, {"itae", m.itae}, {"itse", m.itse}};
  };
  return {{"n_samples", r.n_samples},
          {"roll", one(r.axis[0])},
          {"pitch", one(r.axis[1])},
          {"yaw", one(r.axis[2])},
          {"average", one(r.average)}};
}

const char* controller_kind(const Controller& c) { return std::holds_alternative<PolicyParams>(c) ? "nn" : "pid"; }

ReplayResult replay(const SetpointLog& setpoints, const Controller& controller, const AirframeModel& airframe,
                    const ReplayOptions& options) {
  airframe.validate();
  if (setpoints.empty()) throw InvalidInput("replay needs at least one setpoint sample");
  if (const auto* p = std::get_if<PolicyParams>(&controller)) {
    p->validate();
    if (p->act_dim() != kRotors) throw InvalidInput("policy has " + std::to_string(p->act_dim()) + " outputs, airframe has 4 rotors");
    if (p->obs_dim() != Observation::dim(ObservationMode::error_delta) &&
        p->obs_dim() != Observation::dim(ObservationMode::error_motor)) {
      throw InvalidInput("policy input width " + std::to_string(p->obs_dim()) + " matches no observation mode");
    }
  } else {
    std::get<PidGains>(controller).validate();
  }

  std::mt19937_64 noise_rng(options.noise_seed);
  ReplayResult res;
  res.log.reserve(setpoints.size());
  BodyState body;
  PidState pid_state;
  std::optional<NnRunner> nn;
  if (const auto* p = std::get_if<PolicyParams>(&controller)) nn.emplace(*p);

  for (std::size_t k = 0; k < setpoints.size(); ++k) {
    const SetpointSample& s = setpoints[k];
    FlightLogRecord rec;
    rec.t = s.t;
    rec.setpoint = s.setpoint;
    rec.throttle = s.throttle;
    rec.gyro = inject_gyro_noise(body.omega_body, options.gyro_noise_sigma, noise_rng);

    if (nn) {
      rec.y = nn->act(s.setpoint, rec.gyro, body, airframe);
      rec.u = options.nn_throttle_mix ? mix_throttle(rec.y, s.throttle).u : rec.y;
    } else {
      Vec3 error;
      for (std::size_t a = 0; a < kAxes; ++a) error[a] = s.setpoint[a] - rec.gyro[a];
      const PidOutput out = pid_step(std::get<PidGains>(controller), error, rec.gyro, pid_state, airframe.dt,
                                     options.pid_integral_limit);
      pid_state = out.state;
      for (std::size_t a = 0; a < kAxes; ++a) rec.y[a] = out.out[a];
      rec.y[3] = 0.0;
      rec.u = pid_mix(out.out, s.throttle, airframe);
    }
    res.log.push_back(rec);

    const StepResult r = step(body, rec.u, airframe);
    if (r.status == StepStatus::diverged) {
      res.diverged = true;
      res.diverged_at = k;
      break;
    }
    body = r.state;
  }
  res.metrics = compute_metrics(res.log);
  return res;
}

Comparison compare(const Controller& a, const Controller& b, const SetpointLog& setpoints, const AirframeModel& airframe,
                   const ReplayOptions& options) {
  Comparison c;
  c.label_a = controller_kind(a);
  c.label_b = controller_kind(b);
  if (c.label_a == c.label_b) throw InvalidInput("compare needs one NN and one PID controller");
  c.a = replay(setpoints, a, airframe, options);
  c.b = replay(setpoints, b, airframe, options);
  return c;
}

Comparison compare(const PolicyParams& nn, const PidGains& pid, const SetpointLog& setpoints,
                   const AirframeModel& airframe, const ReplayOptions& options) {
  return compare(Controller{nn}, Controller{pid}, setpoints, airframe, options);
}

Comparison compare(const PidGains& pid, const PolicyParams& nn, const SetpointLog& setpoints,
                   const AirframeModel& airframe, const ReplayOptions& options) {
  return compare(Controller{pid}, Controller{nn}, setpoints, airframe, options);
}

void write_comparison_csv(std::ostream& os, const Comparison& c) {
  const std::string& A = c.label_a;
  const std::string& B = c.label_b;
  os << "t,sp_r,sp_p,sp_y";
  for (const std::string* l : {&A, &B}) {
    os << ',' << *l << "_gy_r," << *l << "_gy_p," << *l << "_gy_y," << *l << "_u0," << *l << "_u1," << *l << "_u2," << *l
       << "_u3";
  }
  os << '\n';
  os.precision(17);
  const std::size_t n = std::max(c.a.log.size(), c.b.log.size());
  for (std::size_t k = 0; k < n; ++k) {
    const FlightLogRecord& ref = k < c.a.log.size() ? c.a.log[k] : c.b.log[k];
    bool first = true;
    write_row(os, std::array<double, 1>{ref.t}, first);
    write_row(os, ref.setpoint, first);
    for (const ReplayResult* r : {&c.a, &c.b}) {
      if (k < r->log.size()) {
        write_row(os, r->log[k].gyro, first);
        write_row(os, r->log[k].u, first);
      } else {
        os << ",,,,,,,";  // side diverged before this sample
      }
    }
    os << '\n';
  }
}

double timer_resolution_us() {
  using clock = std::chrono::steady_clock;
  auto best = clock::duration::max();
  for (int k = 0; k < 200; ++k) {
    const auto t0 = clock::now();
    auto t1 = clock::now();
    while (t1 == t0) t1 = clock::now();
    best = std::min(best, t1 - t0);
  }
  return std::chrono::duration<double, std::micro>(best).count();
}

TimingReport bench_inference(const InferenceFn& fn, std::size_t in_dim, std::size_t out_dim, std::size_t n,
                             std::size_t warmup, std::uint64_t seed, double range) {
  if (n == 0) throw InvalidInput("benchmark needs at least one sample");
  using clock = std::chrono::steady_clock;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<double> inputs((n + warmup) * in_dim);
  for (double& v : inputs) v = dist(rng);
  std::vector<double> out(out_dim);
  volatile double sink = 0.0;

  for (std::size_t k = 0; k < warmup; ++k) {
    fn({inputs.data() + (n + k) * in_dim, in_dim}, out);
    sink = sink + out[0];
  }
  std::vector<double> samples(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::span<const double> in(inputs.data() + k * in_dim, in_dim);
    const auto t0 = clock::now();
    fn(in, out);
    const auto t1 = clock::now();
    sink = sink + out[0];
    samples[k] = std::chrono::duration<double, std::micro>(t1 - t0).count();
  }

  TimingReport rep;
  rep.n_samples = n;
  rep.wcet_us = *std::max_element(samples.begin(), samples.end());
  rep.bcet_us = *std::min_element(samples.begin(), samples.end());
  double sum = 0.0;
  for (double s : samples) sum += s;
  rep.mean_us = sum / static_cast<double>(n);
  std::vector<double> sorted = samples;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
  rep.median_us = sorted[n / 2];
  rep.variability_window = rep.wcet_us > 0.0 ? (rep.wcet_us - rep.bcet_us) / rep.wcet_us : 0.0;
  rep.timer_resolution_us = timer_resolution_us();
  rep.low_confidence = rep.timer_resolution_us > 0.1 * rep.bcet_us;
  return rep;
}

nlohmann::json timing_to_json(const TimingReport& r) {
  return {{"n_samples", r.n_samples},       {"wcet_us", r.wcet_us},
          {"bcet_us", r.bcet_us},           {"mean_us", r.mean_us},
          {"median_us", r.median_us},       {"variability_window", r.variability_window},
          {"timer_resolution_us", r.timer_resolution_us}, {"low_confidence", r.low_confidence}};
}

}  // namespace rotorlab

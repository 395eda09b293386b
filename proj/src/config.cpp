#include "rotorlab/config.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "rotorlab/hash.hpp"

namespace rotorlab {
namespace {

using nlohmann::json;

// Line of the first occurrence of "key" after "section" in the source text.
std::size_t find_line(const std::string& text, const std::string& section, const std::string& key) {
  if (text.empty()) return 0;
  std::size_t pos = 0;
  if (!section.empty()) {
    pos = text.find("\"" + section + "\"");
    if (pos == std::string::npos) return 0;
  }
  if (!key.empty()) {
    const std::size_t k = text.find("\"" + key + "\"", pos);
    if (k == std::string::npos) return 0;
    pos = k;
  }
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Walks every field once; the same visit() drives dumping and loading.
struct Dumper {
  json out = json::object();
  json* cur = &out;

  void section(const char* name) {
    out[name] = json::object();
    cur = &out[name];
  }
  template <class T>
  void field(const char* name, T& v) {
    (*cur)[name] = to_json(v);
  }
  json to_json(const PidGains& g) {
    json j;
    for (Axis a : {Axis::roll, Axis::pitch, Axis::yaw}) {
      j[axis_name(a)] = {{"kp", g[a].kp}, {"ki", g[a].ki}, {"kd", g[a].kd}};
    }
    return j;
  }
  json to_json(const ObservationMode& m) { return to_string(m); }
  json to_json(const TaskMode& m) { return to_string(m); }
  template <class T>
  json to_json(const T& v) {
    return v;
  }
};

struct Loader {
  const json& in;
  const std::string& file;
  const std::string& text;
  const json* cur = nullptr;
  std::string sec;
  std::set<std::string> seen;

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(file, find_line(text, sec, key), msg);
  }

  void section(const char* name) {
    sec = name;
    cur = nullptr;
    if (in.contains(name)) {
      if (!in[name].is_object()) fail("", std::string("section '") + name + "' must be an object");
      cur = &in[name];
    }
  }

  template <class T>
  void field(const char* name, T& v) {
    seen.insert(sec + "." + name);
    if (!cur || !cur->contains(name)) return;
    const json& j = (*cur)[name];
    try {
      read(j, v, name);
    } catch (const json::exception& e) {
      fail(name, sec + "." + name + ": " + e.what());
    }
  }

  void number(const json& j, const char* name) const {
    if (!j.is_number()) fail(name, sec + "." + name + ": expected a number");
  }
  void read(const json& j, double& v, const char* name) {
    number(j, name);
    v = j.get<double>();
  }
  void read(const json& j, bool& v, const char* name) {
    if (!j.is_boolean()) fail(name, sec + "." + name + ": expected true or false");
    v = j.get<bool>();
  }
  void read(const json& j, int& v, const char* name) {
    if (!j.is_number_integer()) fail(name, sec + "." + name + ": expected an integer");
    v = j.get<int>();
  }
  void read(const json& j, std::size_t& v, const char* name) {
    if (!j.is_number_unsigned()) fail(name, sec + "." + name + ": expected a non-negative integer");
    v = j.get<std::size_t>();
  }
  void read(const json& j, std::string& v, const char* name) {
    if (!j.is_string()) fail(name, sec + "." + name + ": expected a string");
    v = j.get<std::string>();
  }
  template <std::size_t N>
  void read(const json& j, std::array<double, N>& v, const char* name) {
    if (!j.is_array() || j.size() != N) fail(name, sec + "." + name + ": expected an array of " + std::to_string(N) + " numbers");
    for (std::size_t k = 0; k < N; ++k) {
      if (!j[k].is_number()) fail(name, sec + "." + name + ": expected an array of numbers");
      v[k] = j[k].get<double>();
    }
  }
  void read(const json& j, std::vector<std::size_t>& v, const char* name) {
    if (!j.is_array()) fail(name, sec + "." + name + ": expected an array of layer widths");
    v.clear();
    for (const json& e : j) {
      if (!e.is_number_unsigned()) fail(name, sec + "." + name + ": layer widths must be positive integers");
      v.push_back(e.get<std::size_t>());
    }
  }
  void read(const json& j, ObservationMode& v, const char* name) {
    std::string s;
    read(j, s, name);
    try {
      v = parse_observation_mode(s);
    } catch (const std::exception& e) {
      fail(name, sec + "." + name + ": " + e.what());
    }
  }
  void read(const json& j, TaskMode& v, const char* name) {
    std::string s;
    read(j, s, name);
    try {
      v = parse_task_mode(s);
    } catch (const std::exception& e) {
      fail(name, sec + "." + name + ": " + e.what());
    }
  }
  void read(const json& j, PidGains& g, const char* name) {
    if (!j.is_object()) fail(name, sec + "." + name + ": expected an object with roll, pitch and yaw");
    for (auto it = j.begin(); it != j.end(); ++it) {
      Axis a;
      try {
        a = parse_axis(it.key());
      } catch (const std::exception&) {
        fail(it.key(), sec + "." + name + ": unknown axis '" + it.key() + "'");
      }
      if (!it->is_object()) fail(it.key(), sec + "." + name + "." + it.key() + ": expected {kp, ki, kd}");
      for (auto g_it = it->begin(); g_it != it->end(); ++g_it) {
        const std::string path = sec + "." + name + "." + it.key() + "." + g_it.key();
        if (!g_it->is_number()) fail(g_it.key(), path + ": expected a number");
        double& dst = g_it.key() == "kp" ? g[a].kp : g_it.key() == "ki" ? g[a].ki : g_it.key() == "kd" ? g[a].kd
                                                                                                        : (fail(g_it.key(), path + ": unknown gain"), g[a].kp);
        dst = g_it->get<double>();
      }
    }
  }

  void check_unknown() const {
    for (auto s = in.begin(); s != in.end(); ++s) {
      bool known_section = false;
      for (const char* n : {"airframe", "env", "ppo", "pid", "eval"}) known_section |= s.key() == n;
      if (!known_section) throw ConfigError(file, find_line(text, "", s.key()), "unknown section '" + s.key() + "'");
      for (auto f = s->begin(); f != s->end(); ++f) {
        if (!seen.count(s.key() + "." + f.key())) {
          throw ConfigError(file, find_line(text, s.key(), f.key()), "unknown key '" + s.key() + "." + f.key() + "'");
        }
      }
    }
  }
};

template <class V>
void visit(Config& c, V& v) {
  v.section("airframe");
  AirframeModel& a = c.airframe;
  v.field("inertia", a.inertia);
  v.field("arm_length", a.arm_length);
  v.field("roll_sign", a.roll_sign);
  v.field("pitch_sign", a.pitch_sign);
  v.field("spin", a.spin);
  v.field("k_thrust", a.k_thrust);
  v.field("k_drag", a.k_drag);
  v.field("omega_max", a.omega_max);
  v.field("rotor_kp", a.rotor_kp);
  v.field("rotor_ki", a.rotor_ki);
  v.field("rotor_inertia", a.rotor_inertia);
  v.field("dt", a.dt);
  v.field("max_body_rate", a.max_body_rate);

  v.section("env");
  EnvConfig& e = c.env;
  v.field("alpha", e.alpha);
  v.field("beta", e.beta);
  v.field("delta_y_max", e.delta_y_max);
  v.field("output_scale", e.output_scale);
  v.field("error_band", e.error_band);
  v.field("setpoint_bound", e.setpoint_bound);
  v.field("command_duration_range", e.command_duration_range);
  v.field("idle_duration_range", e.idle_duration_range);
  v.field("episode_time", e.episode_time);
  v.field("gyro_noise_sigma", e.gyro_noise_sigma);
  v.field("observation_mode", e.observation_mode);
  v.field("task_mode", e.task_mode);

  v.section("ppo");
  PpoConfig& p = c.ppo;
  v.field("seed", p.seed);
  v.field("n_seeds", p.n_seeds);
  v.field("total_steps", p.total_steps);
  v.field("horizon", p.horizon);
  v.field("stepsize", p.stepsize);
  v.field("epochs", p.epochs);
  v.field("minibatch_size", p.minibatch_size);
  v.field("gamma", p.gamma);
  v.field("lambda", p.lambda);
  v.field("clip_epsilon", p.clip_epsilon);
  v.field("anneal", p.anneal);
  v.field("entropy_coef", p.entropy_coef);
  v.field("value_coef", p.value_coef);
  v.field("reward_scale", p.reward_scale);
  v.field("normalize_rewards", p.normalize_rewards);
  v.field("reward_clip", p.reward_clip);
  v.field("select_window", p.select_window);
  v.field("adam_beta1", p.adam_beta1);
  v.field("adam_beta2", p.adam_beta2);
  v.field("adam_epsilon", p.adam_epsilon);
  v.field("hidden", p.network.hidden);
  v.field("obs_scale_error", p.network.obs_scale_error);
  v.field("obs_scale_other", p.network.obs_scale_other);
  v.field("init_log_std", p.network.init_log_std);
  v.field("output_gain", p.network.output_gain);
  v.field("output_bias", p.network.output_bias);

  v.section("pid");
  v.field("gains", c.pid.gains);
  ZnOptions& z = c.pid.zn;
  v.field("zn_kp_start", z.kp_start);
  v.field("zn_kp_limit", z.kp_limit);
  v.field("zn_sweep_factor", z.sweep_factor);
  v.field("zn_step_amplitude", z.step_amplitude);
  v.field("zn_throttle", z.throttle);
  v.field("zn_sim_time", z.sim_time);
  v.field("zn_min_periods", z.min_periods);
  v.field("zn_ratio_low", z.ratio_low);
  v.field("zn_ratio_high", z.ratio_high);
  v.field("zn_refine_iterations", z.refine_iterations);

  v.section("eval");
  EvalConfig& ev = c.eval;
  v.field("script", ev.script);
  v.field("default_throttle", ev.default_throttle);
  v.field("gyro_noise_sigma", ev.gyro_noise_sigma);
  v.field("noise_seed", ev.noise_seed);
  v.field("pid_integral_limit", ev.pid_integral_limit);
  v.field("nn_throttle_mix", ev.nn_throttle_mix);
  v.field("verify_probes", ev.verify_probes);
  v.field("bench_samples", ev.bench_samples);
  v.field("bench_warmup", ev.bench_warmup);
}

std::string line_prefix(const std::string& file, std::size_t line) {
  return line > 0 ? file + ":" + std::to_string(line) : file;
}

}  // namespace

ConfigError::ConfigError(std::string file, std::size_t line, const std::string& message)
    : std::runtime_error(line_prefix(file, line) + ": " + message), file_(std::move(file)), line_(line) {}

void Config::validate() const {
  airframe.validate();
  env.validate();
  ppo.validate();
  pid.gains.validate();
  if (!(eval.default_throttle >= 0.0 && eval.default_throttle <= 1.0)) throw InvalidInput("eval.default_throttle must be in [0,1]");
  if (!(eval.gyro_noise_sigma >= 0.0)) throw InvalidInput("eval.gyro_noise_sigma must be >= 0");
  if (!(eval.pid_integral_limit >= 0.0)) throw InvalidInput("eval.pid_integral_limit must be >= 0");
  if (eval.bench_samples == 0) throw InvalidInput("eval.bench_samples must be positive");
}

json config_to_json(const Config& config) {
  Config copy = config;
  Dumper d;
  visit(copy, d);
  return d.out;
}

Config config_from_json(const json& j, const std::string& file, const std::string& text) {
  if (!j.is_object()) throw ConfigError(file, 1, "config must be a JSON object");
  Config c;
  Loader l{j, file, text, nullptr, {}, {}};
  visit(c, l);
  l.check_unknown();
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    // Messages name the field as "section.key"; point at it when present.
    static const std::regex field(R"(^([a-z_]+)\.([a-z_]+))");
    const std::string msg = e.what();
    std::smatch m;
    const std::size_t line = std::regex_search(msg, m, field) ? find_line(text, m[1], m[2]) : 0;
    throw ConfigError(file, line, msg);
  }
  return c;
}

Config parse_config(const std::string& text, const std::string& file) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line =
        1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte > 0 ? byte - 1 : 0), '\n'));
    std::string msg = e.what();
    if (const auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ConfigError(file, line, msg);
  }
  return config_from_json(j, file, text);
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string dump_config(const Config& config) { return config_to_json(config).dump(2) + "\n"; }

std::string reward_config_hash(const EnvConfig& env) {
  Config c;
  c.env = env;
  return sha256_hex(config_to_json(c)["env"].dump());
}

std::string config_hash(const Config& config) { return sha256_hex(config_to_json(config).dump()); }

}  // namespace rotorlab

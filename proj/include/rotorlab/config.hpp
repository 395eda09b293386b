#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "rotorlab/control.hpp"
#include "rotorlab/dynamics.hpp"
#include "rotorlab/env.hpp"
#include "rotorlab/ppo.hpp"

namespace rotorlab {

struct PidConfig {
  PidGains gains = PidGains::reference();
  ZnOptions zn;
};

struct EvalConfig {
  std::string script;               // setpoint CSV; empty selects the bundled aerobatic log
  double default_throttle = 0.5;    // for setpoint logs without a thr column
  double gyro_noise_sigma = 0.0;    // replay noise, off by default
  std::uint64_t noise_seed = 0;
  double pid_integral_limit = 0.3;
  bool nn_throttle_mix = true;
  std::size_t verify_probes = 10000;
  std::size_t bench_samples = 5000;
  std::size_t bench_warmup = 500;
};

/// Everything a run depends on. One JSON file with the sections airframe,
/// env, ppo, pid and eval; missing fields keep their defaults.
struct Config {
  AirframeModel airframe;
  EnvConfig env;
  PpoConfig ppo;
  PidConfig pid;
  EvalConfig eval;

  void validate() const;
};

/// "file:line: message". `line` is 0 when no position is known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string file, std::size_t line, const std::string& message);
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

nlohmann::json config_to_json(const Config& config);
/// `text` is the source the JSON came from, used for line numbers.
Config config_from_json(const nlohmann::json& j, const std::string& file = "<config>", const std::string& text = "");
Config parse_config(const std::string& text, const std::string& file = "<config>");
Config load_config(const std::filesystem::path& path);
std::string dump_config(const Config& config);

/// Digest of the reward-relevant env section, stored in checkpoints.
std::string reward_config_hash(const EnvConfig& env);
std::string config_hash(const Config& config);

}  // namespace rotorlab

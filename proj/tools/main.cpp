// rotorlab command-line front end.
#include <dlfcn.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "rotorlab/checkpoint.hpp"
#include "rotorlab/codegen.hpp"
#include "rotorlab/config.hpp"
#include "rotorlab/eval.hpp"
#include "rotorlab/hash.hpp"
#include "rotorlab/manifest.hpp"
#include "rotorlab/ppo.hpp"

namespace fs = std::filesystem;
using namespace rotorlab;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> argv;
};

// Failure with a category for the one-line error report.
struct CliError : std::runtime_error {
  std::string kind;
  CliError(std::string k, const std::string& msg) : std::runtime_error(msg), kind(std::move(k)) {}
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError("io", "cannot read " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& data) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw CliError("io", "cannot write " + p.string());
  out << data;
}

// A config file, or a manifest whose embedded config is reused.
Config resolve_config(const Common& c) {
  Config cfg;
  if (!c.config_path.empty()) {
    const std::string text = read_file(c.config_path);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error&) {
      return parse_config(text, c.config_path);  // rethrows with file:line
    }
    if (j.is_object() && j.value("format", "") == "rotorlab-manifest") {
      cfg = config_from_json(j.at("config"), c.config_path);
      if (!c.seed && j.contains("seeds") && !j["seeds"].empty()) cfg.ppo.seed = j["seeds"][0].get<std::uint64_t>();
    } else {
      cfg = config_from_json(j, c.config_path, text);
    }
  }
  if (c.seed) cfg.ppo.seed = *c.seed;
  return cfg;
}

RunManifest start_manifest(const std::string& sub, const Common& c, const Config& cfg) {
  RunManifest m;
  m.subcommand = sub;
  m.argv = c.argv;
  m.config = config_to_json(cfg);
  m.config_hash = config_hash(cfg);
  m.started = utc_timestamp();
  if (!c.config_path.empty()) m.add_input(c.config_path);
  return m;
}

void finish_manifest(RunManifest& m, const Common& c) {
  m.finished = utc_timestamp();
  const fs::path p = fs::path(c.out_dir) / (m.subcommand + "_manifest.json");
  write_manifest(m, p);
  std::cerr << "manifest: " << p.string() << '\n';
}

Checkpoint read_checkpoint(const std::string& path, RunManifest& m) {
  if (path.empty()) throw CliError("usage", "--checkpoint is required");
  Checkpoint ck = load_checkpoint(path);
  m.add_input(path);
  return ck;
}

PidGains read_gains(const std::string& path, const Config& cfg, RunManifest& m) {
  PidGains g = cfg.pid.gains;
  if (path.empty()) return g;
  const json j = json::parse(read_file(path));
  const json& src = j.contains("gains") ? j["gains"] : j;
  for (Axis a : {Axis::roll, Axis::pitch, Axis::yaw}) {
    if (!src.contains(axis_name(a))) continue;
    const json& ax = src[axis_name(a)];
    g[a] = {ax.at("kp").get<double>(), ax.at("ki").get<double>(), ax.at("kd").get<double>()};
  }
  g.validate();
  m.add_input(path);
  return g;
}

SetpointLog read_log(const std::string& flag, const Config& cfg, RunManifest& m) {
  const std::string path = flag.empty() ? cfg.eval.script : flag;
  if (path.empty()) return aerobatic_log(cfg.airframe.dt);
  std::ifstream in(path);
  if (!in) throw CliError("io", "cannot read " + path);
  SetpointLog log;
  try {
    log = read_setpoint_csv(in, cfg.eval.default_throttle);
  } catch (const InvalidInput& e) {
    throw CliError("log", path + ":" + e.what());
  }
  m.add_input(path);
  return log;
}

ReplayOptions replay_options(const Config& cfg) {
  ReplayOptions o;
  o.gyro_noise_sigma = cfg.eval.gyro_noise_sigma;
  o.noise_seed = cfg.eval.noise_seed;
  o.pid_integral_limit = cfg.eval.pid_integral_limit;
  o.nn_throttle_mix = cfg.eval.nn_throttle_mix;
  return o;
}

void print_metrics(const std::string& label, const ReplayResult& r) {
  std::printf("%s: %zu samples%s\n", label.c_str(), r.metrics.n_samples, r.diverged ? " (DIVERGED)" : "");
  std::printf("  %-6s %14s %14s %14s %14s\n", "metric", "roll", "pitch", "yaw", "average");
  const std::pair<const char*, double AxisMetrics::*> rows[] = {{"MAE", &AxisMetrics::mae}, {"MSE", &AxisMetrics::mse},
                                                               {"IAE", &AxisMetrics::iae}, {"ISE", &AxisMetrics::ise},
                                                               {"ITAE", &AxisMetrics::itae}, {"ITSE", &AxisMetrics::itse}};
  for (const auto& [name, f] : rows) {
    std::printf("  %-6s %14.6g %14.6g %14.6g %14.6g\n", name, r.metrics.axis[0].*f, r.metrics.axis[1].*f,
                r.metrics.axis[2].*f, r.metrics.average.*f);
  }
}

void write_curve(const fs::path& p, const std::vector<EpisodeRecord>& curve) {
  std::ostringstream os;
  os << "episode,cumulative_reward,steps\n";
  os.precision(17);
  for (const EpisodeRecord& e : curve) os << e.episode << ',' << e.cumulative_reward << ',' << e.steps << '\n';
  write_file(p, os.str());
}

// ---------------------------------------------------------------------------

int cmd_config(const Common& c, bool dump_defaults) {
  const Config cfg = dump_defaults ? Config{} : resolve_config(c);
  std::cout << dump_config(cfg);
  return 0;
}

int cmd_train(const Common& c, std::optional<std::uint64_t> total, std::optional<std::size_t> n_seeds, bool quiet) {
  Config cfg = resolve_config(c);
  if (total) cfg.ppo.total_steps = *total;
  if (n_seeds) cfg.ppo.n_seeds = *n_seeds;
  cfg.validate();
  RunManifest m = start_manifest("train", c, cfg);
  m.config = config_to_json(cfg);
  m.config_hash = config_hash(cfg);
  const fs::path out(c.out_dir);
  fs::create_directories(out);

  const std::string rhash = reward_config_hash(cfg.env);
  std::vector<TrainingRun> runs;
  json seeds = json::array();
  for (std::size_t k = 0; k < cfg.ppo.n_seeds; ++k) {
    const std::uint64_t seed = cfg.ppo.seed + k;
    m.seeds.push_back(seed);
    std::size_t iter = 0;
    TrainingLog log;
    if (!quiet) {
      log = [&](const std::string& line) {
        if (line.rfind("iter", 0) != 0 || iter++ % 10 == 0) std::cerr << "[seed " << seed << "] " << line << '\n';
      };
    }
    runs.push_back(train(seed, cfg.airframe, cfg.env, cfg.ppo, rhash, log));
    const TrainingRun& r = runs.back();
    const fs::path ck = out / ("checkpoint_seed" + std::to_string(seed) + ".json");
    save_checkpoint(r.checkpoint, ck);
    write_curve(out / ("reward_curve_seed" + std::to_string(seed) + ".csv"), r.curve);
    m.add_output(ck);
    m.add_output(out / ("reward_curve_seed" + std::to_string(seed) + ".csv"));
    seeds.push_back({{"seed", seed},
                     {"episodes", r.curve.size()},
                     {"final_window_mean", final_window_mean(r.curve, cfg.ppo.select_window)},
                     {"checkpoint_sha256", m.outputs[m.outputs.size() - 2].sha256}});
  }
  const std::size_t best = select_best(runs, cfg.ppo.select_window);
  save_checkpoint(runs[best].checkpoint, out / "checkpoint.json");
  write_curve(out / "reward_curve.csv", runs[best].curve);
  m.add_output(out / "checkpoint.json");
  m.add_output(out / "reward_curve.csv");
  m.results = {{"runs", seeds}, {"best_seed", runs[best].seed}, {"checkpoint_sha256", m.outputs[m.outputs.size() - 2].sha256}};
  std::printf("best seed %llu (final-window mean %.6g over %zu episodes)\n",
              static_cast<unsigned long long>(runs[best].seed), final_window_mean(runs[best].curve, cfg.ppo.select_window),
              runs[best].curve.size());
  std::printf("checkpoint %s sha256 %s\n", (out / "checkpoint.json").string().c_str(), m.results["checkpoint_sha256"].get<std::string>().c_str());
  finish_manifest(m, c);
  return 0;
}

int cmd_tune_pid(const Common& c, const std::string& axis_arg) {
  const Config cfg = resolve_config(c);
  RunManifest m = start_manifest("tune-pid", c, cfg);
  std::vector<Axis> axes;
  if (axis_arg == "all") {
    axes = {Axis::roll, Axis::pitch, Axis::yaw};
  } else {
    axes = {parse_axis(axis_arg)};
  }
  PidGains gains = cfg.pid.gains;
  json out_json;
  std::printf("%-6s %12s %12s %12s %12s %12s\n", "axis", "Ku", "Tu [s]", "kp", "ki", "kd");
  for (Axis a : axes) {
    const ZnResult r = zn_tune(cfg.airframe, a, cfg.pid.zn);
    gains[a] = r.gains;
    std::printf("%-6s %12.6g %12.6g %12.6g %12.6g %12.6g\n", axis_name(a), r.ultimate_gain, r.ultimate_period, r.gains.kp,
                r.gains.ki, r.gains.kd);
    out_json[axis_name(a)] = {{"kp", r.gains.kp},
                              {"ki", r.gains.ki},
                              {"kd", r.gains.kd},
                              {"ultimate_gain", r.ultimate_gain},
                              {"ultimate_period", r.ultimate_period},
                              {"trials", r.trials}};
  }
  for (Axis a : {Axis::roll, Axis::pitch, Axis::yaw}) {
    if (!out_json.contains(axis_name(a))) out_json[axis_name(a)] = {{"kp", gains[a].kp}, {"ki", gains[a].ki}, {"kd", gains[a].kd}};
  }
  const fs::path p = fs::path(c.out_dir) / "pid_gains.json";
  write_file(p, out_json.dump(2) + "\n");
  m.add_output(p);
  m.results = out_json;
  finish_manifest(m, c);
  return 0;
}

int cmd_export(const Common& c, const std::string& ckpt, const std::string& src_path, const std::string& weights_path,
               std::optional<std::size_t> verify, const std::string& symbol) {
  const Config cfg = resolve_config(c);
  RunManifest m = start_manifest("export", c, cfg);
  const Checkpoint ck = read_checkpoint(ckpt, m);
  const FrozenGraph frozen = freeze(ck);
  OptimizeStats st;
  const FrozenGraph opt = optimize(frozen, &st);
  std::printf("frozen    %zu nodes, %zu constants, %zu bytes, hash %s\n", st.nodes_before, st.constants_before,
              st.bytes_before, frozen.hash.c_str());
  std::printf("optimized %zu nodes, %zu constants, %zu bytes, hash %s\n", st.nodes_after, st.constants_after,
              st.bytes_after, opt.hash.c_str());
  std::printf("neurons removed %zu, outputs stubbed %zu\n", st.neurons_removed, st.outputs_stubbed);
  m.results = {{"frozen_hash", frozen.hash},       {"optimized_hash", opt.hash},
               {"bytes_before", st.bytes_before}, {"bytes_after", st.bytes_after},
               {"constants", st.constants_after}};

  const EmittedArtifact art = emit_source(opt, symbol);
  if (!src_path.empty()) {
    write_file(src_path, art.source);
    m.add_output(src_path);
    std::printf("source  %s (%zu weight constants)\n", src_path.c_str(), art.weight_constants);
  }
  if (!weights_path.empty()) {
    write_file(weights_path, std::string(art.weights_blob.begin(), art.weights_blob.end()));
    m.add_output(weights_path);
    std::printf("weights %s (%zu bytes)\n", weights_path.c_str(), art.weights_blob.size());
  }
  const std::size_t probes = verify.value_or(cfg.eval.verify_probes);
  const EquivalenceReport rep = verify_equivalence(opt, ck, probes, cfg.ppo.seed);
  std::printf("verify  %s\n", rep.summary().c_str());
  m.results["verify"] = {{"probes", rep.probes}, {"max_abs_error", rep.max_abs_error}, {"passed", rep.passed}, {"vacuous", rep.vacuous}};
  finish_manifest(m, c);
  if (!rep.passed) throw CliError("verify", rep.summary());
  return 0;
}

int cmd_replay(const Common& c, const std::string& ckpt, bool use_pid, const std::string& gains_path,
               const std::string& log_path) {
  const Config cfg = resolve_config(c);
  RunManifest m = start_manifest("replay", c, cfg);
  if (use_pid == !ckpt.empty()) throw CliError("usage", "replay needs exactly one of --checkpoint or --pid");
  const SetpointLog log = read_log(log_path, cfg, m);
  const Controller ctl = use_pid ? Controller{read_gains(gains_path, cfg, m)} : Controller{read_checkpoint(ckpt, m).policy};
  const ReplayResult r = replay(log, ctl, cfg.airframe, replay_options(cfg));
  print_metrics(controller_kind(ctl), r);

  const fs::path out(c.out_dir);
  std::ostringstream csv;
  write_flight_log_csv(csv, r.log);
  write_file(out / "flight_log.csv", csv.str());
  json mj = metrics_to_json(r.metrics);
  mj["controller"] = controller_kind(ctl);
  mj["diverged"] = r.diverged;
  mj["identities_hold"] = metric_identities_hold(r.metrics);
  write_file(out / "metrics.json", mj.dump(2) + "\n");
  m.add_output(out / "flight_log.csv");
  m.add_output(out / "metrics.json");
  m.results = mj;
  finish_manifest(m, c);
  return 0;
}

int cmd_compare(const Common& c, const std::string& ckpt, const std::string& gains_path, const std::string& log_path) {
  const Config cfg = resolve_config(c);
  RunManifest m = start_manifest("compare", c, cfg);
  const Checkpoint ck = read_checkpoint(ckpt, m);
  const PidGains gains = read_gains(gains_path, cfg, m);
  const SetpointLog log = read_log(log_path, cfg, m);
  const Comparison cmp = compare(ck.policy, gains, log, cfg.airframe, replay_options(cfg));
  print_metrics(cmp.label_a, cmp.a);
  print_metrics(cmp.label_b, cmp.b);
  const double nn = cmp.a.metrics.average.mae, pid = cmp.b.metrics.average.mae;
  std::printf("average MAE: nn %.6g, pid %.6g (%s)\n", nn, pid, nn <= pid ? "nn better or equal" : "pid better");

  const fs::path out(c.out_dir);
  std::ostringstream csv;
  write_comparison_csv(csv, cmp);
  write_file(out / "compare.csv", csv.str());
  json j = {{"nn", metrics_to_json(cmp.a.metrics)}, {"pid", metrics_to_json(cmp.b.metrics)}};
  j["nn"]["diverged"] = cmp.a.diverged;
  j["pid"]["diverged"] = cmp.b.diverged;
  write_file(out / "compare.json", j.dump(2) + "\n");
  m.add_output(out / "compare.csv");
  m.add_output(out / "compare.json");
  m.results = j;
  finish_manifest(m, c);
  return 0;
}

using ArtifactFn = void (*)(const float*, float*);

int cmd_bench(const Common& c, const std::string& ckpt, const std::string& artifact, const std::string& symbol,
              std::optional<std::size_t> samples) {
  const Config cfg = resolve_config(c);
  RunManifest m = start_manifest("bench", c, cfg);
  const Checkpoint ck = read_checkpoint(ckpt, m);
  const std::size_t n = samples.value_or(cfg.eval.bench_samples);
  const std::size_t warm = cfg.eval.bench_warmup;
  const std::uint64_t seed = cfg.ppo.seed;
  const std::size_t in_dim = ck.policy.obs_dim(), out_dim = ck.policy.act_dim();

  const FrozenGraph frozen = freeze(ck);
  const FrozenGraph opt = optimize(frozen);
  std::vector<std::pair<std::string, TimingReport>> reports;
  reports.emplace_back("nn_reference", bench_inference(
      [&](std::span<const double> in, std::span<double> out) {
        const Vec4 y = act_deterministic(ck.policy, in);
        std::copy(y.begin(), y.end(), out.begin());
      }, in_dim, out_dim, n, warm, seed));
  reports.emplace_back("nn_frozen", bench_inference(
      [&](std::span<const double> in, std::span<double> out) { frozen.evaluate(in, out); }, in_dim, out_dim, n, warm, seed));
  reports.emplace_back("nn_optimized", bench_inference(
      [&](std::span<const double> in, std::span<double> out) { opt.evaluate(in, out); }, in_dim, out_dim, n, warm, seed));

  void* handle = nullptr;
  if (!artifact.empty()) {
    handle = dlopen(fs::absolute(artifact).c_str(), RTLD_NOW | RTLD_LOCAL);
    if (!handle) throw CliError("artifact", dlerror());
    auto fn = reinterpret_cast<ArtifactFn>(dlsym(handle, symbol.c_str()));
    if (!fn) throw CliError("artifact", "symbol '" + symbol + "' not found in " + artifact);
    m.add_input(artifact);
    reports.emplace_back("nn_emitted", bench_inference(
        [&](std::span<const double> in, std::span<double> out) {
          float fin[16], fout[16];
          for (std::size_t k = 0; k < in.size(); ++k) fin[k] = static_cast<float>(in[k]);
          fn(fin, fout);
          for (std::size_t k = 0; k < out.size(); ++k) out[k] = fout[k];
        }, in_dim, out_dim, n, warm, seed));
  }
  PidState pid_state;
  const PidGains gains = cfg.pid.gains;
  reports.emplace_back("pid", bench_inference(
      [&](std::span<const double> in, std::span<double> out) {
        const Vec3 e{in[0], in[1], in[2]}, meas{in[3], in[4], in[5]};
        const PidOutput o = pid_step(gains, e, meas, pid_state, cfg.airframe.dt, cfg.eval.pid_integral_limit);
        const Vec4 u = pid_mix(o.out, 0.5, cfg.airframe);
        std::copy(u.begin(), u.end(), out.begin());
      }, 6, 4, n, warm, seed));
  if (handle) dlclose(handle);

  std::printf("%-14s %10s %10s %10s %10s %8s %s\n", "controller", "bcet_us", "mean_us", "median_us", "wcet_us", "window", "");
  json j = json::object();
  for (const auto& [name, r] : reports) {
    std::printf("%-14s %10.4f %10.4f %10.4f %10.4f %8.4f %s\n", name.c_str(), r.bcet_us, r.mean_us, r.median_us, r.wcet_us,
                r.variability_window, r.low_confidence ? "low-confidence" : "");
    j[name] = timing_to_json(r);
  }
  auto find = [&](const std::string& name) -> const TimingReport& {
    for (const auto& [k, r] : reports) {
      if (k == name) return r;
    }
    throw CliError("bench", "missing report " + name);
  };
  const TimingReport& pid = find("pid");
  const TimingReport& nn = !artifact.empty() ? find("nn_emitted") : find("nn_reference");
  j["nn_pid_wcet_ratio"] = nn.wcet_us / pid.wcet_us;
  j["nn_pid_mean_ratio"] = nn.mean_us / pid.mean_us;
  j["optimized_minus_frozen_mean_us"] = find("nn_optimized").mean_us - find("nn_frozen").mean_us;
  std::printf("nn/pid WCET ratio %.3g, mean ratio %.3g; optimized - frozen mean %.4f us\n", j["nn_pid_wcet_ratio"].get<double>(),
              j["nn_pid_mean_ratio"].get<double>(), j["optimized_minus_frozen_mean_us"].get<double>());
  const fs::path p = fs::path(c.out_dir) / "bench.json";
  write_file(p, j.dump(2) + "\n");
  m.add_output(p);
  m.results = j;
  finish_manifest(m, c);
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotorlab: quadcopter attitude-control lab (train, tune, export, replay, compare, bench)"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  for (int k = 0; k < argc; ++k) common.argv.emplace_back(argv[k]);
  app.add_option("--config", common.config_path, "JSON config file (sections airframe, env, ppo, pid, eval), or a run manifest");
  app.add_option("--seed", common.seed, "base seed (overrides ppo.seed)");
  app.add_option("--out", common.out_dir, "output directory")->capture_default_str();

  auto* cfg_cmd = app.add_subcommand("config", "print the resolved configuration");
  bool dump_defaults = false;
  cfg_cmd->add_flag("--dump-defaults", dump_defaults, "print the built-in defaults");

  auto* train_cmd = app.add_subcommand("train", "train n_seeds policies with PPO and keep the best");
  std::optional<std::uint64_t> total;
  std::optional<std::size_t> n_seeds;
  bool quiet = false;
  train_cmd->add_option("--total-steps", total, "environment steps per seed");
  train_cmd->add_option("--n-seeds", n_seeds, "number of seeds");
  train_cmd->add_flag("--quiet", quiet, "no progress log");
  train_cmd->footer(
      "Writes checkpoint.json (best seed), checkpoint_seed<N>.json, reward_curve.csv and\n"
      "reward_curve_seed<N>.csv (columns episode,cumulative_reward,steps) and train_manifest.json.\n"
      "Checkpoints are JSON: {format, version, obs_dim, act_dim, input_scale, layers:[{rows, cols,\n"
      "weights (row-major), bias, activation}], log_std, value, metadata{seed, training_steps,\n"
      "reward_config_hash}}.");

  auto* tune_cmd = app.add_subcommand("tune-pid", "Ziegler-Nichols tuning on the simulated airframe");
  std::string axis = "all";
  tune_cmd->add_option("--axis", axis, "roll, pitch, yaw or all")->capture_default_str();
  tune_cmd->footer("Writes pid_gains.json: {roll|pitch|yaw: {kp, ki, kd, ultimate_gain, ultimate_period}}.");

  auto* export_cmd = app.add_subcommand("export", "freeze, optimize and emit a checkpoint as C source");
  std::string ckpt, emit_src, emit_weights, symbol = "rotorlab_policy";
  std::optional<std::size_t> verify;
  export_cmd->add_option("--checkpoint", ckpt, "checkpoint JSON")->required();
  export_cmd->add_option("--emit-source", emit_src, "write the C99 source here");
  export_cmd->add_option("--emit-weights", emit_weights, "write the binary weights file here");
  export_cmd->add_option("--verify", verify, "equivalence probes (default eval.verify_probes)");
  export_cmd->add_option("--symbol", symbol, "name of the emitted function")->capture_default_str();
  export_cmd->footer(
      "Weights file, little-endian: u32 magic 0x42574c52, u32 version 1, u32 obs_dim, u32 act_dim;\n"
      "u32 output count, then per output {i32 source (-1 = constant), f32 constant};\n"
      "u32 node count, then per node {u32 op (1 scale, 2 matmul, 3 bias_add, 4 affine, 5 tanh),\n"
      "u32 rows, u32 cols, u32 n_weights, u32 n_bias, f32 weights (row-major), f32 bias}.");

  auto* replay_cmd = app.add_subcommand("replay", "replay a setpoint log through one controller");
  bool use_pid = false;
  std::string gains_path, log_path;
  replay_cmd->add_option("--checkpoint", ckpt, "NN controller checkpoint");
  replay_cmd->add_flag("--pid", use_pid, "use the PID controller instead");
  replay_cmd->add_option("--pid-gains", gains_path, "gains JSON (as written by tune-pid); default pid.gains");
  replay_cmd->add_option("--log", log_path, "setpoint CSV (t,sp_r,sp_p,sp_y[,thr]); default: bundled aerobatic log");
  replay_cmd->footer("Writes flight_log.csv (" + std::string(kFlightLogHeader) + ") and metrics.json.");

  auto* compare_cmd = app.add_subcommand("compare", "replay one log through the NN and the PID controller");
  compare_cmd->add_option("--checkpoint", ckpt, "NN controller checkpoint")->required();
  compare_cmd->add_option("--pid-gains", gains_path, "gains JSON; default pid.gains");
  compare_cmd->add_option("--log", log_path, "setpoint CSV; default: bundled aerobatic log");
  compare_cmd->footer("Writes compare.csv (merged trace) and compare.json (both metric reports).");

  auto* bench_cmd = app.add_subcommand("bench", "execution-time benchmark (WCET, BCET, variability window)");
  std::string artifact;
  std::optional<std::size_t> samples;
  bench_cmd->add_option("--checkpoint", ckpt, "NN controller checkpoint")->required();
  bench_cmd->add_option("--artifact", artifact, "shared library compiled from the emitted source");
  bench_cmd->add_option("--symbol", symbol, "function name in the artifact")->capture_default_str();
  bench_cmd->add_option("--samples", samples, "timed evaluations (default eval.bench_samples)");
  bench_cmd->footer("Writes bench.json.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "rotorlab: error: usage: " << one_line(e.what()) << '\n';
    std::cerr << app.help();
    return 2;
  }

  try {
    if (!common.out_dir.empty()) fs::create_directories(common.out_dir);
    if (cfg_cmd->parsed()) return cmd_config(common, dump_defaults);
    if (train_cmd->parsed()) return cmd_train(common, total, n_seeds, quiet);
    if (tune_cmd->parsed()) return cmd_tune_pid(common, axis);
    if (export_cmd->parsed()) return cmd_export(common, ckpt, emit_src, emit_weights, verify, symbol);
    if (replay_cmd->parsed()) return cmd_replay(common, ckpt, use_pid, gains_path, log_path);
    if (compare_cmd->parsed()) return cmd_compare(common, ckpt, gains_path, log_path);
    if (bench_cmd->parsed()) return cmd_bench(common, ckpt, artifact, symbol, samples);
  } catch (const CliError& e) {
    std::cerr << "rotorlab: error: " << e.kind << ": " << one_line(e.what()) << '\n';
    return e.kind == "usage" ? 2 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "rotorlab: error: config: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const CheckpointError& e) {
    std::cerr << "rotorlab: error: checkpoint: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const ZnTuneError& e) {
    std::cerr << "rotorlab: error: tune: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "rotorlab: error: runtime: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 2;
}

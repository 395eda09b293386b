#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "rotorlab/checkpoint.hpp"
#include "rotorlab/dynamics.hpp"
#include "rotorlab/env.hpp"
#include "rotorlab/policy.hpp"

namespace rotorlab {

/// PPO hyperparameters. Defaults follow the usual continuous-control
/// settings (gamma 0.99, lambda 0.95, clip 0.2, horizon 2048, minibatch 64,
/// 10 epochs, Adam 3e-4 annealed linearly to zero).
struct PpoConfig {
  std::size_t horizon = 2048;
  double stepsize = 3e-4;
  std::size_t epochs = 10;
  std::size_t minibatch_size = 64;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_epsilon = 0.2;
  bool anneal = true;
  std::uint64_t total_steps = 200000;
  std::size_t n_seeds = 3;
  std::uint64_t seed = 1;         // runs use seed, seed + 1, ...
  double entropy_coef = 0.0;
  double value_coef = 1.0;
  double reward_scale = 1.0;      // fixed multiplier on env rewards before advantage estimation
  bool normalize_rewards = true;  // divide by a running std of the discounted return
  double reward_clip = 10.0;      // bound on normalized rewards (0 disables)
  std::size_t select_window = 10; // episodes averaged by select_best
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  NetworkConfig network;

  void validate() const;
};

/// One horizon of experience. Per-step arrays are aligned; observations and
/// raw actions are stored row-major.
struct RolloutBatch {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::vector<double> observations;
  std::vector<double> raw_actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;  // already scaled, truncation bootstrap folded in
  std::vector<double> values;
  std::vector<double> dones;    // 1 if no bootstrap across this step's successor
  double bootstrap_value = 0.0; // V of the state after the last step
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return log_probs.size(); }
  std::span<const double> obs(std::size_t t) const { return {observations.data() + t * obs_dim, obs_dim}; }
  std::span<const double> action(std::size_t t) const { return {raw_actions.data() + t * act_dim, act_dim}; }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t),
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, returns = A + V.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const double> dones, double bootstrap_value, double gamma, double lambda);

/// In-place standardization to mean 0, std 1 (population std).
void normalize_advantages(std::span<double> adv);

struct LossTerms {
  double policy_loss = 0.0;  // -mean(min(rho A, clip(rho) A))
  double value_loss = 0.0;   // mean((V - R)^2)
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
};

/// Combined PPO loss over the given batch rows and its gradient with respect
/// to every policy and value parameter (flattened layouts). Gradients are
/// overwritten, not accumulated.
LossTerms ppo_loss(const PolicyParams& policy, const ValueParams& value_net, const RolloutBatch& batch,
                   std::span<const std::size_t> rows, double clip_epsilon, const PpoConfig& config,
                   std::span<double> grad_policy, std::span<double> grad_value);

/// Per-sample pieces of the clipped surrogate as a function of the log-prob
/// ratio. Exposed for tests.
struct SurrogateTerm {
  double unclipped = 0.0;       // rho A
  double clipped = 0.0;         // clip(rho, 1-eps, 1+eps) A
  double d_unclipped = 0.0;     // d/d logp_new
  double d_clipped = 0.0;
  double objective = 0.0;       // min of the two
  double d_objective = 0.0;
};
SurrogateTerm surrogate_term(double logp_new, double logp_old, double advantage, double clip_epsilon);

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double beta1, double beta2, double epsilon);
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
  std::size_t t_ = 0;
};

struct UpdateDiagnostics {
  LossTerms last;
  double mean_policy_loss = 0.0;
  double mean_value_loss = 0.0;
  double lr = 0.0;
  double clip_epsilon = 0.0;
  std::size_t minibatches = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer state shared across updates of one training run.
struct Learner {
  PolicyParams policy;
  ValueParams value;
  Adam adam;
};

/// Epochs of shuffled minibatch Adam steps on one batch. Expects
/// batch.advantages to be normalized already. lr_mult scales both the
/// stepsize and the clip range when annealing.
UpdateDiagnostics ppo_update(Learner& learner, const RolloutBatch& batch, const PpoConfig& config,
                             double lr_mult, std::mt19937_64& rng);

struct EpisodeRecord {
  std::size_t episode = 0;
  double cumulative_reward = 0.0;
  std::size_t steps = 0;
  bool diverged = false;
};

struct TrainingRun {
  std::uint64_t seed = 0;
  Checkpoint checkpoint;
  std::vector<EpisodeRecord> curve;
};

/// Running estimate of the discounted-return spread, used to bring rewards
/// of wildly varying magnitude onto a unit scale before advantage estimation.
class ReturnNormalizer {
 public:
  ReturnNormalizer(double gamma, double clip) : gamma_(gamma), clip_(clip) {}

  /// Scales one reward; `episode_end` resets the running return afterwards.
  double operator()(double reward, bool episode_end);
  double std() const;

 private:
  double gamma_;
  double clip_;
  double ret_ = 0.0;
  double count_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

using TrainingLog = std::function<void(const std::string&)>;

/// Runs rollout/update iterations until total_steps environment steps have
/// been collected. Fully determined by (seed, configs).
TrainingRun train(std::uint64_t seed, const AirframeModel& airframe, const EnvConfig& env_config,
                  const PpoConfig& ppo_config, const std::string& reward_config_hash = {},
                  const TrainingLog& log = {});

/// Mean cumulative reward of the last `window` completed episodes (all of
/// them when fewer exist).
double final_window_mean(const std::vector<EpisodeRecord>& curve, std::size_t window);

/// Index of the run with the highest final-window mean; ties go to the
/// lowest seed. Throws InvalidInput on an empty list.
std::size_t select_best(std::span<const TrainingRun> runs, std::size_t window);

}  // namespace rotorlab

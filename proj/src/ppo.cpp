#include "rotorlab/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rotorlab {

void PpoConfig::validate() const {
  if (horizon == 0) throw InvalidInput("ppo.horizon must be > 0");
  if (!(stepsize > 0.0)) throw InvalidInput("ppo.stepsize must be > 0");
  if (epochs == 0) throw InvalidInput("ppo.epochs must be > 0");
  if (minibatch_size == 0 || minibatch_size > horizon) throw InvalidInput("ppo.minibatch_size must be in [1, horizon]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidInput("ppo.gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("ppo.lambda must be in [0, 1]");
  if (!(clip_epsilon > 0.0)) throw InvalidInput("ppo.clip_epsilon must be > 0");
  if (n_seeds == 0) throw InvalidInput("ppo.n_seeds must be > 0");
  if (!(reward_scale > 0.0)) throw InvalidInput("ppo.reward_scale must be > 0");
  if (!(reward_clip >= 0.0)) throw InvalidInput("ppo.reward_clip must be >= 0");
  if (select_window == 0) throw InvalidInput("ppo.select_window must be > 0");
  if (network.hidden.empty()) throw InvalidInput("ppo.network.hidden must list at least one layer");
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const double> dones, double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw InvalidInput("compute_gae inputs must be aligned");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? values[t + 1] : bootstrap_value;
    const double nonterminal = 1.0 - dones[t];
    const double delta = rewards[t] + gamma * next_value * nonterminal - values[t];
    next_adv = delta + gamma * lambda * nonterminal * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  return out;
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  const double denom = std > 1e-12 ? std : 1.0;
  for (double& a : adv) a = (a - mean) / denom;
}

SurrogateTerm surrogate_term(double logp_new, double logp_old, double advantage, double clip_epsilon) {
  SurrogateTerm s;
  const double rho = std::exp(logp_new - logp_old);
  const double lo = 1.0 - clip_epsilon;
  const double hi = 1.0 + clip_epsilon;
  s.unclipped = rho * advantage;
  s.clipped = std::clamp(rho, lo, hi) * advantage;
  s.d_unclipped = rho * advantage;
  s.d_clipped = (rho > lo && rho < hi) ? rho * advantage : 0.0;
  if (s.unclipped <= s.clipped) {
    s.objective = s.unclipped;
    s.d_objective = s.d_unclipped;
  } else {
    s.objective = s.clipped;
    s.d_objective = s.d_clipped;
  }
  return s;
}

LossTerms ppo_loss(const PolicyParams& policy, const ValueParams& value_net, const RolloutBatch& batch,
                   std::span<const std::size_t> rows, double clip_epsilon, const PpoConfig& config,
                   std::span<double> grad_policy, std::span<double> grad_value) {
  std::fill(grad_policy.begin(), grad_policy.end(), 0.0);
  std::fill(grad_value.begin(), grad_value.end(), 0.0);

  const std::size_t act_dim = policy.act_dim();
  const std::size_t mean_params = policy.mean.parameter_count();
  const double n = static_cast<double>(rows.size());
  std::span<double> grad_log_std = grad_policy.subspan(mean_params, act_dim);
  std::span<double> grad_mean = grad_policy.first(mean_params);

  LossTerms loss;
  Mlp::Tape ptape;
  Mlp::Tape vtape;
  std::vector<double> d_mu(act_dim);
  std::vector<double> inv_var(act_dim);
  for (std::size_t i = 0; i < act_dim; ++i) inv_var[i] = std::exp(-2.0 * policy.log_std[i]);

  double surrogate_sum = 0.0;
  double clipped = 0.0;
  for (std::size_t t : rows) {
    const auto obs = batch.obs(t);
    const auto act = batch.action(t);
    const double adv = batch.advantages[t];

    policy.mean.forward_tape(obs, ptape);
    const std::vector<double>& mu = ptape.values.back();
    const double logp = log_prob(mu, policy.log_std, act);
    const SurrogateTerm s = surrogate_term(logp, batch.log_probs[t], adv, clip_epsilon);
    surrogate_sum += s.objective;
    if (s.unclipped > s.clipped) clipped += 1.0;

    const double d_logp = -s.d_objective / n;
    if (d_logp != 0.0) {
      for (std::size_t i = 0; i < act_dim; ++i) {
        const double diff = act[i] - mu[i];
        d_mu[i] = d_logp * diff * inv_var[i];
        grad_log_std[i] += d_logp * (diff * diff * inv_var[i] - 1.0);
      }
      policy.mean.backward(ptape, d_mu, grad_mean);
    }

    value_net.net.forward_tape(obs, vtape);
    const double v = vtape.values.back()[0];
    const double err = v - batch.returns[t];
    loss.value_loss += err * err;
    const double d_v = config.value_coef * 2.0 * err / n;
    value_net.net.backward(vtape, std::span<const double>(&d_v, 1), grad_value);
  }

  constexpr double half_log_2pi_e = 1.4189385332046727418;  // 0.5 * (1 + log(2 pi))
  for (std::size_t i = 0; i < act_dim; ++i) {
    loss.entropy += policy.log_std[i] + half_log_2pi_e;
    grad_log_std[i] -= config.entropy_coef;
  }

  loss.policy_loss = -surrogate_sum / n;
  loss.value_loss /= n;
  loss.clip_fraction = clipped / n;
  loss.total = loss.policy_loss + config.value_coef * loss.value_loss - config.entropy_coef * loss.entropy;
  return loss;
}

Adam::Adam(std::size_t n, double beta1, double beta2, double epsilon)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) + epsilon_);
  }
}

UpdateDiagnostics ppo_update(Learner& learner, const RolloutBatch& batch, const PpoConfig& config,
                             double lr_mult, std::mt19937_64& rng) {
  UpdateDiagnostics diag;
  diag.lr = config.stepsize * lr_mult;
  diag.clip_epsilon = config.clip_epsilon * lr_mult;

  const std::size_t np = learner.policy.parameter_count();
  const std::size_t nv = learner.value.parameter_count();
  std::vector<double> params(np + nv);
  std::vector<double> grad(np + nv);
  std::span<double> pp(params.data(), np);
  std::span<double> pv(params.data() + np, nv);
  learner.policy.get_params(pp);
  learner.value.net.get_params(pv);

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.minibatch_size) {
      const std::size_t len = std::min(config.minibatch_size, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      const LossTerms loss = ppo_loss(learner.policy, learner.value, batch, rows, diag.clip_epsilon, config,
                                      std::span<double>(grad.data(), np), std::span<double>(grad.data() + np, nv));
      if (!std::isfinite(loss.total)) {
        throw TrainingError("non-finite PPO loss in minibatch " + std::to_string(diag.minibatches) +
                            " (epoch " + std::to_string(epoch) + ")");
      }
      learner.adam.step(params, grad, diag.lr);
      learner.policy.set_params(pp);
      learner.value.net.set_params(pv);
      diag.mean_policy_loss += loss.policy_loss;
      diag.mean_value_loss += loss.value_loss;
      diag.last = loss;
      ++diag.minibatches;
    }
  }
  if (diag.minibatches > 0) {
    diag.mean_policy_loss /= static_cast<double>(diag.minibatches);
    diag.mean_value_loss /= static_cast<double>(diag.minibatches);
  }
  return diag;
}

double ReturnNormalizer::std() const { return count_ > 1.0 ? std::sqrt(m2_ / count_) : 1.0; }

double ReturnNormalizer::operator()(double reward, bool episode_end) {
  ret_ = ret_ * gamma_ + reward;
  // Welford update of the return variance.
  count_ += 1.0;
  const double delta = ret_ - mean_;
  mean_ += delta / count_;
  m2_ += delta * (ret_ - mean_);
  if (episode_end) ret_ = 0.0;
  double scaled = reward / std::max(std(), 1e-8);
  if (clip_ > 0.0) scaled = std::clamp(scaled, -clip_, clip_);
  return scaled;
}

TrainingRun train(std::uint64_t seed, const AirframeModel& airframe, const EnvConfig& env_config,
                  const PpoConfig& config, const std::string& reward_config_hash, const TrainingLog& log) {
  config.validate();
  AttitudeEnv env(airframe, env_config, seed);
  std::seed_seq seq{seed, std::uint64_t{0x70706f31ULL}};
  std::mt19937_64 rng(seq);

  const std::size_t obs_dim = env.obs_dim();
  Learner learner;
  learner.policy = init_policy(obs_dim, kRotors, config.network, rng);
  learner.value = init_value(obs_dim, config.network, rng);
  learner.adam = Adam(learner.policy.parameter_count() + learner.value.parameter_count(), config.adam_beta1,
                      config.adam_beta2, config.adam_epsilon);

  TrainingRun run;
  run.seed = seed;
  ReturnNormalizer normalizer(config.gamma, config.reward_clip);

  std::vector<double> obs = env.reset().flatten();
  EpisodeRecord episode;
  std::uint64_t steps_done = 0;
  std::size_t iteration = 0;

  while (steps_done < config.total_steps) {
    const double lr_mult =
        config.anneal ? std::max(1.0 - static_cast<double>(steps_done) / static_cast<double>(config.total_steps), 0.0)
                      : 1.0;
    const auto horizon = static_cast<std::size_t>(
        std::min<std::uint64_t>(config.horizon, config.total_steps - steps_done));

    double raw_reward_sum = 0.0;
    RolloutBatch batch;
    batch.obs_dim = obs_dim;
    batch.act_dim = kRotors;
    batch.observations.reserve(horizon * obs_dim);
    batch.raw_actions.reserve(horizon * kRotors);
    for (std::size_t t = 0; t < horizon; ++t) {
      const SampledAction a = sample_action(learner.policy, obs, rng);
      batch.observations.insert(batch.observations.end(), obs.begin(), obs.end());
      batch.raw_actions.insert(batch.raw_actions.end(), a.raw.begin(), a.raw.end());
      batch.log_probs.push_back(a.log_prob);
      batch.values.push_back(value(learner.value, obs));

      const EnvStep s = env.step(a.clipped);
      double r = s.reward.total * config.reward_scale;
      if (config.normalize_rewards) r = normalizer(r, s.done);
      episode.cumulative_reward += s.reward.total;
      raw_reward_sum += s.reward.total;
      ++episode.steps;
      obs = s.obs.flatten();
      if (s.done) {
        // A time limit is not a terminal state: bootstrap from the final
        // observation. A blow-up is treated as absorbing at the last reward,
        // so ending an episode early never looks attractive.
        if (s.diverged) {
          r += config.gamma * r / (1.0 - config.gamma);
        } else {
          r += config.gamma * value(learner.value, obs);
        }
        episode.diverged = s.diverged;
        if (s.diverged && log) {
          log("episode " + std::to_string(episode.episode) + " diverged after " + std::to_string(episode.steps) +
              " steps; restarting");
        }
        run.curve.push_back(episode);
        episode = EpisodeRecord{run.curve.size(), 0.0, 0, false};
        obs = env.reset().flatten();
      }
      batch.rewards.push_back(r);
      batch.dones.push_back(s.done ? 1.0 : 0.0);
    }
    batch.bootstrap_value = value(learner.value, obs);
    steps_done += horizon;

    GaeResult gae = compute_gae(batch.rewards, batch.values, batch.dones, batch.bootstrap_value, config.gamma,
                                config.lambda);
    batch.advantages = std::move(gae.advantages);
    batch.returns = std::move(gae.returns);
    normalize_advantages(batch.advantages);

    const UpdateDiagnostics diag = ppo_update(learner, batch, config, lr_mult, rng);
    ++iteration;
    if (log) {
      std::ostringstream msg;
      msg << "iter " << iteration << " steps " << steps_done << " episodes " << run.curve.size()
          << " batch_reward " << raw_reward_sum / static_cast<double>(horizon);
      if (!run.curve.empty()) msg << " last_return " << run.curve.back().cumulative_reward;
      msg << " pi_loss " << diag.mean_policy_loss << " v_loss " << diag.mean_value_loss << " clipfrac "
          << diag.last.clip_fraction << " std " << std::exp(learner.policy.log_std[0]);
      log(msg.str());
    }
  }

  run.checkpoint.policy = std::move(learner.policy);
  run.checkpoint.value = std::move(learner.value);
  run.checkpoint.metadata = {seed, steps_done, reward_config_hash};
  return run;
}

double final_window_mean(const std::vector<EpisodeRecord>& curve, std::size_t window) {
  if (curve.empty()) return -std::numeric_limits<double>::infinity();
  const std::size_t n = std::min(window, curve.size());
  double sum = 0.0;
  for (std::size_t i = curve.size() - n; i < curve.size(); ++i) sum += curve[i].cumulative_reward;
  return sum / static_cast<double>(n);
}

std::size_t select_best(std::span<const TrainingRun> runs, std::size_t window) {
  if (runs.empty()) throw InvalidInput("select_best needs at least one run");
  std::size_t best = 0;
  double best_score = final_window_mean(runs[0].curve, window);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const double score = final_window_mean(runs[i].curve, window);
    if (score > best_score || (score == best_score && runs[i].seed < runs[best].seed)) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

}  // namespace rotorlab

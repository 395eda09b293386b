#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "rotorlab/ppo.hpp"

using namespace rotorlab;

namespace {

// Sum over k of (gamma lambda)^k delta_{t+k}, stopping after a done step.
std::vector<double> brute_gae(const std::vector<double>& r, const std::vector<double>& v,
                              const std::vector<double>& done, double boot, double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n), adv(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : boot;
    delta[t] = r[t] + gamma * next * (1.0 - done[t]) - v[t];
  }
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0, w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      sum += w * delta[k];
      if (done[k] != 0.0) break;
      w *= gamma * lambda;
    }
    adv[t] = sum;
  }
  return adv;
}

struct Fixture {
  PolicyParams policy;
  ValueParams value;
  RolloutBatch batch;
};

Fixture tiny_fixture(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  NetworkConfig net;
  net.hidden = {6, 5};
  Fixture f;
  f.policy = init_policy(6, 4, net, rng);
  f.value = init_value(6, net, rng);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> theta(f.policy.parameter_count());
  for (double& t : theta) t = 0.4 * nd(rng);
  f.policy.set_params(theta);

  RolloutBatch& b = f.batch;
  b.obs_dim = 6;
  b.act_dim = 4;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> obs(6);
    for (double& o : obs) o = 100.0 * nd(rng);
    const SampledAction a = sample_action(f.policy, obs, rng);
    b.observations.insert(b.observations.end(), obs.begin(), obs.end());
    b.raw_actions.insert(b.raw_actions.end(), a.raw.begin(), a.raw.end());
    // Old log-probs are perturbed so ratios differ from one.
    b.log_probs.push_back(a.log_prob + 0.3 * nd(rng));
    b.rewards.push_back(nd(rng));
    b.values.push_back(value(f.value, obs));
    b.dones.push_back(0.0);
    b.advantages.push_back(nd(rng));
    b.returns.push_back(nd(rng));
  }
  return f;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

TrainingRun run_with(std::vector<double> means) {
  TrainingRun r;
  for (double m : means) r.curve.push_back({r.curve.size(), m, 1, false});
  return r;
}

}  // namespace

TEST_CASE("GAE small cases") {
  const std::vector<double> r{1, 1}, v{0, 0}, d{0, 1};
  GaeResult g = compute_gae(r, v, d, 0.0, 1.0, 1.0);
  CHECK(g.advantages == std::vector<double>{2, 1});
  CHECK(g.returns == std::vector<double>{2, 1});

  const std::vector<double> r2{0.5, -1.0, 2.0}, v2{0.1, 0.3, -0.2}, d2{0, 0, 0};
  g = compute_gae(r2, v2, d2, 0.7, 0.9, 0.0);
  CHECK(g.advantages[0] == 0.5 + 0.9 * 0.3 - 0.1);
  CHECK(g.advantages[1] == -1.0 + 0.9 * -0.2 - 0.3);
  CHECK(g.advantages[2] == 2.0 + 0.9 * 0.7 + 0.2);
}

TEST_CASE("GAE matches the brute-force sum") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t len = 50;
    std::vector<double> r(len), v(len), d(len);
    for (std::size_t t = 0; t < len; ++t) {
      r[t] = n(rng);
      v[t] = n(rng);
      d[t] = u(rng) < 0.1 ? 1.0 : 0.0;
    }
    const double gamma = 0.9 + 0.1 * u(rng), lambda = u(rng), boot = n(rng);
    const GaeResult g = compute_gae(r, v, d, boot, gamma, lambda);
    const auto ref = brute_gae(r, v, d, boot, gamma, lambda);
    for (std::size_t t = 0; t < len; ++t) {
      REQUIRE(std::abs(g.advantages[t] - ref[t]) <= 1e-10);
      REQUIRE(g.returns[t] == g.advantages[t] + v[t]);
    }
  }
}

TEST_CASE("advantage normalization") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(3.0, 40.0);
  std::vector<double> a(2048);
  for (double& x : a) x = n(rng);
  normalize_advantages(a);
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  CHECK(std::abs(mean) <= 1e-9);
  CHECK(std::abs(std::sqrt(var / a.size()) - 1.0) <= 1e-6);
}

TEST_CASE("ratio-one identity") {
  Fixture f = tiny_fixture(3, 16);
  RolloutBatch& b = f.batch;
  for (std::size_t t = 0; t < b.size(); ++t) {
    b.log_probs[t] = log_prob(forward_mean(f.policy, b.obs(t)), f.policy.log_std, b.action(t));
  }
  PpoConfig cfg;
  std::vector<double> gp(f.policy.parameter_count()), gv(f.value.parameter_count());
  const auto rows = all_rows(b.size());
  const LossTerms l = ppo_loss(f.policy, f.value, b, rows, 0.2, cfg, gp, gv);
  double sum = 0.0;
  for (double a : b.advantages) sum += a;
  CHECK(l.policy_loss == -(sum / static_cast<double>(b.size())));
  CHECK(l.clip_fraction == 0.0);
}

TEST_CASE("zero clip range kills the clipped gradient") {
  for (double lr : {-0.4, -0.01, 0.02, 0.5}) {
    for (double a : {-1.5, 0.7}) {
      const SurrogateTerm s = surrogate_term(lr, 0.0, a, 0.0);
      CHECK(s.d_clipped == 0.0);
      CHECK(s.clipped == a);
    }
  }
  const SurrogateTerm s = surrogate_term(0.1, 0.0, 2.0, 0.2);
  CHECK(s.unclipped == doctest::Approx(std::exp(0.1) * 2.0));
  CHECK(s.d_unclipped == doctest::Approx(std::exp(0.1) * 2.0));
  CHECK(s.objective == std::min(s.unclipped, s.clipped));
}

TEST_CASE("PPO loss gradient matches central differences") {
  PpoConfig cfg;
  cfg.entropy_coef = 0.01;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    Fixture f = tiny_fixture(100 + inst, 5);
    const auto rows = all_rows(5);
    std::vector<double> gp(f.policy.parameter_count()), gv(f.value.parameter_count());
    ppo_loss(f.policy, f.value, f.batch, rows, 0.2, cfg, gp, gv);

    std::vector<double> theta(gp.size()), phi(gv.size()), sp(gp.size()), sv(gv.size());
    f.policy.get_params(theta);
    f.value.net.get_params(phi);
    auto loss_at = [&](const std::vector<double>& th, const std::vector<double>& ph) {
      PolicyParams p = f.policy;
      ValueParams v = f.value;
      p.set_params(th);
      v.net.set_params(ph);
      return ppo_loss(p, v, f.batch, rows, 0.2, cfg, sp, sv).total;
    };
    const double h = 1e-6;
    std::size_t checked = 0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      auto tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      const double fp = loss_at(tp, phi), fm = loss_at(tm, phi);
      const double fd = (fp - fm) / (2 * h);
      // A kink of the clip inside the stencil makes the difference meaningless.
      const double f0 = loss_at(theta, phi);
      if (std::abs((fp - f0) - (f0 - fm)) > 1e-3 * std::abs(fp - fm) + 1e-12) continue;
      CHECK(std::abs(fd - gp[k]) <= 1e-3 * std::max(1e-3, std::abs(fd)));
      ++checked;
    }
    CHECK(checked > theta.size() / 2);
    for (std::size_t k = 0; k < phi.size(); ++k) {
      auto pp = phi, pm = phi;
      pp[k] += h;
      pm[k] -= h;
      const double fd = (loss_at(theta, pp) - loss_at(theta, pm)) / (2 * h);
      CHECK(std::abs(fd - gv[k]) <= 1e-3 * std::max(1e-3, std::abs(fd)));
    }
  }
}

TEST_CASE("one small update decreases the loss") {
  Fixture f = tiny_fixture(55, 32);
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch_size = 32;
  cfg.horizon = 32;
  cfg.stepsize = 1e-4;
  Learner L{f.policy, f.value, Adam(f.policy.parameter_count() + f.value.parameter_count(), 0.9, 0.999, 1e-8)};
  const auto rows = all_rows(32);
  std::vector<double> gp(f.policy.parameter_count()), gv(f.value.parameter_count());
  const double before = ppo_loss(L.policy, L.value, f.batch, rows, 0.2, cfg, gp, gv).total;
  std::mt19937_64 rng(1);
  const UpdateDiagnostics d = ppo_update(L, f.batch, cfg, 1.0, rng);
  CHECK(d.minibatches == 1);
  const double after = ppo_loss(L.policy, L.value, f.batch, rows, 0.2, cfg, gp, gv).total;
  CHECK(after < before);
}

TEST_CASE("non-finite loss names the minibatch") {
  Fixture f = tiny_fixture(5, 8);
  f.batch.advantages[3] = std::nan("");
  PpoConfig cfg;
  cfg.horizon = 8;
  cfg.minibatch_size = 8;
  Learner L{f.policy, f.value, Adam(f.policy.parameter_count() + f.value.parameter_count(), 0.9, 0.999, 1e-8)};
  std::mt19937_64 rng(1);
  try {
    ppo_update(L, f.batch, cfg, 1.0, rng);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("minibatch 0") != std::string::npos);
  }
}

TEST_CASE("return normalizer") {
  ReturnNormalizer n(0.99, 10.0);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(-5000.0, 3000.0);
  double maxabs = 0.0;
  for (int k = 0; k < 5000; ++k) maxabs = std::max(maxabs, std::abs(n(d(rng), k % 1000 == 999)));
  CHECK(maxabs <= 10.0);
  CHECK(n.std() > 1.0);
}

TEST_CASE("select_best") {
  std::vector<TrainingRun> runs{run_with({5}), run_with({9}), run_with({7})};
  for (std::size_t i = 0; i < runs.size(); ++i) runs[i].seed = i + 1;
  CHECK(select_best(runs, 10) == 1);
  CHECK(select_best(std::span<const TrainingRun>(runs).first(1), 10) == 0);
  CHECK_THROWS_AS(select_best(std::span<const TrainingRun>{}, 10), InvalidInput);

  // Window: only the last two episodes count.
  std::vector<TrainingRun> w{run_with({100, 1, 1}), run_with({0, 2, 2})};
  w[0].seed = 1;
  w[1].seed = 2;
  CHECK(select_best(w, 2) == 1);
  CHECK(final_window_mean(w[0].curve, 2) == 1.0);

  // Ties go to the lowest seed regardless of order.
  std::vector<TrainingRun> tie{run_with({3}), run_with({3}), run_with({1})};
  tie[0].seed = 8;
  tie[1].seed = 4;
  tie[2].seed = 1;
  std::vector<std::size_t> perm{0, 1, 2};
  do {
    std::vector<TrainingRun> p;
    for (std::size_t i : perm) p.push_back(tie[i]);
    CHECK(p[select_best(p, 10)].seed == 4);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("training is deterministic and survives divergence") {
  AirframeModel af;
  EnvConfig env;
  env.episode_time = 0.5;
  PpoConfig ppo;
  ppo.total_steps = 2048;
  ppo.horizon = 512;
  ppo.minibatch_size = 64;
  ppo.epochs = 2;
  const TrainingRun a = train(3, af, env, ppo), b = train(3, af, env, ppo);
  REQUIRE(a.curve.size() == b.curve.size());
  CHECK(a.curve.size() == 4);
  for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].cumulative_reward == b.curve[i].cumulative_reward);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  CHECK(a.checkpoint.metadata.training_steps == 2048);
  CHECK_FALSE(serialize_checkpoint(train(4, af, env, ppo).checkpoint) == serialize_checkpoint(a.checkpoint));

  af.max_body_rate = 5.0;
  const TrainingRun d = train(3, af, env, ppo);
  const bool any = std::any_of(d.curve.begin(), d.curve.end(), [](const EpisodeRecord& e) { return e.diverged; });
  CHECK(any);
}

TEST_CASE("ppo config validation") {
  PpoConfig c;
  c.minibatch_size = c.horizon + 1;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = PpoConfig{};
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = PpoConfig{};
  c.lambda = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

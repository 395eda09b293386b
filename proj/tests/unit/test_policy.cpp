#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "rotorlab/checkpoint.hpp"
#include "rotorlab/policy.hpp"

using namespace rotorlab;

namespace {

PolicyParams random_policy(std::uint64_t seed, std::vector<std::size_t> hidden = {32, 32}, std::size_t obs = 6) {
  std::mt19937_64 rng(seed);
  NetworkConfig cfg;
  cfg.hidden = std::move(hidden);
  PolicyParams p = init_policy(obs, 4, cfg, rng);
  // Replace the init with something less structured so every path is exercised.
  std::vector<double> theta(p.parameter_count());
  std::normal_distribution<double> n(0.0, 0.5);
  for (double& v : theta) v = n(rng);
  p.set_params(theta);
  return p;
}

std::vector<double> random_obs(std::mt19937_64& rng, std::size_t n = 6) {
  std::uniform_real_distribution<double> d(-300.0, 300.0);
  std::vector<double> o(n);
  for (double& v : o) v = d(rng);
  return o;
}

// Independent evaluation: plain loops over the layer tables.
std::vector<double> oracle_forward(const Mlp& m, const std::vector<double>& obs) {
  std::vector<double> x(obs.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = obs[i] * m.input_scale[i];
  for (const DenseLayer& L : m.layers) {
    std::vector<double> y(L.rows);
    for (std::size_t r = 0; r < L.rows; ++r) {
      long double acc = 0.0L;
      for (std::size_t c = 0; c < L.cols; ++c) acc += static_cast<long double>(L.weight[r * L.cols + c]) * x[c];
      const double z = static_cast<double>(acc) + L.bias[r];
      y[r] = L.activation == Activation::tanh ? std::tanh(z) : z;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("default architecture parameter count") {
  std::mt19937_64 rng(1);
  const PolicyParams p = init_policy(6, 4, NetworkConfig{}, rng);
  CHECK(p.parameter_count() == 1416);
  CHECK(p.mean.parameter_count() == 1412);
  CHECK(6 * 32 + 32 + 32 * 32 + 32 + 32 * 4 + 4 + 4 == 1416);
  REQUIRE(p.mean.layers.size() == 3);
  CHECK(p.mean.layers[0].activation == Activation::tanh);
  CHECK(p.mean.layers[1].activation == Activation::tanh);
  CHECK(p.mean.layers[2].activation == Activation::identity);
  CHECK(p.log_std == std::vector<double>(4, 0.0));
  CHECK(init_value(6, NetworkConfig{}, rng).net.output_dim() == 1);
}

TEST_CASE("initial outputs sit near the output bias") {
  std::mt19937_64 rng(3);
  const PolicyParams p = init_policy(6, 4, NetworkConfig{}, rng);
  for (int k = 0; k < 100; ++k) {
    for (double m : forward_mean(p, random_obs(rng))) CHECK(std::abs(m - 0.5) < 0.1);
  }
}

TEST_CASE("zero weights give zero mean") {
  PolicyParams p = random_policy(2);
  std::vector<double> zero(p.parameter_count(), 0.0);
  p.set_params(zero);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 10; ++k) CHECK(forward_mean(p, random_obs(rng)) == std::vector<double>(4, 0.0));
}

TEST_CASE("tanh bounds hidden outputs") {
  PolicyParams p = random_policy(5, {16});
  std::mt19937_64 rng(7);
  std::vector<double> obs = random_obs(rng);
  for (double& v : obs) v *= 1e6;
  Mlp::Tape tape;
  p.mean.forward_tape(obs, tape);
  for (double h : tape.values[1]) {
    CHECK(std::isfinite(h));
    CHECK(std::abs(h) <= 1.0);
  }
}

TEST_CASE("forward matches an independent oracle") {
  std::mt19937_64 rng(11);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const PolicyParams p = random_policy(100 + s);
    const auto obs = random_obs(rng);
    const auto a = forward_mean(p, obs);
    const auto b = oracle_forward(p.mean, obs);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::max(1.0, std::abs(b[i])));
    }
    CHECK(forward_mean(p, obs) == a);
  }
}

TEST_CASE("shape mismatch is rejected") {
  const PolicyParams p = random_policy(1);
  std::vector<double> obs(5, 0.0);
  CHECK_THROWS_AS(forward_mean(p, obs), InvalidInput);
  PolicyParams bad = p;
  bad.mean.layers[1].cols = 31;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("sampling") {
  PolicyParams p = random_policy(4);
  std::mt19937_64 rng(21);
  const auto obs = random_obs(rng);
  const auto mean = forward_mean(p, obs);

  SUBCASE("degenerate gaussian") {
    p.log_std.assign(4, -20.0);
    const SampledAction a = sample_action(p, obs, rng);
    const Vec4 det = act_deterministic(p, obs);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(a.raw[i] - mean[i]) <= 1e-8);
      CHECK(a.clipped[i] == det[i]);
    }
  }

  SUBCASE("log density at the mean") {
    p.log_std = {-0.3, 0.0, 0.2, -1.1};
    double expect = 0.0;
    for (double ls : p.log_std) expect += -ls - 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(log_prob(mean, p.log_std, mean) == doctest::Approx(expect).epsilon(1e-14));
  }

  SUBCASE("empirical std") {
    p.log_std = {-1.0, -0.5, 0.0, 0.3};
    const int n = 100000;
    double sum[4] = {}, sq[4] = {};
    for (int k = 0; k < n; ++k) {
      const SampledAction a = sample_action(p, obs, rng);
      for (int i = 0; i < 4; ++i) {
        CHECK_MESSAGE(a.clipped[i] == std::clamp(a.raw[i], 0.0, 1.0), "clip");
        sum[i] += a.raw[i];
        sq[i] += a.raw[i] * a.raw[i];
      }
      if (k == 0) CHECK(a.log_prob == doctest::Approx(log_prob(mean, p.log_std, a.raw)));
    }
    for (int i = 0; i < 4; ++i) {
      const double m = sum[i] / n;
      const double sd = std::sqrt(sq[i] / n - m * m);
      CHECK(std::abs(sd - std::exp(p.log_std[i])) <= 0.02 * std::exp(p.log_std[i]));
    }
  }
}

TEST_CASE("act_deterministic clips the mean") {
  PolicyParams p = random_policy(6);
  DenseLayer& out = p.mean.layers.back();
  std::fill(out.weight.begin(), out.weight.end(), 0.0);
  out.bias = {0.5, -0.2, 1.3, 0.0};
  std::vector<double> obs(6, 1.0);
  CHECK(act_deterministic(p, obs) == Vec4{0.5, 0.0, 1.0, 0.0});
  CHECK(act_deterministic(p, obs) == act_deterministic(p, obs));
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    PolicyParams p = random_policy(200 + inst, {5, 4});
    p.log_std = {n(rng) * 0.3, n(rng) * 0.3, n(rng) * 0.3, n(rng) * 0.3};
    std::vector<double> obs = random_obs(rng);
    std::vector<double> c(4), raw(4);
    for (double& v : c) v = n(rng);
    const auto mean0 = forward_mean(p, obs);
    for (std::size_t i = 0; i < 4; ++i) raw[i] = mean0[i] + n(rng) * std::exp(p.log_std[i]);

    const std::size_t nm = p.mean.parameter_count();
    std::vector<double> theta(p.parameter_count());
    p.get_params(theta);

    // Analytic: d(c . mean)/dtheta and d(log_prob)/dtheta via backprop.
    Mlp::Tape tape;
    p.mean.forward_tape(obs, tape);
    std::vector<double> g_lin(nm, 0.0), g_lp(theta.size(), 0.0);
    p.mean.backward(tape, c, g_lin);
    std::vector<double> dmu(4);
    for (std::size_t i = 0; i < 4; ++i) {
      const double var = std::exp(2.0 * p.log_std[i]);
      dmu[i] = (raw[i] - mean0[i]) / var;
      g_lp[nm + i] = (raw[i] - mean0[i]) * (raw[i] - mean0[i]) / var - 1.0;
    }
    p.mean.backward(tape, dmu, std::span<double>(g_lp).first(nm));

    auto f_lin = [&](const std::vector<double>& th) {
      PolicyParams q = p;
      q.set_params(th);
      const auto m = forward_mean(q, obs);
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += c[i] * m[i];
      return s;
    };
    auto f_lp = [&](const std::vector<double>& th) {
      PolicyParams q = p;
      q.set_params(th);
      return log_prob(forward_mean(q, obs), q.log_std, raw);
    };

    const double h = 1e-5;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      std::vector<double> tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      const double fd_lp = (f_lp(tp) - f_lp(tm)) / (2 * h);
      CHECK(std::abs(fd_lp - g_lp[k]) <= 1e-4 * std::max(1.0, std::abs(fd_lp)));
      if (k < nm) {
        const double fd = (f_lin(tp) - f_lin(tm)) / (2 * h);
        CHECK(std::abs(fd - g_lin[k]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(8);
  Checkpoint c;
  c.policy = random_policy(9);
  c.value = init_value(6, NetworkConfig{}, rng);
  c.metadata = {7, 204800, "abc"};
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(c));
  CHECK(back.policy == c.policy);
  REQUIRE(back.value.has_value());
  CHECK(*back.value == *c.value);
  CHECK(back.metadata.seed == 7);
  CHECK(back.metadata.training_steps == 204800);
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(c));

  auto j = checkpoint_to_json(c);
  j.erase("log_std");
  try {
    checkpoint_from_json(j);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("log_std") != std::string::npos);
  }
}

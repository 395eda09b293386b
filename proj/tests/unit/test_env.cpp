#include <cmath>
#include <random>

#include "doctest.h"
#include "rotorlab/env.hpp"

using namespace rotorlab;

TEST_CASE("30 s episode at 1 ms is 30000 steps") {
  AttitudeEnv env(AirframeModel{}, EnvConfig{}, 3);
  env.reset();
  CHECK(env.episode_steps() == 30000);
  std::size_t n = 0;
  EnvStep s;
  do {
    s = env.step({0, 0, 0, 0});
    ++n;
  } while (!s.done);
  CHECK(n == 30000);
  CHECK_THROWS_AS(env.step({0, 0, 0, 0}), EpisodeFinished);
}

TEST_CASE("sample_task structure") {
  EnvConfig cfg;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TaskScript t = sample_task(seed, cfg);
    CHECK(t == sample_task(seed, cfg));
    REQUIRE(t.segments.size() >= 2);
    CHECK(t.segments[0].setpoint == Vec3{0, 0, 0});
    double sum = 0.0;
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
      const TaskSegment& s = t.segments[i];
      CHECK(s.duration > 0.0);
      sum += s.duration;
      if (i % 2 == 0) {
        CHECK(s.setpoint == Vec3{0, 0, 0});
      } else {
        for (double w : s.setpoint) CHECK(std::abs(w) <= cfg.setpoint_bound);
      }
      if (i + 1 < t.segments.size()) {
        const auto& r = i % 2 == 0 ? cfg.idle_duration_range : cfg.command_duration_range;
        CHECK(s.duration >= r[0]);
        CHECK(s.duration <= r[1]);
      }
    }
    CHECK(sum == doctest::Approx(cfg.episode_time).epsilon(1e-12));
  }
  CHECK_FALSE(sample_task(1, cfg) == sample_task(2, cfg));
}

TEST_CASE("episodic task holds one target") {
  EnvConfig cfg;
  cfg.task_mode = TaskMode::episodic;
  cfg.episode_time = 2.0;
  const TaskScript t = sample_task(9, cfg);
  REQUIRE(t.segments.size() == 1);
  CHECK(t.segments[0].duration == 2.0);
}

TEST_CASE("observe") {
  Observation o = observe({0, 0, 0}, {10, 20, 30}, {10, 20, 30});
  CHECK(o.e == Vec3{0, 0, 0});
  o = observe({4, 5, 6}, {14, 25, 36}, {10, 20, 30});
  CHECK(o.delta_e == Vec3{0, 0, 0});
  o = observe({70, 0, 0}, {100, 0, 0}, {40, 0, 0});
  CHECK(o.e == Vec3{60, 0, 0});
  CHECK(o.delta_e == Vec3{-10, 0, 0});
  CHECK(o.flatten().size() == 6);
}

TEST_CASE("first observation at rest has delta_e equal to e") {
  AttitudeEnv env(AirframeModel{}, EnvConfig{}, 1);
  TaskScript t;
  t.segments = {{{50, -20, 10}, 1.0}};
  t.total_time = 1.0;
  const Observation o = env.reset(t);
  for (std::size_t a = 0; a < kAxes; ++a) CHECK(o.delta_e[a] == o.e[a]);
}

TEST_CASE("gyro noise statistics") {
  std::mt19937_64 rng(5);
  CHECK(inject_gyro_noise({1, 2, 3}, 0.0, rng) == Vec3{1, 2, 3});
  CHECK_THROWS_AS(inject_gyro_noise({0, 0, 0}, -1.0, rng), InvalidInput);

  const int n = 1000000;
  double sum[3] = {}, sq[3] = {}, cross[3] = {};
  for (int k = 0; k < n; ++k) {
    const Vec3 w = inject_gyro_noise({0, 0, 0}, 5.0, rng);
    for (int a = 0; a < 3; ++a) {
      sum[a] += w[a];
      sq[a] += w[a] * w[a];
    }
    cross[0] += w[0] * w[1];
    cross[1] += w[1] * w[2];
    cross[2] += w[0] * w[2];
  }
  double sd[3];
  for (int a = 0; a < 3; ++a) {
    const double mean = sum[a] / n;
    sd[a] = std::sqrt(sq[a] / n - mean * mean);
    CHECK(std::abs(mean) <= 0.02);
    CHECK(std::abs(sd[a] - 5.0) <= 0.05);
  }
  const int pairs[3][2] = {{0, 1}, {1, 2}, {0, 2}};
  for (int p = 0; p < 3; ++p) {
    const int i = pairs[p][0], j = pairs[p][1];
    const double cov = cross[p] / n - (sum[i] / n) * (sum[j] / n);
    CHECK(std::abs(cov / (sd[i] * sd[j])) < 0.01);
  }
}

TEST_CASE("reward terms") {
  CHECK(reward_e({0, 0, 0}) == 0.0);
  CHECK(reward_e({10, -5, 2}) == -129.0);
  CHECK(reward_e({3.5, -1.25, 7}) == reward_e({-3.5, 1.25, -7}));

  CHECK(reward_y({1, 1, 1, 1}, 300) == 0.0);
  CHECK(reward_y({0, 0, 0, 0}, 300) == 300.0);
  CHECK(reward_y({0.5, 0.25, 0.25, 0}, 300) == 225.0);

  EnvConfig cfg;
  const Vec4 y{0.3, 0.4, 0.5, 0.6};
  CHECK(reward_delta(y, y, {0, 0, 0}, cfg) == 20000.0);
  CHECK(reward_delta(y, y, {0, 25, 0}, cfg) == 0.0);
  CHECK(reward_delta(y, y, {0, 0, -30}, cfg) == 0.0);
  CHECK(reward_delta(y, y, {24.9, -24.9, 0}, cfg) == 20000.0);
  // 0.1 in output units is 100 milli-units: (100)^2 = delta_y_max, so it contributes nothing.
  const Vec4 jumped{0.4, 0.4, 0.5, 0.6};
  CHECK(reward_delta(jumped, y, {0, 0, 0}, cfg) == 15000.0);
  const Vec4 half{0.35, 0.4, 0.5, 0.6};
  CHECK(reward_delta(half, y, {0, 0, 0}, cfg) == doctest::Approx(15000.0 + 0.5 * (10000.0 - 2500.0)));

  const RewardBreakdown r = reward({10, -5, 2}, y, y, cfg);
  CHECK(r.total == r.r_e + r.r_y + r.r_delta);
  CHECK(r.r_delta == 20000.0);
}

TEST_CASE("perfect tracking with frozen output") {
  EnvConfig cfg;
  cfg.gyro_noise_sigma = 0.0;
  AttitudeEnv env(AirframeModel{}, cfg, 1);
  TaskScript t;
  t.segments = {{{0, 0, 0}, 1.0}};
  t.total_time = 1.0;
  env.reset(t);
  for (int k = 0; k < 10; ++k) {
    const EnvStep s = env.step({0, 0, 0, 0});
    CHECK(s.reward.r_e == 0.0);
    CHECK(s.reward.total == reward_y({0, 0, 0, 0}, cfg.alpha) + 20000.0 * (cfg.beta / 0.5));
  }
}

TEST_CASE("env determinism, decomposition and gating along a trajectory") {
  EnvConfig cfg;
  AttitudeEnv a(AirframeModel{}, cfg, 42), b(AirframeModel{}, cfg, 42);
  a.reset();
  b.reset();
  CHECK(a.task() == b.task());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-0.2, 1.2);
  for (int k = 0; k < 3000; ++k) {
    const Vec4 y{d(rng), d(rng), d(rng), d(rng)};
    const EnvStep sa = a.step(y), sb = b.step(y);
    REQUIRE(sa.reward.total == sb.reward.total);
    REQUIRE(sa.obs.e == sb.obs.e);
    REQUIRE(sa.reward.total == sa.reward.r_e + sa.reward.r_y + sa.reward.r_delta);
    for (double v : sa.y) REQUIRE((v >= 0.0 && v <= 1.0));
    double emax = 0.0;
    for (double e : sa.obs.e) emax = std::max(emax, std::abs(e));
    if (emax >= cfg.error_band) REQUIRE(sa.reward.r_delta == 0.0);
    REQUIRE(sa.obs.size() == 6);
    if (sa.done) break;
  }
}

TEST_CASE("error_motor observation") {
  EnvConfig cfg;
  cfg.observation_mode = ObservationMode::error_motor;
  AttitudeEnv env(AirframeModel{}, cfg, 2);
  CHECK(env.obs_dim() == 7);
  env.reset();
  EnvStep s;
  for (int k = 0; k < 500; ++k) s = env.step({1, 1, 1, 1});
  CHECK(s.obs.flatten().size() == 7);
  for (double r : s.obs.rotor_norm) {
    CHECK(r > 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("env config validation") {
  EnvConfig cfg;
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = EnvConfig{};
  cfg.error_band = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

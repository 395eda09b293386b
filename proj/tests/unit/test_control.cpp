#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "rotorlab/control.hpp"

using namespace rotorlab;

TEST_CASE("throttle mix examples") {
  const MixResult m = mix_throttle({0.2, 0.4, 0.3, 0.1}, 0.5);
  CHECK(m.t_hat == doctest::Approx(0.3).epsilon(1e-15));
  const Vec4 expect{0.5, 0.7, 0.6, 0.4};
  for (std::size_t i = 0; i < kRotors; ++i) CHECK(m.u[i] == doctest::Approx(expect[i]).epsilon(1e-15));

  const Vec4 sat{0.3, 1.0, 0.0, 0.6};
  CHECK(mix_throttle(sat, 0.8).u == sat);
  CHECK(mix_throttle(sat, 0.8).t_hat == 0.0);
  const Vec4 y{0.25, 0.125, 0.5, 0.0625};
  CHECK(mix_throttle(y, 0.0).u == y);

  CHECK_THROWS_AS(mix_throttle({0.1, 1.2, 0, 0}, 0.5), InvalidInput);
  CHECK_THROWS_AS(mix_throttle({0.1, 0.2, -0.1, 0}, 0.5), InvalidInput);
  CHECK_THROWS_AS(mix_throttle({0.1, 0.2, 0, 0}, 1.5), InvalidInput);
  CHECK_THROWS_AS(mix_throttle({0.1, 0.2, 0, NAN}, 0.5), InvalidInput);
}

TEST_CASE("throttle mix bound and priority on fuzzed inputs") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int k = 0; k < 100000; ++k) {
    const Vec4 y{d(rng), d(rng), d(rng), d(rng)};
    const double t = d(rng);
    const MixResult m = mix_throttle(y, t);
    const double ymax = *std::max_element(y.begin(), y.end());
    const double umax = *std::max_element(m.u.begin(), m.u.end());
    REQUIRE(umax <= ymax + t * (1.0 - ymax));
    REQUIRE(umax <= 1.0);
    const auto iy = std::max_element(y.begin(), y.end()) - y.begin();
    const auto iu = std::max_element(m.u.begin(), m.u.end()) - m.u.begin();
    REQUIRE(iy == iu);
    const MixResult more = mix_throttle(y, std::min(1.0, t + 0.25));
    REQUIRE(std::max_element(more.u.begin(), more.u.end()) - more.u.begin() == iy);
  }
}

TEST_CASE("pid step reductions") {
  PidGains g;
  for (auto& a : g.axis) a = {0.7, 0.0, 0.0};
  const Vec3 e{12.5, -3.0, 40.0};
  const PidOutput p = pid_step(g, e, {1, 2, 3}, PidState{}, 0.001, 0.3);
  for (std::size_t a = 0; a < kAxes; ++a) CHECK(p.out[a] == 0.7 * e[a]);

  for (auto& a : g.axis) a = {0.0, 2.0, 0.0};
  PidState s;
  const int k = 250;
  PidOutput out;
  for (int i = 0; i < k; ++i) {
    out = pid_step(g, {0.5, -0.25, 1.0}, {0, 0, 0}, s, 0.001, 1e9);
    s = out.state;
  }
  CHECK(out.out[0] == doctest::Approx(2.0 * 0.5 * k * 0.001).epsilon(1e-12));
  CHECK(out.out[1] == doctest::Approx(2.0 * -0.25 * k * 0.001).epsilon(1e-12));
  CHECK(out.out[2] == doctest::Approx(2.0 * 1.0 * k * 0.001).epsilon(1e-12));

  SUBCASE("anti-windup bound") {
    for (int i = 0; i < 100000; ++i) s = pid_step(g, {100, 100, 100}, {0, 0, 0}, s, 0.001, 0.3).state;
    CHECK(pid_step(g, {100, 100, 100}, {0, 0, 0}, s, 0.001, 0.3).out[0] == doctest::Approx(0.3));
  }

  SUBCASE("derivative acts on the measurement only") {
    for (auto& a : g.axis) a = {0.0, 0.0, 0.01};
    PidState st = pid_step(g, {0, 0, 0}, {5, 5, 5}, PidState{}, 0.001, 0.3).state;
    // A setpoint step changes e but not the measurement: no kick.
    CHECK(pid_step(g, {100, 100, 100}, {5, 5, 5}, st, 0.001, 0.3).out == Vec3{0, 0, 0});
    CHECK(pid_step(g, {0, 0, 0}, {6, 5, 5}, st, 0.001, 0.3).out[0] == doctest::Approx(-0.01 * 1.0 / 0.001));
  }
}

TEST_CASE("pid output is linear in the error") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-50.0, 50.0);
  PidGains g;
  g[Axis::roll] = {0.03, 0.4, 0.001};
  g[Axis::pitch] = {0.05, 0.1, 0.0004};
  g[Axis::yaw] = {0.02, 0.0, 0.0};
  PidState st;
  st.primed = true;
  st.prev_measurement = {1, -2, 3};
  for (int k = 0; k < 100; ++k) {
    const Vec3 m{d(rng), d(rng), d(rng)};
    const Vec3 e1{d(rng), d(rng), d(rng)}, e2{d(rng), d(rng), d(rng)};
    const Vec3 e12{e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2]};
    const double dt = 0.001, lim = 1e9;
    const Vec3 z = pid_step(g, {0, 0, 0}, m, st, dt, lim).out;
    const Vec3 a = pid_step(g, e1, m, st, dt, lim).out;
    const Vec3 b = pid_step(g, e2, m, st, dt, lim).out;
    const Vec3 c = pid_step(g, e12, m, st, dt, lim).out;
    for (std::size_t i = 0; i < kAxes; ++i) CHECK(c[i] - z[i] == doctest::Approx((a[i] - z[i]) + (b[i] - z[i])).epsilon(1e-12));
  }
}

TEST_CASE("pid mix geometry") {
  AirframeModel af;
  CHECK(pid_mix({0, 0, 0}, 0.4, af) == Vec4{0.4, 0.4, 0.4, 0.4});
  const Vec4 roll = pid_mix({0.1, 0, 0}, 0.5, af);
  for (std::size_t i = 0; i < kRotors; ++i) CHECK(roll[i] == doctest::Approx(0.5 + 0.1 * af.roll_sign[i]));
  CHECK(roll[0] + roll[2] == doctest::Approx(1.0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  for (int k = 0; k < 100; ++k) {
    const Vec4 u = pid_mix({d(rng), d(rng), d(rng)}, 0.5, af);
    CHECK((u[0] + u[1] + u[2] + u[3]) / 4.0 == doctest::Approx(0.5).epsilon(1e-14));
  }
  const Vec4 clamp = pid_mix({5, 0, 0}, 0.5, af);
  for (double v : clamp) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("paper gains settle a 100 deg/s roll step") {
  AirframeModel af;
  const PidGains g = PidGains::reference();
  CHECK(g[Axis::roll].kp == 0.032029);
  CHECK(g[Axis::yaw].kd == 0.0);
  BodyState body;
  PidState st;
  const Vec3 sp{100, 0, 0};
  double worst_tail = 0.0;
  for (int k = 0; k < 1500; ++k) {
    Vec3 e{};
    for (std::size_t a = 0; a < kAxes; ++a) e[a] = sp[a] - body.omega_body[a];
    const PidOutput p = pid_step(g, e, body.omega_body, st, af.dt, 0.3);
    st = p.state;
    const StepResult r = step(body, pid_mix(p.out, 0.5, af), af);
    REQUIRE(r.status == StepStatus::ok);
    body = r.state;
    if (k >= 1000) {
      for (std::size_t a = 0; a < kAxes; ++a) worst_tail = std::max(worst_tail, std::abs(sp[a] - body.omega_body[a]));
    }
  }
  CHECK(worst_tail < 25.0);
}

TEST_CASE("Ziegler-Nichols classic table") {
  const AxisGains g = zn_classic_gains(1.0, 2.0);
  CHECK(g.kp == doctest::Approx(0.6));
  CHECK(g.ki == doctest::Approx(0.6));
  CHECK(g.kd == doctest::Approx(0.15));
}

TEST_CASE("Ziegler-Nichols sweep") {
  AirframeModel af;
  ZnOptions coarse;
  const ZnResult a = zn_tune(af, Axis::roll, coarse);
  ZnOptions fine = coarse;
  fine.sweep_factor = std::sqrt(coarse.sweep_factor);
  const ZnResult b = zn_tune(af, Axis::roll, fine);
  CHECK(a.ultimate_gain > 0.0);
  CHECK(a.ultimate_period > 0.0);
  CHECK(std::abs(a.ultimate_gain - b.ultimate_gain) < 0.05 * b.ultimate_gain);
  const AxisGains t = zn_classic_gains(a.ultimate_gain, a.ultimate_period);
  CHECK(a.gains == t);

  const OscillationProbe p = probe_oscillation(af, Axis::roll, a.ultimate_gain, coarse);
  CHECK(p.peak_ratio >= coarse.ratio_low);
  CHECK(p.peak_ratio <= coarse.ratio_high);
  CHECK(p.periods >= coarse.min_periods);

  ZnOptions capped = coarse;
  capped.kp_limit = a.ultimate_gain / 4.0;
  CHECK_THROWS_AS(zn_tune(af, Axis::roll, capped), ZnTuneError);
}

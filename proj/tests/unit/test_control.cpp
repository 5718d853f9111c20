#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "orosoar/control.hpp"
#include "orosoar/tgl.hpp"

using namespace orosoar;
using namespace orosoar::control;
using analysis::make_tgl;
using analysis::tgl_from_coefficients;

namespace {

// Straight re-implementation of the discrete PID (no clamps active) used as
// the oracle for the small-signal examples.
struct ScalarPid {
  double kp, ki, kd, tau;
  double integ = 0.0, prev = 0.0, d = 0.0;
  bool first = true;
  double operator()(double e, double dt) {
    const double p = first ? e : prev;
    d = first ? 0.0 : (tau * d + (e - p)) / (tau + dt);
    integ += ki * (e + p) / 2.0 * dt;
    prev = e;
    first = false;
    return kp * e + integ + kd * d;
  }
};

PidGains wide(double kp, double ki, double kd, double tau = 0.0) { return {kp, ki, kd, 1e9, 1e9, tau}; }

}  // namespace

TEST(SignedDistance, Examples) {
  const auto vertical = make_tgl(0.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(signed_distance(vertical, -2.0, 5.0), 2.0);
  EXPECT_DOUBLE_EQ(signed_distance(vertical, 0.0, 3.0), 0.0);
  EXPECT_NEAR(signed_distance(tgl_from_coefficients(1.0, 1.0, 0.0), 1.0, 1.0), -std::sqrt(2.0), 1e-15);
}

TEST(SignedDistance, PositiveUpstreamForRandomLines) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-10.0, 10.0), ang(-1.5, 1.5), gap(1e-3, 5.0);
  for (int i = 0; i < 5000; ++i) {
    const auto tgl = make_tgl(u(rng), u(rng), ang(rng));
    const double z = u(rng);
    const double x = tgl.x_at(z) - gap(rng);
    ASSERT_GT(signed_distance(tgl, x, z), 0.0);
    ASSERT_LT(signed_distance(tgl, tgl.x_at(z) + gap(rng), z), 0.0);
  }
}

TEST(SignedDistance, InvariantAlongTheLine) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-10.0, 10.0), ang(-1.5, 1.5);
  for (int i = 0; i < 2000; ++i) {
    const auto tgl = make_tgl(u(rng), u(rng), ang(rng));
    const double x = u(rng), z = u(rng), s = u(rng);
    const double d0 = signed_distance(tgl, x, z);
    ASSERT_NEAR(signed_distance(tgl, x - s * tgl.B, z + s * tgl.A), d0, 1e-12);
  }
}

TEST(PidStep, ProportionalOnly) {
  const PidResult r = pid_step(wide(2.0, 0.0, 0.0), PidState{}, 0.5, 0.02);
  EXPECT_DOUBLE_EQ(r.output, 1.0);
  EXPECT_EQ(r.state.integral, 0.0);
  EXPECT_EQ(r.state.derivative, 0.0);
  EXPECT_EQ(r.state.prev_error, 0.5);
}

TEST(PidStep, IntegralPinnedAtLimit) {
  PidGains g{0.0, 1.0, 0.0, 0.1, 10.0, 0.0};
  PidState s;
  for (int i = 0; i < 200; ++i) s = pid_step(g, s, 5.0, 0.05).state;
  EXPECT_DOUBLE_EQ(s.integral, 0.1);
}

TEST(PidStep, DerivativeOnSecondStep) {
  const PidGains g = wide(1.0, 0.0, 0.5, 0.0);
  PidState s = pid_step(g, PidState{}, 0.0, 0.1).state;
  EXPECT_NEAR(pid_step(g, s, 1.0, 0.1).output, 6.0, 1e-12);
}

TEST(PidStep, RejectsNonPositiveDt) {
  try {
    pid_step(wide(1, 0, 0), PidState{}, 1.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDt);
  }
}

TEST(PidStep, LinearWithoutIntegralOrDerivative) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double e = u(rng), a = u(rng);
    const PidGains g = wide(1.7, 0.0, 0.0);
    ASSERT_DOUBLE_EQ(pid_step(g, PidState{}, a * e, 0.02).output, a * pid_step(g, PidState{}, e, 0.02).output);
  }
}

TEST(PidStep, AntiWindupBoundOnRandomSequences) {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-10.0, 10.0), gain(0.0, 5.0), lim(0.01, 2.0), dt(0.001, 0.2);
  for (int trial = 0; trial < 200; ++trial) {
    const PidGains g{gain(rng), gain(rng), gain(rng), lim(rng), lim(rng), 0.1 * gain(rng)};
    PidState s;
    for (int k = 0; k < 500; ++k) {
      const PidResult r = pid_step(g, s, u(rng), dt(rng));
      ASSERT_LE(std::abs(r.state.integral), g.integrator_limit);
      ASSERT_LE(std::abs(r.output), g.output_limit);
      s = r.state;
    }
  }
}

TEST(PidStep, IntegralFrozenWhileSaturated) {
  const PidGains g{1.0, 1.0, 0.0, 100.0, 0.5, 0.0};
  PidState s;
  for (int i = 0; i < 50; ++i) s = pid_step(g, s, 2.0, 0.1).state;
  EXPECT_EQ(s.integral, 0.0);
}

TEST(PidStep, Deterministic) {
  const PidGains g{0.3, 0.7, 0.2, 0.4, 0.9, 0.05};
  std::vector<double> a, b;
  for (auto* out : {&a, &b}) {
    PidState s;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 300; ++k) {
      const PidResult r = pid_step(g, s, u(rng), 0.02);
      out->push_back(r.output);
      s = r.state;
    }
  }
  EXPECT_EQ(a, b);
}

TEST(PitchSetpoint, ZeroErrorHistoryGivesTrim) {
  SoaringControllerConfig cfg;
  cfg.theta0 = 0.0731;
  cfg.set_pitch_window(0.35);
  PidState s;
  for (int k = 0; k < 1000; ++k) {
    const PidResult r = pitch_setpoint(cfg, s, 0.0, 0.02);
    ASSERT_EQ(r.output, cfg.theta0);
    s = r.state;
  }
}

TEST(PitchSetpoint, UpstreamPitchesUp) {
  SoaringControllerConfig cfg;
  EXPECT_GT(pitch_setpoint(cfg, PidState{}, 0.4, 0.02).output, cfg.theta0);
  EXPECT_LT(pitch_setpoint(cfg, PidState{}, -0.4, 0.02).output, cfg.theta0);
}

TEST(PitchSetpoint, StepMatchesScalarPid) {
  SoaringControllerConfig cfg;
  cfg.theta0 = 0.02;
  cfg.set_pitch_window(0.35);
  cfg.pitch_gains = {0.1, 0.02, 0.05, 1.0, 1.0, 0.0};
  ScalarPid oracle{0.1, 0.02, 0.05, 0.0};
  PidState s;
  for (int k = 0; k < 3; ++k) {
    const PidResult r = pitch_setpoint(cfg, s, 0.5, 0.05);
    EXPECT_NEAR(r.output, cfg.theta0 + oracle(0.5, 0.05), 1e-15);
    s = r.state;
  }
}

TEST(PitchSetpoint, ClampedToWindow) {
  SoaringControllerConfig cfg;
  cfg.pitch_gains = wide(10.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(pitch_setpoint(cfg, PidState{}, 5.0, 0.02).output, cfg.pitch_max);
  EXPECT_DOUBLE_EQ(pitch_setpoint(cfg, PidState{}, -5.0, 0.02).output, cfg.pitch_min);
}

TEST(ElevatorSetpoint, ZeroSaturatedAndSmallSignal) {
  SoaringControllerConfig cfg;
  EXPECT_EQ(elevator_setpoint(cfg, PidState{}, 0.0, 0.02).output, 0.0);

  PidState s;
  for (int k = 0; k < 100; ++k) {
    const PidResult r = elevator_setpoint(cfg, s, 3.0, 0.02);
    EXPECT_EQ(r.output, 1.0);
    EXPECT_EQ(r.state.integral, s.integral);
    s = r.state;
  }

  PidState a, b;
  for (double e : {0.01, 0.015, -0.004}) {
    const PidResult ra = elevator_setpoint(cfg, a, e, 0.02);
    const PidResult rb = pid_step(cfg.elevator_gains, b, e, 0.02);
    EXPECT_EQ(ra.output, rb.output);
    a = ra.state;
    b = rb.state;
  }
}

TEST(RollSetpoint, Behaviour) {
  const PidGains g{0.5, 0.8, 0.05, 0.6, 0.6, 0.02};
  EXPECT_EQ(roll_setpoint(g, PidState{}, 0.0, 0.02).output, 0.0);
  PidState s;
  double prev = -1.0;
  for (int k = 0; k < 400; ++k) {
    const PidResult r = roll_setpoint(g, s, 0.1, 0.02);
    EXPECT_GE(r.output, prev);
    prev = r.output;
    s = r.state;
  }
  // the integrator stops just short of the clamp
  EXPECT_GT(prev, 0.95 * g.output_limit);
  EXPECT_LE(prev, g.output_limit);
  EXPECT_EQ(roll_setpoint(g, PidState{}, 0.2, 0.02).output, pid_step(g, PidState{}, 0.2, 0.02).output);
}

TEST(YawError, Examples) {
  EXPECT_EQ(yaw_error(0.0, 5.0, 0.0), 0.0);
  EXPECT_NEAR(yaw_error(5.0, 5.0, 0.0), std::numbers::pi / 4, 1e-15);
  EXPECT_NEAR(yaw_error(5.0, 5.0, 0.25), std::numbers::pi / 4 - 0.25, 1e-15);
  try {
    yaw_error(1.0, 0.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveR);
  }
}

TEST(YawSetpoint, ProportionalDerivativeOnly) {
  const PidGains g{1.2, 3.0, 0.4, 1.0, 10.0, 0.0};
  PidGains pd = g;
  pd.ki = 0.0;
  PidState a, b;
  for (double e : {0.1, 0.3, -0.2, 0.05}) {
    const PidResult ra = yaw_setpoint(g, a, e, 0.02);
    const PidResult rb = pid_step(pd, b, e, 0.02);
    EXPECT_EQ(ra.output, rb.output);
    EXPECT_EQ(ra.state.integral, 0.0);
    a = ra.state;
    b = rb.state;
  }
}

TEST(Gains, Validation) {
  EXPECT_THROW((PidGains{1, 0, 0, 0.0, 1.0, 0.0}.validate()), Error);
  EXPECT_THROW((PidGains{1, 0, 0, 1.0, 1.0, -1.0}.validate()), Error);
  SoaringControllerConfig cfg;
  cfg.theta0 = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

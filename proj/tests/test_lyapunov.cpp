#include <gtest/gtest.h>

#include <cmath>

#include "todsim/lyapunov.hpp"

using namespace todsim;

namespace {

SampledSignal sample_function(double (*f)(double), double lo, double hi, int steps) {
  SampledSignal s;
  const double dt = (hi - lo) / steps;
  for (int k = 0; k <= steps; ++k) s.push(lo + k * dt, f(lo + k * dt));
  return s;
}

double sine(double t) { return std::sin(t); }
double square(double t) { return t * t; }
double one(double) { return 1.0; }

StabilityProblem problem(int slaves) {
  StabilityProblem p;
  p.slaves = slaves;
  p.slave.assign(static_cast<std::size_t>(slaves), ManipulatorGains{});
  p.p_m = p.p_s = 0.125;
  return p;
}

LyapunovSample zero_sample(int slaves, double t) {
  LyapunovSample s;
  s.t = t;
  s.delay_master = s.delay_slave = 0.025;
  const auto n = static_cast<std::size_t>(slaves);
  s.energy_slave.assign(n, 0.0);
  s.e_slave.assign(n, JointVector::Zero());
  s.x_slave.assign(n, JointVector::Zero());
  s.xd_slave.assign(n, JointVector::Zero());
  s.deviation_slave_before.assign(n, JointVector::Zero());
  s.deviation_slave_after.assign(n, JointVector::Zero());
  return s;
}

}  // namespace

TEST(SampledSignal, TrapezoidOnQuadratic) {
  const SampledSignal s = sample_function(square, 0.0, 1.0, 100);
  // Trapezoid error for t^2 on a uniform grid is exactly dt^2 (b - a) / 6.
  EXPECT_NEAR(s.integral(0.0, 1.0), 1.0 / 3.0 + 1e-4 / 6.0, 1e-14);
}

TEST(SampledSignal, SecondOrderConvergence) {
  const double exact = 1.0 - std::cos(2.0);
  const double e1 = std::abs(sample_function(sine, 0.0, 2.0, 100).integral(0.0, 2.0) - exact);
  const double e2 = std::abs(sample_function(sine, 0.0, 2.0, 200).integral(0.0, 2.0) - exact);
  const double e4 = std::abs(sample_function(sine, 0.0, 2.0, 400).integral(0.0, 2.0) - exact);
  EXPECT_NEAR(e1 / e2, 4.0, 0.01);
  EXPECT_NEAR(e2 / e4, 4.0, 0.01);
}

TEST(SampledSignal, InterpolatesAtLowerLimitAndIsZeroBeforeFirstNode) {
  const SampledSignal lin = sample_function([](double t) { return t; }, 1.0, 3.0, 20);
  EXPECT_NEAR(lin.integral(1.55, 3.0), 0.5 * (9.0 - 1.55 * 1.55), 1e-13);
  EXPECT_NEAR(lin.integral(0.0, 3.0), lin.integral(1.0, 3.0), 1e-15);
  EXPECT_EQ(lin.integral(-2.0, 0.5), 0.0);
}

TEST(SampledSignal, RepeatedTimesEncodeJumps) {
  SampledSignal s;
  s.push(0.0, 0.0);
  s.push(1.0, 0.0);
  s.push(1.0, 1.0);
  s.push(2.0, 1.0);
  EXPECT_DOUBLE_EQ(s.integral(0.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(s.integral(0.5, 1.5), 0.5);
}

TEST(SampledSignal, RampIntegralEqualsDoubleIntegral) {
  const SampledSignal c = sample_function(one, 0.0, 2.0, 200);
  EXPECT_NEAR(c.ramp_integral(1.5, 2.0), 0.125, 1e-14);

  // int_{-H}^0 int_{t+v}^t sin(s) ds dv by nested midpoint sums.
  const double t = 2.0, H = 0.3;
  const int n = 2000;
  double oracle = 0.0;
  for (int a = 0; a < n; ++a) {
    const double v = -H + (a + 0.5) * H / n;
    oracle += (std::cos(t + v) - std::cos(t)) * H / n;
  }
  const SampledSignal s = sample_function(sine, 0.0, 2.0, 2000);
  EXPECT_NEAR(s.ramp_integral(t - H, t), oracle, 1e-7);
}

TEST(StepSignal, ExactIntegrals) {
  StepSignal s(2.0);
  s.set(1.0, 3.0);
  s.set(2.0, 5.0);
  EXPECT_DOUBLE_EQ(s.integral(0.0, 3.0), 10.0);
  EXPECT_DOUBLE_EQ(s.integral(0.5, 1.5), 2.5);
  EXPECT_EQ(s.value_at(0.5), 2.0);
  EXPECT_EQ(s.value_at(1.0), 3.0);
  EXPECT_EQ(s.value_at(7.0), 5.0);
}

TEST(Monitor, StationaryZeroStateHasZeroFunctional) {
  const StabilityProblem p = problem(2);
  LyapunovMonitor mon(p, make_isotropic({1, 1, 10, 1, 2, 0.1}, 2, 2), {JointVector::Zero(), JointVector::Zero()});
  const ResetEvent ev{{JointVector::Zero(), JointVector::Zero()}, 0};
  for (int k = 0; k <= 100; ++k) {
    const LyapunovSample s = zero_sample(2, k * 1e-3);
    mon.advance(s, k % 20 == 0 ? &ev : nullptr);
  }
  mon.finalize();
  for (const auto& r : mon.records()) {
    EXPECT_EQ(r.before.total(), 0.0);
    EXPECT_EQ(r.after.total(), 0.0);
  }
  EXPECT_EQ(mon.reset_report().max_jump, 0.0);
}

TEST(Monitor, MasterEnergyWeighting) {
  const StabilityProblem p = problem(3);
  LyapunovMonitor mon(p, make_isotropic({}, 3, 2), std::vector<JointVector>(3, JointVector::Zero()));
  LyapunovSample s = zero_sample(3, 0.0);
  s.energy_master = 0.5;  // r = (1, 0), M = I, theta~ = 0
  const ResetEvent ev{std::vector<JointVector>(3, JointVector::Zero()), 0};
  const auto& rec = mon.advance(s, &ev);
  EXPECT_DOUBLE_EQ(rec.after.adaptive, 3.0 / (2.0 * p.master.lambda) * 0.5);
  EXPECT_DOUBLE_EQ(rec.after.total(), rec.after.adaptive);
}

TEST(Monitor, FlagsViolatedPreconditions) {
  const StabilityProblem p = problem(2);
  // U far above Q/(N-1) makes Omega indefinite.
  LyapunovMonitor mon(p, make_isotropic({1, 1, 10, 100, 1, 0.1}, 2, 2), {JointVector::Zero(), JointVector::Zero()});
  EXPECT_FALSE(mon.reset_preconditions());
  const ResetEvent ev{{JointVector(0.1, 0.0), JointVector(0.2, 0.0)}, 1};
  for (int k = 0; k <= 40; ++k) mon.advance(zero_sample(2, k * 1e-3), k % 20 == 0 ? &ev : nullptr);
  mon.finalize();
  const ResetReport rr = mon.reset_report();
  EXPECT_FALSE(rr.preconditions_hold);
  EXPECT_FALSE(rr.passed);
  EXPECT_FALSE(rr.note.empty());
  const DecayReport dr = mon.decay_report();
  EXPECT_FALSE(dr.preconditions_hold);
  EXPECT_FALSE(dr.note.empty());
}

TEST(Monitor, RejectsMisuse) {
  const StabilityProblem p = problem(2);
  LyapunovMonitor mon(p, make_isotropic({}, 2, 2), {JointVector::Zero(), JointVector::Zero()});
  EXPECT_THROW(mon.advance(zero_sample(2, 0.0), nullptr), std::logic_error);
  EXPECT_THROW(mon.advance(zero_sample(3, 0.0), nullptr), std::invalid_argument);
}

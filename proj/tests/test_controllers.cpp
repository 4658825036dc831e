#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "todsim/controllers.hpp"
#include "todsim/observers.hpp"

using namespace todsim;

namespace {

ControllerState make_controller(const RobotModel& m) {
  ControllerState c;
  c.theta_hat = m.true_parameters();
  c.Gamma = Eigen::MatrixXd::Identity(c.theta_hat.size(), c.theta_hat.size());
  return c;
}

}  // namespace

TEST(Observers, MasterEquilibrium) {
  ObserverGains g;
  const ObserverState obs{JointVector(0.3, 0.1), JointVector::Zero()};
  const std::vector<JointVector> received{JointVector(0.3, 0.1), JointVector(0.3, 0.1)};
  EXPECT_TRUE(master_observer_accel(g, obs, obs.x, received).isZero(0.0));
}

TEST(Observers, MasterArithmetic) {
  ObserverGains g;
  g.alpha = 1.0;
  g.kappa = 2.0;
  g.beta = 3.0;
  const ObserverState obs{JointVector(1.0, 0.0), JointVector(0.5, 0.0)};
  const std::vector<JointVector> received{JointVector(1.0, 0.0), JointVector(-1.0, 0.0)};
  const JointVector a = master_observer_accel(g, obs, JointVector(1.0, 0.0), received);
  EXPECT_DOUBLE_EQ(a[0], -3.5);
  EXPECT_DOUBLE_EQ(a[1], 0.0);
}

TEST(Observers, MasterJumpIsBetaOverNTimesStep) {
  ObserverGains g;
  const ObserverState obs{JointVector(0.2, -0.1), JointVector(0.1, 0.3)};
  std::vector<JointVector> received(4, JointVector(0.1, 0.1));
  const JointVector before = master_observer_accel(g, obs, JointVector::Zero(), received);
  received[2] += JointVector(0.4, -0.8);
  const JointVector after = master_observer_accel(g, obs, JointVector::Zero(), received);
  EXPECT_LT((after - before - g.beta / 4.0 * JointVector(0.4, -0.8)).norm(), 1e-14);
}

TEST(Observers, SlaveEquilibriumAndMirror) {
  ObserverGains g;
  g.offset = JointVector(0.3, 0.0);
  const ObserverState obs{JointVector(0.5, 0.2), JointVector::Zero()};
  EXPECT_TRUE(slave_observer_accel(g, obs, obs.x, JointVector(0.2, 0.2)).isZero(1e-15));

  ObserverGains m;
  const ObserverState s{JointVector(0.7, -0.4), JointVector(0.2, 0.1)};
  const JointVector q(0.1, 0.2), remote(-0.3, 0.5);
  const std::vector<JointVector> one{remote};
  EXPECT_EQ(slave_observer_accel(m, s, q, remote), master_observer_accel(m, s, q, one));
}

TEST(Observers, SlaveRampTrackingLag) {
  // With the plant locked to the observer, x_s - offset lags a ramp by alpha v / beta.
  ObserverGains g;
  g.alpha = 6.0;
  g.beta = 3.0;
  g.offset = JointVector(0.2, -0.1);
  const JointVector v(0.5, -0.25);
  ObserverState s{g.offset, JointVector::Zero()};
  const double dt = 1e-3;
  auto accel = [&](const ObserverState& o, double t) { return slave_observer_accel(g, o, o.x, v * t); };
  double t = 0.0;
  for (int k = 0; k < 30000; ++k, t += dt) {
    const JointVector a1 = accel(s, t);
    const ObserverState s2{s.x + 0.5 * dt * s.xd, s.xd + 0.5 * dt * a1};
    const JointVector a2 = accel(s2, t + 0.5 * dt);
    const ObserverState s3{s.x + 0.5 * dt * s2.xd, s.xd + 0.5 * dt * a2};
    const JointVector a3 = accel(s3, t + 0.5 * dt);
    const ObserverState s4{s.x + dt * s3.xd, s.xd + dt * a3};
    const JointVector a4 = accel(s4, t + dt);
    s.x += dt / 6 * (s.xd + 2 * s2.xd + 2 * s3.xd + s4.xd);
    s.xd += dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
  }
  const JointVector lag = (s.x - g.offset) - v * t;
  EXPECT_LT((lag + g.alpha / g.beta * v).norm(), 1e-6);
  EXPECT_LT((s.xd - v).norm(), 1e-6);
}

TEST(Controllers, SyncVariables) {
  const PlantState p{JointVector(0.5, -0.5), JointVector(1.0, 2.0)};
  const ObserverState o{JointVector::Zero(), JointVector::Zero()};
  const SyncVariables s = sync_vars(2.0, p, o);
  EXPECT_EQ(s.r, JointVector(2.0, 1.0));

  const PlantState at{JointVector(0.3, 0.4), JointVector(0.7, -0.1)};
  const ObserverState same{at.q, JointVector::Zero()};
  const SyncVariables z = sync_vars(5.0, at, same);
  EXPECT_TRUE(z.e.isZero(0.0));
  EXPECT_EQ(z.r, at.qd);
  EXPECT_TRUE(sync_vars(5.0, PlantState{at.q, JointVector::Zero()}, same).r.isZero(0.0));
}

TEST(Controllers, ControlRegressorIdentity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RobotModel m;
  m.g = 9.81;
  const double lambda = 3.0;
  for (int k = 0; k < 1000; ++k) {
    const PlantState p{JointVector(u(rng), u(rng)), JointVector(u(rng), u(rng))};
    const ObserverState o{JointVector(u(rng), u(rng)), JointVector(u(rng), u(rng))};
    const SyncVariables s = sync_vars(lambda, p, o);
    const Regressor Y = control_regressor(m, p, s, lambda);
    const JointVector expect = lambda * mass_matrix(m, p.q) * s.ed + lambda * coriolis_matrix(m, p.q, p.qd) * s.e - gravity_vector(m, p.q);
    EXPECT_LT((Y * m.true_parameters() - expect).norm(), 1e-10);
  }
}

TEST(Controllers, ControlRegressorLinearInLambdaWithoutGravity) {
  const RobotModel m;
  const PlantState p{JointVector(0.4, 0.2), JointVector(0.3, -0.6)};
  const ObserverState o{JointVector(0.1, 0.5), JointVector(0.2, 0.1)};
  const JointVector y1 = control_regressor(m, p, sync_vars(2.0, p, o), 2.0) * m.true_parameters();
  const JointVector y2 = control_regressor(m, p, sync_vars(2.0, p, o), 4.0) * m.true_parameters();
  EXPECT_LT((y2 - 2.0 * y1).norm(), 1e-12);
}

TEST(Controllers, HeldTorque) {
  ControllerState c = make_controller(RobotModel{});
  EXPECT_TRUE(torque_scheme_a(c).isZero(0.0));
  c.kappa = 20.0;
  capture_control_update(c, JointVector(0.5, 0.0), JointVector(0.1, 0.0), 0.0);
  const JointVector tau = torque_scheme_a(c);
  EXPECT_DOUBLE_EQ(tau[0], -2.5);
  EXPECT_DOUBLE_EQ(tau[1], 0.0);
  EXPECT_EQ(torque_scheme_a(c), tau);
}

TEST(Controllers, LiveTorque) {
  const RobotModel m;
  ControllerState c = make_controller(m);
  const PlantState p{JointVector(0.2, 0.3), JointVector(0.4, -0.2)};
  const ObserverState o{p.q, p.qd};
  const SyncVariables s = sync_vars(c.lambda, p, o);
  const JointVector tau = torque_scheme_b(c, s, control_regressor(m, p, s, c.lambda));
  EXPECT_LT((tau + c.kappa * p.qd).norm(), 1e-12);

  const PlantState rest{JointVector(0.2, 0.3), JointVector::Zero()};
  const SyncVariables z = sync_vars(c.lambda, rest, ObserverState{rest.q, JointVector::Zero()});
  EXPECT_TRUE(torque_scheme_b(c, z, control_regressor(m, rest, z, c.lambda)).isZero(0.0));
}

TEST(Controllers, AdaptationStep) {
  ControllerState c = make_controller(RobotModel{});
  const Eigen::VectorXd start = c.theta_hat;
  Regressor Y = Regressor::Zero(2, 3);
  adapt_step(c, Y, JointVector::Zero(), 1e-3);
  EXPECT_EQ(c.theta_hat, start);
  Y(0, 0) = 1.0;
  adapt_step(c, Y, JointVector(1.0, 0.0), 1e-3);
  EXPECT_DOUBLE_EQ(c.theta_hat[0], start[0] + 1e-3);
  EXPECT_EQ(c.theta_hat[1], start[1]);
  EXPECT_EQ(c.theta_hat[2], start[2]);
}

TEST(Controllers, ControlTriggerRightAfterCaptureDoesNotFire) {
  ControllerState c = make_controller(RobotModel{});
  const JointVector Yth(0.3, -0.2), r(0.4, 0.3);
  capture_control_update(c, Yth, r, 1.0);
  const TriggerDecision d = evaluate_control_trigger(c, Yth, r, 1.0);
  EXPECT_FALSE(d.fire);
  const auto& p = c.control_trigger;
  EXPECT_NEAR(d.value, -(p.gamma / 2) * r.norm() - p.epsilon * std::exp(-p.nu), 1e-15);
}

TEST(Controllers, ControlTriggerBoundaryFires) {
  ControllerState c = make_controller(RobotModel{});
  c.control_trigger.epsilon = 0.125;
  const TriggerDecision d = evaluate_control_trigger(c, JointVector(0.125, 0.0), JointVector::Zero(), 0.0);
  EXPECT_EQ(d.value, 0.0);
  EXPECT_TRUE(d.fire);
}

TEST(Controllers, ControlTriggerTimingMatchesRootSearch) {
  // Ramp in Y theta with r frozen: the first firing solves a (t - t0) = (gamma/2)|r| + eps e^{-nu t}.
  ControllerState c = make_controller(RobotModel{});
  const JointVector r(0.05, 0.0);
  const double a = 2.0, t0 = 0.5;
  capture_control_update(c, JointVector::Zero(), r, t0);
  const auto& p = c.control_trigger;
  auto g = [&](double t) { return a * (t - t0) - (p.gamma / 2) * r.norm() - p.epsilon * std::exp(-p.nu * t); };
  double lo = t0, hi = t0 + 10.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= 0 ? hi : lo) = mid;
  }
  const double dt = 1e-4;
  double fired = -1.0;
  for (int k = 1; k < 200000 && fired < 0; ++k) {
    const double t = t0 + k * dt;
    if (evaluate_control_trigger(c, JointVector(a * (t - t0), 0.0), r, t).fire) fired = t;
  }
  ASSERT_GT(fired, 0.0);
  EXPECT_GE(fired, hi - 1e-12);
  EXPECT_LT(fired - hi, dt + 1e-12);
}

TEST(Controllers, CommTriggerRightAfterSamplingDoesNotFire) {
  const CommTriggerParams p;
  const ObserverState o{JointVector(0.2, 0.1), JointVector(0.3, 0.0)};
  EXPECT_FALSE(trigger_scheme_b(p, 4.0, o, o.x, 2.0, 0.125).fire);
}

TEST(Controllers, CommTriggerBoundaryFires) {
  CommTriggerParams p;
  p.epsilon = 0.0625;
  const ObserverState o{JointVector(0.25, 0.0), JointVector::Zero()};
  const TriggerDecision d = trigger_scheme_b(p, 4.0, o, JointVector::Zero(), 0.0, 0.125);
  EXPECT_EQ(d.value, 0.0);
  EXPECT_TRUE(d.fire);
}

TEST(Controllers, CommTriggerIntervalUnderConstantVelocity) {
  // |delta| = |v| dt grows linearly, so firing happens once
  // |v|^2 dt^2 = (2 c (1 - p)/beta) |v|^2 + eps' e^{-nu' t}.
  CommTriggerParams p;
  const double beta = 4.0, pch = 0.125, t0 = 1.0;
  const JointVector v(0.6, -0.8);
  const JointVector sample(0.1, 0.2);
  auto g = [&](double t) {
    return v.squaredNorm() * (t - t0) * (t - t0) - 2 * p.c * (1 - pch) / beta * v.squaredNorm() - p.epsilon * std::exp(-p.nu * t);
  };
  double lo = t0, hi = t0 + 10.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= 0 ? hi : lo) = mid;
  }
  const double static_lower = std::sqrt(2 * p.c * (1 - pch) / beta);
  EXPECT_GT(hi - t0, static_lower);

  const double dt = 1e-4;
  double fired = -1.0;
  for (int k = 1; k < 100000 && fired < 0; ++k) {
    const double t = t0 + k * dt;
    const ObserverState o{sample + v * (t - t0), v};
    if (trigger_scheme_b(p, beta, o, sample, t, pch).fire) fired = t;
  }
  ASSERT_GT(fired, 0.0);
  EXPECT_GE(fired, hi - 1e-9);
  EXPECT_LT(fired - hi, dt + 1e-9);
}

TEST(Controllers, ZenoBound) {
  EXPECT_NEAR(zeno_bound(0.1, 0.01, 10.0, 0.0), 0.01, 1e-15);
  EXPECT_LT(zeno_bound(0.1, 0.01, 10.0, 5000.0), 1e-23);
  EXPECT_GT(zeno_bound(0.1, 0.01, 10.0, 1.0), zeno_bound(0.1, 0.01, 10.0, 2.0));
  EXPECT_THROW(zeno_bound(0.1, 0.01, 0.0, 0.0), std::invalid_argument);
}

TEST(Controllers, ValidateRequiresKappaAboveGamma) {
  ControllerState c = make_controller(RobotModel{});
  EXPECT_NO_THROW(c.validate());
  c.kappa = c.control_trigger.gamma;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

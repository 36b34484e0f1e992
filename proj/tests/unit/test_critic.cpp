#include <cmath>

#include <gtest/gtest.h>

#include <edp/critic.hpp>
#include <edp/errors.hpp>
#include <edp/optim.hpp>

#include "oracles.hpp"

namespace edp {
namespace {

const NetConfig kTiny{6, 2, Activation::kMish};

void set_constant(CriticNet& net, double c) {
  auto& head = net.params().layers.back();
  head.weight.setZero();
  head.bias.setConstant(c);
}

// ReLU critic computing exactly Q(s, a) = a[0] for |a| < 10.
CriticNet linear_in_action(int sd, int ad) {
  Rng rng(1);
  CriticNet q(sd, ad, NetConfig{4, 2, Activation::kRelu}, rng);
  auto& L = q.params().layers;
  for (auto& l : L) {
    l.weight.setZero();
    l.bias.setZero();
  }
  L[0].weight(0, sd) = 1.0;
  L[0].bias(0) = 10.0;
  L[1].weight(0, 0) = 1.0;
  L[2].weight(0, 0) = 1.0;
  L[3].weight(0, 0) = 1.0;
  L[3].bias(0) = -10.0;
  return q;
}

TransitionBatch batch_of(int sd, int ad, int n, Rng& rng) {
  TransitionBatch b;
  b.s = standard_normal(sd, n, rng);
  b.a = 0.5 * standard_normal(ad, n, rng);
  b.r = standard_normal(n, rng).transpose();
  b.s_next = standard_normal(sd, n, rng);
  b.done = RowVector::Zero(n);
  for (int j = 0; j < n; j += 3) b.done(j) = 1.0;
  return b;
}

TEST(MinQ, Examples) {
  Rng rng(1);
  DoubleQ dq(2, 1, kTiny, rng);
  set_constant(dq.q1, 2.0);
  set_constant(dq.q2, 3.0);
  Matrix s = Matrix::Zero(2, 3), a = Matrix::Zero(1, 3);
  EXPECT_EQ(min_q(dq, s, a, false)(0), 2.0);
  std::swap(dq.q1, dq.q2);
  EXPECT_EQ(min_q(dq, s, a, false)(1), 2.0);
  set_constant(dq.q2, 5.0);
  EXPECT_EQ(min_q(dq, s, a, false)(2), 3.0);
  // Targets start as copies.
  DoubleQ fresh(2, 1, kTiny, rng);
  Matrix ss = standard_normal(2, 4, rng), aa = standard_normal(1, 4, rng);
  EXPECT_EQ((min_q(fresh, ss, aa, true) - min_q(fresh, ss, aa, false)).norm(), 0.0);
  EXPECT_THROW(min_q(fresh, ss, standard_normal(2, 4, rng), false), ShapeError);
}

TEST(TdLoss, TargetExamples) {
  Rng rng(2);
  DoubleQ dq(1, 1, kTiny, rng);
  set_constant(dq.q1_target, 2.0);
  set_constant(dq.q2_target, 5.0);
  set_constant(dq.q1, 0.0);
  set_constant(dq.q2, 0.0);
  TransitionBatch b;
  b.s = b.s_next = Matrix::Zero(1, 2);
  b.a = Matrix::Zero(1, 2);
  b.r = RowVector::Ones(2);
  b.done = RowVector::Zero(2);
  b.done(1) = 1.0;
  RowVector y = bootstrap_targets(b, min_q(dq, b.s_next, b.a, true), 0.99);
  EXPECT_NEAR(y(0), 2.98, 1e-12);
  EXPECT_EQ(y(1), 1.0);
  CriticLoss l = td_loss(dq, b, b.a, 0.99);
  EXPECT_NEAR(l.value, (2 * 2.98 * 2.98 + 2 * 1.0) / 2.0, 1e-12);
  EXPECT_THROW(bootstrap_targets(b, y, 1.0), ParameterError);
}

TEST(TdLoss, SymmetricInCritics) {
  Rng rng(3);
  DoubleQ dq(2, 2, kTiny, rng);
  TransitionBatch b = batch_of(2, 2, 16, rng);
  Matrix a_next = 0.5 * standard_normal(2, 16, rng);
  const double v1 = td_loss(dq, b, a_next, 0.9).value;
  DoubleQ sw = dq;
  std::swap(sw.q1, sw.q2);
  std::swap(sw.q1_target, sw.q2_target);
  EXPECT_NEAR(td_loss(sw, b, a_next, 0.9).value, v1, 1e-12);
}

TEST(TdLoss, GradientMatchesFiniteDifferencesAndStopsAtTargets) {
  Rng rng(4);
  DoubleQ dq(2, 2, kTiny, rng);
  // Targets differ from the online nets.
  for (Index i = 0; i < dq.q1_target.params().size(); ++i) {
    dq.q1_target.params().at(i) += 0.1 * std::sin(i);
    dq.q2_target.params().at(i) -= 0.1 * std::cos(i);
  }
  TransitionBatch b = batch_of(2, 2, 8, rng);
  Matrix a_next = 0.5 * standard_normal(2, 8, rng);
  CriticLoss l = td_loss(dq, b, a_next, 0.95);
  auto f = [&] { return td_loss(dq, b, a_next, 0.95).value; };
  EXPECT_LT(testing::fd_compare(dq.q1.params(), f, l.grad_q1).max_rel_error, 1e-3);
  EXPECT_LT(testing::fd_compare(dq.q2.params(), f, l.grad_q2).max_rel_error, 1e-3);
  // Targets enter the value but not the reported gradients.
  dq.q1_target.params().layers.back().bias(0) += 1.0;
  CriticLoss moved = td_loss(dq, b, a_next, 0.95);
  EXPECT_NE(moved.value, l.value);
  EXPECT_TRUE(moved.grad_q1.same_shape(dq.q1.params()));
}

TEST(TdLoss, PolicyDrawnNextActionsAndMaxBackup) {
  Rng rng(5);
  DoubleQ dq(1, 1, kTiny, rng);
  DiffusionPolicy pol(NoiseNet(1, 1, kTiny, rng),
                      NoiseSchedule::build(ScheduleVariant::kVariancePreserving, 20, 0.1, 20.0),
                      1.0);
  TransitionBatch b = batch_of(1, 1, 32, rng);
  SamplerConfig sc;
  Rng r1(9), r2(9);
  CriticLoss a = td_loss(dq, pol, b, sc, 0.9, r1, 1);
  // a' is drawn for live columns only; terminal ones never bootstrap.
  std::vector<Index> live;
  for (Index j = 0; j < b.done.size(); ++j) {
    if (b.done(j) == 0.0) live.push_back(j);
  }
  Matrix a_next = Matrix::Zero(1, b.done.size());
  a_next(Eigen::all, live) = eval_sample(pol, b.s_next(Eigen::all, live), sc, r2);
  EXPECT_NEAR(td_loss(dq, b, a_next, 0.9).value, a.value, 1e-12);
  // All terminal: no sampling at all.
  b.done.setOnes();
  reset_noise_net_evaluations();
  td_loss(dq, pol, b, sc, 0.9, r1, 1);
  EXPECT_EQ(noise_net_evaluations(), 0u);
  EXPECT_THROW(td_loss(dq, pol, b, sc, 0.9, r1, 0), ParameterError);
}

TEST(TdLoss, TabularFixedPoint) {
  // One state, one action, r = 1: Q converges to 1 / (1 - gamma).
  const double gamma = 0.9;
  Rng rng(6);
  DoubleQ dq(1, 1, NetConfig{8, 2, Activation::kMish}, rng);
  AdamState o1 = AdamState::for_params(dq.q1.params());
  AdamState o2 = AdamState::for_params(dq.q2.params());
  TransitionBatch b;
  b.s = b.s_next = Matrix::Zero(1, 4);
  b.a = Matrix::Zero(1, 4);
  b.r = RowVector::Ones(4);
  b.done = RowVector::Zero(4);
  for (int it = 0; it < 6000; ++it) {
    CriticLoss l = td_loss(dq, b, b.a, gamma);
    adam_step(dq.q1.params(), l.grad_q1, o1, 1e-2);
    adam_step(dq.q2.params(), l.grad_q2, o2, 1e-2);
    polyak_update(dq.q1_target.params(), dq.q1.params(), 0.05);
    polyak_update(dq.q2_target.params(), dq.q2.params(), 0.05);
  }
  const double q = min_q(dq, b.s, b.a, false)(0);
  EXPECT_NEAR(q, 1.0 / (1.0 - gamma), 0.01 / (1.0 - gamma));
}

TEST(Expectile, UnitValues) {
  EXPECT_EQ(expectile_loss(2.0, 0.5), 2.0);
  EXPECT_NEAR(expectile_loss(-2.0, 0.7), 1.2, 1e-15);
  EXPECT_NEAR(expectile_loss(1.0, 0.9), 0.9, 1e-15);
  EXPECT_EQ(expectile_loss(0.0, 0.3), 0.0);
  for (double x = -3.0; x <= 3.0; x += 0.25) EXPECT_EQ(expectile_loss(x, 0.5), 0.5 * x * x);
  EXPECT_LT(expectile_loss(1e-9, 0.9), 1e-17);
  EXPECT_LT(expectile_loss(-1e-9, 0.9), 1e-17);
  EXPECT_THROW(expectile_loss(1.0, 0.0), ParameterError);
  EXPECT_THROW(expectile_loss(1.0, 1.0), ParameterError);
  for (double x : {-1.3, -0.2, 0.4, 2.0}) {
    const double h = 1e-6;
    EXPECT_NEAR(expectile_loss_grad(x, 0.7),
                (expectile_loss(x + h, 0.7) - expectile_loss(x - h, 0.7)) / (2 * h), 1e-8);
  }
}

TEST(IqlValueLoss, ExactAndSymmetricCases) {
  Rng rng(7);
  DoubleQ dq(2, 1, kTiny, rng);
  ValueFunction vf(2, kTiny, rng);
  set_constant(dq.q1_target, 1.5);
  set_constant(dq.q2_target, 2.5);
  set_constant(vf.v, 1.5);
  Matrix s = standard_normal(2, 10, rng), a = standard_normal(1, 10, rng);
  EXPECT_EQ(iql_value_loss(vf, dq, s, a, 0.7).value, 0.0);
  set_constant(vf.v, 0.5);
  // tau = 0.5: half the mean squared residual (residual 1 everywhere).
  EXPECT_NEAR(iql_value_loss(vf, dq, s, a, 0.5).value, 0.5, 1e-15);
}

TEST(IqlValueLoss, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  DoubleQ dq(2, 2, kTiny, rng);
  ValueFunction vf(2, kTiny, rng);
  Matrix s = standard_normal(2, 9, rng), a = standard_normal(2, 9, rng);
  ValueLoss l = iql_value_loss(vf, dq, s, a, 0.8);
  auto f = [&] { return iql_value_loss(vf, dq, s, a, 0.8).value; };
  EXPECT_LT(testing::fd_compare(vf.v.params(), f, l.grad_v).max_rel_error, 1e-3);
}

TEST(IqlValueLoss, TwoPointExpectileOptimum) {
  // Residual targets {-1, +1} at one state, tau = 0.9: optimum V = 0.8.
  DoubleQ dq;
  dq.q1 = dq.q2 = dq.q1_target = dq.q2_target = linear_in_action(1, 1);
  Rng rng(9);
  ValueFunction vf(1, NetConfig{8, 2, Activation::kMish}, rng);
  Matrix s = Matrix::Zero(1, 2), a(1, 2);
  a << -1.0, 1.0;
  ASSERT_EQ(min_q(dq, s, a, true)(0), -1.0);
  ASSERT_EQ(min_q(dq, s, a, true)(1), 1.0);
  AdamState opt = AdamState::for_params(vf.v.params());
  for (int it = 0; it < 5000; ++it) {
    ValueLoss l = iql_value_loss(vf, dq, s, a, 0.9);
    adam_step(vf.v.params(), l.grad_v, opt, it < 3000 ? 1e-2 : 1e-3);
  }
  EXPECT_NEAR(vf.forward(s)(0), 0.8, 1e-3);
}

TEST(IqlQLoss, TargetsFromValue) {
  Rng rng(10);
  DoubleQ dq(1, 1, kTiny, rng);
  ValueFunction vf(1, kTiny, rng);
  set_constant(vf.v, 0.0);
  set_constant(dq.q1, 0.0);
  set_constant(dq.q2, 0.0);
  TransitionBatch b;
  b.s = b.s_next = Matrix::Zero(1, 2);
  b.a = Matrix::Zero(1, 2);
  b.r = RowVector::Ones(2);
  b.done = RowVector::Zero(2);
  EXPECT_NEAR(iql_q_loss(dq, vf, b, 0.9).value, 2.0, 1e-15);  // y = 1
  set_constant(vf.v, 3.0);
  b.done(1) = 1.0;
  // y = (1 + 2.7, 1)
  EXPECT_NEAR(iql_q_loss(dq, vf, b, 0.9).value, (2 * 3.7 * 3.7 + 2 * 1.0) / 2.0, 1e-12);
  // Wired so V(s') equals min-target-Q(s', a'): identical to td_loss.
  set_constant(dq.q1_target, 3.0);
  set_constant(dq.q2_target, 4.0);
  EXPECT_NEAR(iql_q_loss(dq, vf, b, 0.9).value, td_loss(dq, b, b.a, 0.9).value, 1e-12);
}

TEST(IqlQLoss, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  DoubleQ dq(2, 1, kTiny, rng);
  ValueFunction vf(2, kTiny, rng);
  TransitionBatch b = batch_of(2, 1, 7, rng);
  CriticLoss l = iql_q_loss(dq, vf, b, 0.9);
  auto f = [&] { return iql_q_loss(dq, vf, b, 0.9).value; };
  EXPECT_LT(testing::fd_compare(dq.q1.params(), f, l.grad_q1).max_rel_error, 1e-3);
  EXPECT_LT(testing::fd_compare(dq.q2.params(), f, l.grad_q2).max_rel_error, 1e-3);
}

}  // namespace
}  // namespace edp

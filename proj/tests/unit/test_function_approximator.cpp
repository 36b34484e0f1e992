#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <edp/errors.hpp>
#include <edp/mlp.hpp>
#include <edp/networks.hpp>
#include <edp/optim.hpp>

#include "oracles.hpp"

namespace edp {
namespace {

using testing::fd_compare;

TEST(Mish, ReferenceValues) {
  EXPECT_EQ(mish(0.0), 0.0);
  EXPECT_NEAR(mish(20.0), 20.0, 1e-12);
  EXPECT_LE(mish(-20.0), 0.0);
  EXPECT_GT(mish(-20.0), -1e-7);
  EXPECT_NEAR(mish(1.0), 1.0 * std::tanh(std::log(1.0 + std::exp(1.0))), 1e-15);
  for (double x : {-1000.0, -700.0, 700.0, 1000.0}) {
    EXPECT_TRUE(std::isfinite(mish(x)));
    EXPECT_TRUE(std::isfinite(mish_derivative(x)));
  }
  EXPECT_NEAR(mish(1000.0), 1000.0, 1e-9);
}

TEST(Mish, DerivativeMatchesDifferences) {
  for (double x = -12.0; x <= 12.0; x += 0.37) {
    const double h = 1e-5;
    const double fd = (mish(x + h) - mish(x - h)) / (2 * h);
    EXPECT_NEAR(mish_derivative(x), fd, 1e-7) << x;
  }
}

// Single hidden unit wired as identity so the net output is mish(x).
Mlp identity_probe() {
  Rng rng(1);
  Mlp m({1, 1, 1}, Activation::kMish, rng);
  m.params().layers[0].weight(0, 0) = 1.0;
  m.params().layers[0].bias(0) = 0.0;
  m.params().layers[1].weight(0, 0) = 1.0;
  m.params().layers[1].bias(0) = 0.0;
  return m;
}

TEST(Mish, BatchedActivationMatchesScalar) {
  Mlp m = identity_probe();
  const int n = 4001;
  Matrix x(1, n);
  for (int i = 0; i < n; ++i) x(0, i) = -40.0 + 80.0 * i / (n - 1);
  MlpTape tape;
  Matrix y = m.forward(x, tape);
  Matrix dx = m.backward(tape, Matrix::Ones(1, n), nullptr);
  for (int i = 0; i < n; ++i) {
    const double v = x(0, i);
    EXPECT_NEAR(y(0, i), mish(v), 1e-12 * std::max(1.0, std::abs(v))) << v;
    EXPECT_NEAR(dx(0, i), mish_derivative(v), 1e-11) << v;
  }
}

TEST(Embedding, Examples) {
  Vector e = sinusoidal_embed(0.0, 4);
  EXPECT_EQ(e(0), 0.0);
  EXPECT_EQ(e(1), 1.0);
  EXPECT_EQ(e(2), 0.0);
  EXPECT_EQ(e(3), 1.0);
  e = sinusoidal_embed(1.0, 2);
  EXPECT_NEAR(e(0), 0.8414709848078965, 1e-15);
  EXPECT_NEAR(e(1), 0.5403023058681398, 1e-15);
  EXPECT_THROW(sinusoidal_embed(1.0, 3), ParameterError);
  EXPECT_THROW(sinusoidal_embed(1.0, 0), ParameterError);
}

TEST(Embedding, BoundedAndFormula) {
  Rng rng(4);
  std::uniform_int_distribution<int> kd(0, 1000000);
  for (int t = 0; t < 200; ++t) {
    const double k = kd(rng);
    Vector e = sinusoidal_embed(k, 16);
    EXPECT_LE(e.cwiseAbs().maxCoeff(), 1.0);
    for (int i = 0; i < 8; ++i) {
      const double f = std::pow(10000.0, -2.0 * i / 16.0);
      EXPECT_NEAR(e(2 * i), std::sin(k * f), 1e-9);
      EXPECT_NEAR(e(2 * i + 1), std::cos(k * f), 1e-9);
    }
  }
  // Switching dimension must not reuse cached frequencies.
  EXPECT_NEAR(sinusoidal_embed(3.0, 4)(2), std::sin(3.0 / 100.0), 1e-15);
  EXPECT_NEAR(sinusoidal_embed(3.0, 8)(2), std::sin(3.0 / 10.0), 1e-15);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  for (auto act : {Activation::kMish, Activation::kRelu}) {
    Rng rng(7);
    Mlp m({2, 4, 2}, act, rng);
    Matrix x = standard_normal(2, 5, rng);
    Matrix target = standard_normal(2, 5, rng);
    auto loss = [&] { return (m.forward(x) - target).squaredNorm(); };
    MlpTape tape;
    Matrix out = m.forward(x, tape);
    Params g = m.params().zeros_like();
    Matrix dx = m.backward(tape, 2.0 * (out - target), &g);
    auto rep = fd_compare(m.params(), loss, g);
    EXPECT_LT(rep.max_rel_error, 1e-4) << to_string(act);
    auto rep_x = fd_compare(x, loss, dx);
    EXPECT_LT(rep_x.max_rel_error, 1e-4) << to_string(act);
  }
}

TEST(Mlp, ZeroHeadGradientOnlyOnHead) {
  Rng rng(2);
  Mlp m({3, 6, 6, 2}, Activation::kMish, rng, /*zero_head=*/true);
  Matrix x = standard_normal(3, 4, rng);
  MlpTape tape;
  Matrix out = m.forward(x, tape);
  EXPECT_EQ(out.squaredNorm(), 0.0);
  Params g = m.params().zeros_like();
  m.backward(tape, 2.0 * out, &g);  // L = ||out||^2 has zero gradient at 0
  EXPECT_EQ(g.squared_norm(), 0.0);
  // A non-zero output gradient reaches only the head through the zero weights.
  g.set_zero();
  m.backward(tape, Matrix::Ones(2, 4), &g);
  for (std::size_t i = 0; i + 1 < g.layers.size(); ++i)
    EXPECT_EQ(g.layers[i].weight.squaredNorm() + g.layers[i].bias.squaredNorm(), 0.0);
  EXPECT_GT(g.layers.back().weight.squaredNorm(), 0.0);
  EXPECT_EQ(g.layers.back().bias(0), 4.0);
}

TEST(Mlp, GradientIsLinearInLoss) {
  Rng rng(3);
  Mlp m({2, 5, 1}, Activation::kMish, rng);
  Matrix x = standard_normal(2, 3, rng);
  MlpTape tape;
  Matrix out = m.forward(x, tape);
  Params g1 = m.params().zeros_like(), g3 = m.params().zeros_like();
  m.backward(tape, out, &g1);
  m.backward(tape, 3.0 * out, &g3);
  for (Index i = 0; i < g1.size(); ++i) EXPECT_NEAR(g3.at(i), 3.0 * g1.at(i), 1e-12);
}

TEST(Mlp, NonFiniteInputReportsLayer) {
  Rng rng(3);
  Mlp m({2, 3, 1}, Activation::kMish, rng);
  Matrix x = Matrix::Zero(2, 1);
  x(0, 0) = std::nan("");
  try {
    m.forward(x);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
  EXPECT_THROW(m.forward(Matrix::Zero(3, 1)), ShapeError);
}

TEST(Mlp, DeterministicAndFinite) {
  Rng r1(5), r2(5);
  Mlp a({4, 8, 8, 8, 2}, Activation::kMish, r1);
  Mlp b({4, 8, 8, 8, 2}, Activation::kMish, r2);
  EXPECT_TRUE(a.params() == b.params());
  Matrix x = 10.0 * Matrix::Random(4, 100);  // entries in [-10, 10]
  Matrix y1 = a.forward(x), y2 = a.forward(x);
  EXPECT_TRUE(y1.allFinite());
  EXPECT_EQ((y1 - y2).cwiseAbs().maxCoeff(), 0.0);
  // Fan-in scaled uniform init.
  for (const auto& l : a.params().layers)
    EXPECT_LE(l.weight.cwiseAbs().maxCoeff(), std::sqrt(1.0 / l.weight.cols()));
}

TEST(NoiseNet, ShapesAndZeroHead) {
  Rng rng(1);
  NetConfig cfg{8, 4, Activation::kMish};
  NoiseNet net(2, 3, cfg, rng);
  EXPECT_EQ(net.mlp().input_dim(), 2 + 3 + 4);
  EXPECT_EQ(net.mlp().output_dim(), 2);
  EXPECT_EQ(net.params().layers.size(), 4u);  // three hidden layers + head
  Matrix a = standard_normal(2, 5, rng), s = standard_normal(3, 5, rng);
  std::vector<double> k{1, 2, 3, 4, 5};
  EXPECT_EQ(net.forward(a, s, k).squaredNorm(), 0.0);
  EXPECT_THROW(net.forward(a, standard_normal(2, 5, rng), k), ShapeError);
  EXPECT_THROW(NoiseNet(2, 3, NetConfig{8, 3, Activation::kMish}, rng),
               ParameterError);
}

TEST(NoiseNet, InputLayoutIsActionStateEmbedding) {
  Rng rng(1);
  NetConfig cfg{4, 2, Activation::kRelu};
  NoiseNet net(1, 1, cfg, rng);
  // The tape keeps the assembled first-layer input.
  Matrix a(1, 1), s(1, 1);
  a << 0.25;
  s << -0.5;
  std::vector<double> k{3.0};
  MlpTape tape;
  net.forward(a, s, k, tape);
  const Matrix& in = tape.inputs[0];
  Vector emb = sinusoidal_embed(3.0, 2);
  EXPECT_EQ(in(0, 0), 0.25);
  EXPECT_EQ(in(1, 0), -0.5);
  EXPECT_EQ(in(2, 0), emb(0));
  EXPECT_EQ(in(3, 0), emb(1));
}

TEST(NoiseNet, CountsEvaluationsPerColumn) {
  Rng rng(1);
  NoiseNet net(1, 1, NetConfig{4, 2, Activation::kMish}, rng);
  reset_noise_net_evaluations();
  std::vector<double> k(7, 2.0);
  net.forward(Matrix::Zero(1, 7), Matrix::Zero(1, 7), k);
  EXPECT_EQ(noise_net_evaluations(), 7u);
}

TEST(CriticNet, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  CriticNet q(3, 2, NetConfig{6, 2, Activation::kMish}, rng);
  Matrix s = standard_normal(3, 4, rng), a = standard_normal(2, 4, rng);
  RowVector w = standard_normal(4, rng).transpose();
  auto loss = [&] { return q.forward(s, a).dot(w); };
  MlpTape tape;
  q.forward(s, a, tape);
  Params g = q.params().zeros_like();
  Matrix da = q.backward(tape, w, &g);
  EXPECT_LT(fd_compare(q.params(), loss, g).max_rel_error, 1e-4);
  EXPECT_LT(fd_compare(a, loss, da).max_rel_error, 1e-4);

  CriticNet v(3, 0, NetConfig{6, 2, Activation::kMish}, rng);
  EXPECT_EQ(v.forward(s, Matrix()).size(), 4);
}

TEST(Adam, ZeroGradientLeavesParams) {
  Rng rng(1);
  Mlp m({2, 3, 1}, Activation::kMish, rng);
  Params p = m.params();
  AdamState st = AdamState::for_params(p);
  st.m.layers[0].weight.setConstant(1.0);
  Params before = p;
  adam_step(p, p.zeros_like(), st, 1e-3);
  EXPECT_EQ(st.t, 1);
  EXPECT_NEAR(st.m.layers[0].weight(0, 0), 0.9, 1e-15);
  // m != 0 moves params; restart with zero moments for the pure no-op case.
  AdamState fresh = AdamState::for_params(before);
  Params q = before;
  adam_step(q, q.zeros_like(), fresh, 1e-3);
  EXPECT_TRUE(q == before);
}

TEST(Adam, FirstStepMagnitudeIsLr) {
  Rng rng(1);
  Mlp m({2, 3, 1}, Activation::kMish, rng);
  Params p = m.params(), before = p;
  AdamState st = AdamState::for_params(p);
  Params g = p.zeros_like();
  for (Index i = 0; i < g.size(); ++i) g.at(i) = (i % 2 ? 2.5 : -0.7);
  adam_step(p, g, st, 1e-2);
  for (Index i = 0; i < p.size(); ++i) {
    const double step = p.at(i) - before.at(i);
    EXPECT_NEAR(step, (i % 2 ? -1e-2 : 1e-2), 1e-8);
  }
}

TEST(Adam, ConvergesOnQuadratic) {
  Rng rng(2);
  Mlp m({3, 4, 2}, Activation::kMish, rng);
  Params p = m.params();
  Params target = p;
  for (Index i = 0; i < target.size(); ++i) target.at(i) = std::sin(1.0 + i);
  AdamState st = AdamState::for_params(p);
  for (int it = 0; it < 10000; ++it) {
    Params g = p;
    Params neg = target;
    neg *= -1.0;
    g += neg;
    g *= 2.0;
    adam_step(p, g, st, 1e-2);
  }
  double dist = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    dist += (p.at(i) - target.at(i)) * (p.at(i) - target.at(i));
  EXPECT_LT(std::sqrt(dist), 1e-3);
}

TEST(Adam, ShapeMismatch) {
  Rng rng(2);
  Params a = Mlp({2, 3, 1}, Activation::kMish, rng).params();
  Params b = Mlp({2, 4, 1}, Activation::kMish, rng).params();
  AdamState st = AdamState::for_params(a);
  EXPECT_THROW(adam_step(a, b, st, 1e-3), ShapeError);
}

Params filled(std::vector<double> values) {
  Params p;
  Layer l{Matrix(1, static_cast<Index>(values.size())), Vector::Zero(1)};
  for (std::size_t i = 0; i < values.size(); ++i) l.weight(0, i) = values[i];
  p.layers.push_back(l);
  return p;
}

TEST(ClipGradNorm, Examples) {
  Params g = filled({0.0, 2.0});
  EXPECT_TRUE(clip_grad_norm(g, 5.0) == g);
  Params big = filled({6.0, 8.0});
  Params c = clip_grad_norm(big, 5.0);
  EXPECT_NEAR(c.at(0), 3.0, 1e-15);
  EXPECT_NEAR(c.at(1), 4.0, 1e-15);
  EXPECT_NEAR(global_norm(c), 5.0, 1e-12);
  Params zero = filled({0.0, 0.0});
  EXPECT_TRUE(clip_grad_norm(zero, 5.0) == zero);
  EXPECT_THROW(clip_grad_norm(g, 0.0), ParameterError);
}

TEST(ClipGradNorm, Idempotent) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    Params g = filled({0, 0, 0, 0});
    for (Index i = 0; i < 4; ++i) g.at(i) = 10.0 * standard_normal(1, rng)(0);
    Params once = clip_grad_norm(g, 1.5);
    Params twice = clip_grad_norm(once, 1.5);
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(once.at(i), twice.at(i), 1e-15);
  }
}

TEST(Polyak, Examples) {
  Params target = filled({0.0}), online = filled({1.0});
  polyak_update(target, online, 0.005);
  EXPECT_NEAR(target.at(0), 0.005, 1e-15);
  polyak_update(target, online, 1.0);
  EXPECT_EQ(target.at(0), 1.0);
  Params same = filled({0.3, -0.2});
  Params copy = same;
  polyak_update(copy, same, 0.005);
  EXPECT_NEAR(copy.at(0), 0.3, 1e-16);
  EXPECT_NEAR(copy.at(1), -0.2, 1e-16);
  Params other = filled({1.0, 2.0, 3.0});
  EXPECT_THROW(polyak_update(copy, other, 0.5), ShapeError);
  Params t0 = filled({0.4});
  polyak_update(t0, online, 0.0);
  EXPECT_EQ(t0.at(0), 0.4);
}

}  // namespace
}  // namespace edp

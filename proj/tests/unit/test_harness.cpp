#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <unistd.h>

#include <edp/bench.hpp>
#include <edp/config.hpp>
#include <edp/errors.hpp>
#include <edp/evaluation.hpp>
#include <edp/metrics.hpp>

#include "oracles.hpp"

namespace edp {
namespace {

using testing::chi_square_p;
using testing::ks_two_sample;
using testing::row_values;

DiffusionPolicy small_policy(std::uint64_t seed) {
  Rng rng(seed);
  DiffusionPolicy p(NoiseNet(2, 2, NetConfig{8, 4, Activation::kMish}, rng),
                    NoiseSchedule::build(ScheduleVariant::kVariancePreserving, 10, 0.1, 20.0),
                    1.0);
  auto& head = p.params().layers.back();
  head.weight = 0.5 * standard_normal(head.weight.rows(), head.weight.cols(), rng);
  return p;
}

DoubleQ constant_critic(double c) {
  Rng rng(1);
  DoubleQ dq(2, 2, NetConfig{4, 2, Activation::kRelu}, rng);
  for (CriticNet* q : {&dq.q1, &dq.q2, &dq.q1_target, &dq.q2_target}) {
    q->params().layers.back().weight.setZero();
    q->params().layers.back().bias.setConstant(c);
  }
  return dq;
}

// Q = w * a[0] inside the action box (ReLU net with a +10 offset).
DoubleQ linear_critic(double w) {
  Rng rng(1);
  CriticNet q(2, 2, NetConfig{4, 2, Activation::kRelu}, rng);
  auto& L = q.params().layers;
  for (auto& l : L) {
    l.weight.setZero();
    l.bias.setZero();
  }
  L[0].weight(0, 2) = 1.0;
  L[0].bias(0) = 10.0;
  L[1].weight(0, 0) = 1.0;
  L[2].weight(0, 0) = 1.0;
  L[3].weight(0, 0) = w;
  L[3].bias(0) = -10.0 * w;
  DoubleQ dq;
  dq.q1 = dq.q2 = dq.q1_target = dq.q2_target = q;
  return dq;
}

SamplerConfig ode3() {
  SamplerConfig s;
  s.nfe = 3;
  return s;
}

TEST(EasChoose, SingleCandidate) {
  Rng rng(1);
  const std::vector<double> q{-3.0};
  for (int i = 0; i < 10; ++i) EXPECT_EQ(eas_choose(q, rng), 0u);
  EXPECT_THROW(eas_choose(std::vector<double>{}, rng), ParameterError);
}

TEST(EasChoose, EqualValuesAreUniform) {
  Rng rng(2);
  const std::vector<double> q(5, 1.7);
  std::vector<double> counts(5, 0.0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[eas_choose(q, rng)] += 1;
  const std::vector<double> expected(5, n / 5.0);
  EXPECT_GT(chi_square_p(counts, expected), 0.01);
}

TEST(EasChoose, SoftmaxProbabilities) {
  Rng rng(3);
  const std::vector<double> q{0.0, std::log(3.0)};
  const int n = 10000;
  int second = 0;
  for (int i = 0; i < n; ++i) second += eas_choose(q, rng) == 1;
  const double se = std::sqrt(0.75 * 0.25 / n);
  EXPECT_NEAR(second / double(n), 0.75, 3 * se);
  // Shifting every value leaves the distribution alone, even far out.
  const std::vector<double> shifted{1e6, 1e6 + std::log(3.0)};
  second = 0;
  for (int i = 0; i < n; ++i) second += eas_choose(shifted, rng) == 1;
  EXPECT_NEAR(second / double(n), 0.75, 3 * se);
}

TEST(EasChoose, LargeGapPicksArgmax) {
  Rng rng(4);
  for (double gap : {20.0, 100.0, 1e4}) {
    const std::vector<double> q{0.0, -1.0, gap, 0.5};
    int hits = 0;
    for (int i = 0; i < 10000; ++i) hits += eas_choose(q, rng) == 2;
    EXPECT_GE(hits, 9990) << gap;
  }
}

TEST(EasSelect, SingleCandidateIsPlainSample) {
  const auto pol = small_policy(5);
  Rng r1(9), r2(9), srng(1);
  const Matrix s = standard_normal(2, 20, srng);
  EXPECT_EQ(eas_select(pol, linear_critic(3.0), s, 1, ode3(), r1), eval_sample(pol, s, ode3(), r2));
  EXPECT_THROW(eas_select(pol, linear_critic(3.0), s, 0, ode3(), r1), ParameterError);
}

TEST(EasSelect, ConstantCriticMatchesPlainSampling) {
  const auto pol = small_policy(6);
  Matrix s = Matrix::Zero(2, 10000);
  s.row(0).setConstant(0.3);
  Rng r1(10), r2(11);
  const Matrix eas = eas_select(pol, constant_critic(2.0), s, 10, ode3(), r1);
  const Matrix plain = eval_sample(pol, s, ode3(), r2);
  for (int d = 0; d < 2; ++d)
    EXPECT_GT(ks_two_sample(row_values(eas, d), row_values(plain, d)).p_value, 0.01) << d;
}

TEST(EasSelect, SteepCriticPicksBestCandidate) {
  const auto pol = small_policy(7);
  Rng srng(2);
  const Matrix s = standard_normal(2, 2000, srng);
  const int n = 10;
  Matrix rep(2, s.cols() * n);
  for (Index b = 0; b < s.cols(); ++b)
    for (int i = 0; i < n; ++i) rep.col(b * n + i) = s.col(b);
  Rng r1(12), r2(12);
  const Matrix cand = eval_sample(pol, rep, ode3(), r2);
  const Matrix got = eas_select(pol, linear_critic(1e5), s, n, ode3(), r1);
  int hits = 0;
  for (Index b = 0; b < s.cols(); ++b) {
    // Saturated candidates tie, so compare the achieved value.
    hits += got(0, b) == cand.row(0).segment(b * n, n).maxCoeff();
  }
  EXPECT_GE(hits, 0.999 * s.cols());
}

TEST(EvaluateActor, AnchorsMapToZeroAndHundred) {
  for (auto kind : {EnvKind::kBimodalBandit, EnvKind::kPointMass}) {
    const auto env = SyntheticEnv::make(kind);
    const auto anchors = env.optimal_score();
    const Actor random = [&](const Matrix& s, Rng& rng) {
      Matrix a(env.action_dim(), s.cols());
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (Index i = 0; i < a.size(); ++i) a(i) = u(rng);
      return a;
    };
    const Actor expert = [&](const Matrix& s, Rng&) {
      Matrix a(env.action_dim(), s.cols());
      for (Index j = 0; j < s.cols(); ++j) a.col(j) = env.expert_action(s.col(j));
      return a;
    };
    const auto r = evaluate_actor(random, env, anchors, 4000, 1);
    const auto e = evaluate_actor(expert, env, anchors, 4000, 1);
    EXPECT_NEAR(r.normalized_score, 0.0, 5.0) << to_string(kind);
    EXPECT_NEAR(e.normalized_score, 100.0, 5.0) << to_string(kind);
    EXPECT_EQ(e.returns.size(), 4000u);
    EXPECT_THROW(evaluate_actor(random, env, anchors, 0, 1), ParameterError);
  }
}

TEST(EvaluatePolicy, RunsAndValidates) {
  const auto env = SyntheticEnv::bimodal_bandit();
  const auto anchors = env.optimal_score(1000);
  const auto pol = small_policy(8);
  EvalConfig cfg;
  cfg.episodes = 50;
  cfg.sampler = ode3();
  const auto a = evaluate_policy(pol, constant_critic(0.0), std::nullopt, env, anchors, cfg);
  const auto b = evaluate_policy(pol, constant_critic(0.0), std::nullopt, env, anchors, cfg);
  EXPECT_EQ(a.returns, b.returns);
  EXPECT_EQ(a.returns.size(), 50u);
  EXPECT_DOUBLE_EQ(a.normalized_score, normalized_score(a.mean_return, anchors));
  cfg.episodes = 0;
  EXPECT_THROW(evaluate_policy(pol, constant_critic(0.0), std::nullopt, env, anchors, cfg),
               ParameterError);
  cfg.episodes = 5;
  cfg.eas_n = 0;
  EXPECT_THROW(evaluate_policy(pol, constant_critic(0.0), std::nullopt, env, anchors, cfg),
               ParameterError);
}

TEST(Metrics, OmsTable) {
  EXPECT_EQ(oms_metric(std::vector<double>{1, 5, 3}), 5.0);
  EXPECT_EQ(oms_metric(std::vector<double>{1, 2, 3, 4}), 4.0);
  EXPECT_EQ(oms_metric(std::vector<double>{-7.5}), -7.5);
  EXPECT_THROW(oms_metric(std::vector<double>{}), ParameterError);
}

TEST(Metrics, RatTable) {
  EXPECT_EQ(rat_metric(std::vector<double>(10, 42.0)), 42.0);
  std::vector<double> h(9, 0.0);
  h.push_back(10.0);
  EXPECT_EQ(rat_metric(h), 1.0);
  EXPECT_EQ(rat_metric(std::vector<double>{1, 2, 3}), 2.0);
  EXPECT_EQ(rat_metric(std::vector<double>{100, 1, 2, 3}, 3), 2.0);
  std::vector<double> long_h(25);
  for (int i = 0; i < 25; ++i) long_h[i] = i;
  EXPECT_EQ(rat_metric(long_h), 19.5);
  EXPECT_THROW(rat_metric(std::vector<double>{}), ParameterError);
  EXPECT_THROW(rat_metric(std::vector<double>{1}, 0), ParameterError);
}

TEST(Metrics, OmsDominatesRat) {
  Rng rng(5);
  std::normal_distribution<double> n(50.0, 30.0);
  std::uniform_int_distribution<int> len(1, 40), win(1, 15);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> h(len(rng));
    for (auto& x : h) x = n(rng);
    EXPECT_GE(oms_metric(h), rat_metric(h, win(rng)));
  }
}

TEST(Bench, ExactNoiseNetCounts) {
  BenchConfig cfg;
  cfg.k_values = {4, 8};
  cfg.iters = 1000;
  cfg.warmup = 0;
  cfg.repeats = 1;
  cfg.batch_size = 3;
  cfg.hidden_dim = 4;
  cfg.nfe = 5;
  const BenchReport rep = bench_training(cfg);
  ASSERT_EQ(rep.rows.size(), 12u);
  const std::uint64_t B = 3, nfe = 5;
  for (std::uint64_t K : {4u, 8u}) {
    const int k = static_cast<int>(K);
    // next-action sampling + one BC pass + the chain
    EXPECT_EQ(rep.find(BenchVariant::kFullChainDdpm, k)->noise_evals_per_iter, K * B + B + K * B);
    EXPECT_EQ(rep.find(BenchVariant::kFullChainOde, k)->noise_evals_per_iter, nfe * B + B + K * B);
    // next-action sampling + one BC pass + one approximation pass
    EXPECT_EQ(rep.find(BenchVariant::kActionApproxDdpm, k)->noise_evals_per_iter, K * B + 2 * B);
    EXPECT_EQ(rep.find(BenchVariant::kActionApproxOde, k)->noise_evals_per_iter, nfe * B + 2 * B);
    EXPECT_EQ(rep.find(BenchVariant::kDdpmSample, k)->noise_evals_per_iter, K);
    EXPECT_EQ(rep.find(BenchVariant::kOdeSample, k)->noise_evals_per_iter, nfe);
  }
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.ips.has_value(), is_training_variant(r.variant));
    EXPECT_EQ(r.sps.has_value(), !is_training_variant(r.variant));
    EXPECT_GT(r.ips ? *r.ips : *r.sps, 0.0);
  }
  const BenchReport back = parse_bench_csv(rep.to_csv());
  ASSERT_EQ(back.rows.size(), rep.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].variant, rep.rows[i].variant);
    EXPECT_EQ(back.rows[i].k, rep.rows[i].k);
    EXPECT_EQ(back.rows[i].ips.has_value(), rep.rows[i].ips.has_value());
    if (back.rows[i].ips) {
      EXPECT_NEAR(*back.rows[i].ips, *rep.rows[i].ips, 1e-8 * *rep.rows[i].ips);
    }
  }
  EXPECT_EQ(rep.to_csv().substr(0, 17), "variant,K,ips,sps");
  EXPECT_FALSE(rep.to_table().empty());
}

TEST(Bench, ConfigChecks) {
  BenchConfig cfg;
  cfg.iters = 999;
  EXPECT_THROW(bench_training(cfg), ParameterError);
  cfg = BenchConfig{};
  cfg.k_values = {1};
  EXPECT_THROW(cfg.validate(), ParameterError);
  EXPECT_THROW(parse_bench_variant("fast"), ParameterError);
  EXPECT_EQ(parse_bench_variant("ode-sample"), BenchVariant::kOdeSample);
  EXPECT_THROW(parse_bench_csv("variant,K\nx,1\n"), ParameterError);
}

TEST(Config, KeysRoundTrip) {
  RunConfig c;
  const auto kv = to_key_values(c);
  EXPECT_EQ(kv.size(), config_keys().size());
  RunConfig d;
  apply_setting(d, "lr", "0.125");
  apply_setting(d, "algo", "iql");
  apply_setting(d, "share_noise_draws", "true");
  apply_setting(d, "method", "ddpm");
  apply_setting(d, "eas_n", "7");
  apply_assignment(d, "seed = 99");
  EXPECT_EQ(d.train.lr, 0.125);
  EXPECT_EQ(d.algo.algo, AlgoKind::kIql);
  EXPECT_TRUE(d.train.share_noise_draws);
  EXPECT_EQ(d.sampler.method, SamplerMethod::kDdpmChain);
  EXPECT_EQ(d.eval.eas_n, 7);
  EXPECT_EQ(d.train.seed, 99u);
  EXPECT_EQ(d.eval_config().sampler.method, SamplerMethod::kDdpmChain);
  RunConfig e;
  for (const auto& [k, v] : to_key_values(d)) apply_setting(e, k, v);
  EXPECT_EQ(to_config_text(e), to_config_text(d));
}

TEST(Config, Errors) {
  RunConfig c;
  EXPECT_THROW(apply_setting(c, "learning_rate", "1"), ParameterError);
  EXPECT_THROW(apply_setting(c, "lr", "fast"), ParameterError);
  EXPECT_THROW(apply_setting(c, "epochs", "1.5"), ParameterError);
  EXPECT_THROW(apply_setting(c, "share_noise_draws", "maybe"), ParameterError);
  EXPECT_THROW(apply_setting(c, "algo", "bcq"), ParameterError);
  EXPECT_THROW(apply_assignment(c, "lr"), ParameterError);
  EXPECT_THROW(load_config_file(c, "/nonexistent/run.cfg"), ParameterError);
}

TEST(Config, FileWithComments) {
  const auto path = std::filesystem::temp_directory_path() /
                    ("edp_cfg_" + std::to_string(::getpid()) + ".cfg");
  {
    std::ofstream out(path);
    out << "# run\n\nlr=0.01  # inline\n  batch_size = 64\nalgo=crr\n";
  }
  RunConfig c;
  load_config_file(c, path.string());
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.train.batch_size, 64);
  EXPECT_EQ(c.algo.algo, AlgoKind::kCrr);
  {
    std::ofstream out(path);
    out << "lr=0.01\nbogus=1\n";
  }
  try {
    load_config_file(c, path.string());
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace edp

#include <benchmark/benchmark.h>

#include <edp/algorithms.hpp>
#include <edp/dataset.hpp>
#include <edp/trainer.hpp>

using namespace edp;

namespace {

DiffusionPolicy make_policy(int K, int hidden) {
  Rng rng(1);
  return DiffusionPolicy(NoiseNet(2, 2, NetConfig{hidden, 16, Activation::kMish}, rng),
                         NoiseSchedule::build(ScheduleVariant::kVariancePreserving, K, 0.1, 20.0),
                         1.0);
}

void BM_NoiseNetForward(benchmark::State& state) {
  const int B = static_cast<int>(state.range(0));
  const auto pol = make_policy(100, 64);
  Rng rng(2);
  const Matrix a = standard_normal(2, B, rng), s = standard_normal(2, B, rng);
  const std::vector<double> k(B, 50.0);
  for (auto _ : state) benchmark::DoNotOptimize(pol.net().forward(a, s, k));
  state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_NoiseNetForward)->Arg(1)->Arg(32)->Arg(256);

void BM_DiffusionLoss(benchmark::State& state) {
  const int B = static_cast<int>(state.range(0));
  const auto pol = make_policy(1000, 64);
  Rng rng(3);
  const Matrix a = 0.5 * standard_normal(2, B, rng), s = standard_normal(2, B, rng);
  for (auto _ : state) benchmark::DoNotOptimize(diffusion_bc_loss(pol, s, a, rng).value);
  state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_DiffusionLoss)->Arg(32)->Arg(256);

void BM_OdeSample(benchmark::State& state) {
  const auto pol = make_policy(1000, 64);
  SamplerConfig sc;
  sc.nfe = static_cast<int>(state.range(0));
  Rng rng(4);
  const Matrix s = standard_normal(2, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(sample_action_ode(pol, s, sc, rng));
}
BENCHMARK(BM_OdeSample)->Arg(5)->Arg(15)->Arg(30);

void BM_DdpmSample(benchmark::State& state) {
  const auto pol = make_policy(static_cast<int>(state.range(0)), 64);
  SamplerConfig sc;
  sc.method = SamplerMethod::kDdpmChain;
  Rng rng(5);
  const Matrix s = standard_normal(2, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(sample_action_ddpm(pol, s, sc, rng));
}
BENCHMARK(BM_DdpmSample)->Arg(10)->Arg(100)->Arg(1000);

void BM_TrainStep(benchmark::State& state) {
  const auto algo = static_cast<AlgoKind>(state.range(0));
  const auto env = SyntheticEnv::bimodal_bandit();
  const auto ds = normalize_states(generate_dataset(env, default_mixture(env.kind()), 4096, 6));
  TrainConfig tc;
  AlgoConfig ac;
  ac.algo = algo;
  SamplerConfig sc;
  TrainState st = make_train_state(tc, algo, 2, 2, 1.0, ds.normalizer());
  for (auto _ : state) benchmark::DoNotOptimize(rgdpl_train_step(st, ds, tc, ac, sc).l_diff);
  state.SetLabel(std::string(to_string(algo)));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(AlgoKind::kTd3Bc))
    ->Arg(static_cast<int>(AlgoKind::kCrr))
    ->Arg(static_cast<int>(AlgoKind::kIql))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

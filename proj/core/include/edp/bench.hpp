#ifndef EDP_BENCH_HPP_
#define EDP_BENCH_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edp {

enum class BenchVariant {
  kFullChainDdpm,     // backprop through the chain, DDPM next actions
  kFullChainOde,      // backprop through the chain, ODE next actions
  kActionApproxDdpm,  // one-call action approximation, DDPM next actions
  kActionApproxOde,   // one-call action approximation, ODE next actions
  kDdpmSample,        // environment steps with the K-step chain
  kOdeSample,         // environment steps with the ODE solver
};

BenchVariant parse_bench_variant(std::string_view name);
std::string_view to_string(BenchVariant variant);
bool is_training_variant(BenchVariant variant);
std::vector<BenchVariant> all_bench_variants();

struct BenchConfig {
  std::vector<BenchVariant> variants = all_bench_variants();
  std::vector<int> k_values{10, 100, 1000};
  int iters = 1000;
  int warmup = 100;
  int repeats = 3;
  int batch_size = 32;
  int hidden_dim = 32;
  int nfe = 15;
  std::uint64_t seed = 7;
  // Skip (variant, K) pairs; used to leave out full-chain at large K.
  int full_chain_max_k = 0;  // 0 = no limit

  void validate() const;
};

struct BenchRow {
  BenchVariant variant;
  int k = 0;
  std::optional<double> ips;  // training iterations per second
  std::optional<double> sps;  // environment steps per second
  // Noise-network evaluations (per sample) for one iteration or one step.
  std::uint64_t noise_evals_per_iter = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  const BenchRow* find(BenchVariant variant, int k) const;
  std::string to_csv() const;    // header variant,K,ips,sps
  std::string to_table() const;  // aligned plain text
};

// Median over `repeats` timed runs of `iters` iterations, after `warmup`
// untimed iterations. Repeats are interleaved across (variant, K) cells.
// Single-threaded.
BenchReport bench_training(const BenchConfig& config);

BenchReport parse_bench_csv(const std::string& text);

}  // namespace edp

#endif  // EDP_BENCH_HPP_

#include "edp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include "edp/dataset.hpp"
#include "edp/errors.hpp"
#include "edp/trainer.hpp"

namespace edp {

namespace {

struct VariantName {
  BenchVariant variant;
  const char* name;
};

constexpr VariantName kNames[] = {
    {BenchVariant::kFullChainDdpm, "full-chain+ddpm"},
    {BenchVariant::kFullChainOde, "full-chain+ode"},
    {BenchVariant::kActionApproxDdpm, "action-approx+ddpm"},
    {BenchVariant::kActionApproxOde, "action-approx+ode"},
    {BenchVariant::kDdpmSample, "ddpm-sample"},
    {BenchVariant::kOdeSample, "ode-sample"},
};

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool full_chain(BenchVariant v) {
  return v == BenchVariant::kFullChainDdpm || v == BenchVariant::kFullChainOde;
}

bool ddpm_sampling(BenchVariant v) {
  return v == BenchVariant::kFullChainDdpm ||
         v == BenchVariant::kActionApproxDdpm || v == BenchVariant::kDdpmSample;
}

// One (variant, K) measurement. run(n) performs n iterations.
struct Cell {
  BenchVariant variant;
  int k;
  std::function<void(int)> run;
  std::vector<double> rates;
  std::uint64_t evals = 0;
};

Cell training_cell(BenchVariant variant, int k, const BenchConfig& cfg,
                   const OfflineDataset& ds) {
  struct Ctx {
    TrainConfig tc;
    AlgoConfig ac;
    SamplerConfig sc;
    std::optional<TrainState> st;
  };
  auto c = std::make_shared<Ctx>();
  c->tc.diffusion_steps = k;
  c->tc.hidden_dim = cfg.hidden_dim;
  c->tc.batch_size = cfg.batch_size;
  c->tc.seed = cfg.seed;
  c->tc.policy_update =
      full_chain(variant) ? PolicyUpdate::kFullChain : PolicyUpdate::kActionApprox;
  c->ac.algo = AlgoKind::kTd3Bc;
  c->sc.method = ddpm_sampling(variant) ? SamplerMethod::kDdpmChain
                                        : SamplerMethod::kOdeSolver;
  c->sc.nfe = cfg.nfe;
  c->st.emplace(make_train_state(c->tc, c->ac.algo, ds.state_dim(), ds.action_dim(), 1.0));
  return Cell{variant, k, [c, &ds](int n) {
                for (int i = 0; i < n; ++i) rgdpl_train_step(*c->st, ds, c->tc, c->ac, c->sc);
              }, {}};
}

Cell sampling_cell(BenchVariant variant, int k, const BenchConfig& cfg) {
  struct Ctx {
    SyntheticEnv env = SyntheticEnv::bimodal_bandit();
    Rng rng;
    std::optional<DiffusionPolicy> policy;
    SamplerConfig sc;
  };
  auto c = std::make_shared<Ctx>();
  c->rng = derive_rng(cfg.seed, 3);
  TrainConfig tc;
  tc.diffusion_steps = k;
  tc.hidden_dim = cfg.hidden_dim;
  c->policy.emplace(
      NoiseNet(c->env.action_dim(), c->env.state_dim(), tc.net_config(), c->rng),
      tc.build_schedule(), c->env.action_bound());
  c->sc.method = variant == BenchVariant::kDdpmSample ? SamplerMethod::kDdpmChain
                                                      : SamplerMethod::kOdeSolver;
  c->sc.nfe = cfg.nfe;
  return Cell{variant, k, [c](int n) {
                Vector s = c->env.reset(c->rng);
                for (int i = 0; i < n; ++i) {
                  const Matrix a = eval_sample(*c->policy, s, c->sc, c->rng);
                  const StepResult res = c->env.step(s, a.col(0), 0, c->rng);
                  s = res.done ? c->env.reset(c->rng) : res.s_next;
                }
              }, {}};
}

}  // namespace

BenchVariant parse_bench_variant(std::string_view name) {
  for (const auto& v : kNames) {
    if (name == v.name) return v.variant;
  }
  throw ParameterError("unknown benchmark variant '" + std::string(name) + "'");
}

std::string_view to_string(BenchVariant variant) {
  for (const auto& v : kNames) {
    if (v.variant == variant) return v.name;
  }
  return "?";
}

bool is_training_variant(BenchVariant v) {
  return v != BenchVariant::kDdpmSample && v != BenchVariant::kOdeSample;
}

std::vector<BenchVariant> all_bench_variants() {
  std::vector<BenchVariant> out;
  for (const auto& v : kNames) out.push_back(v.variant);
  return out;
}

void BenchConfig::validate() const {
  if (iters < 1000) throw ParameterError("bench iters must be >= 1000");
  if (warmup < 0 || repeats < 1) {
    throw ParameterError("bench warmup must be >= 0 and repeats >= 1");
  }
  if (k_values.empty()) throw ParameterError("bench needs at least one K");
  for (int k : k_values) {
    if (k < 2) throw ParameterError("bench K values must be >= 2");
  }
  if (variants.empty()) throw ParameterError("bench needs at least one variant");
  if (batch_size < 1 || hidden_dim < 1 || nfe < 3) {
    throw ParameterError("bench batch_size, hidden_dim >= 1 and nfe >= 3");
  }
}

BenchReport bench_training(const BenchConfig& cfg) {
  cfg.validate();
  const SyntheticEnv env = SyntheticEnv::bimodal_bandit();
  const OfflineDataset raw = generate_dataset(
      env, default_mixture(env.kind()), 4096, cfg.seed);
  // Bandit transitions are all terminal; clear the flags so every iteration
  // pays for next-action sampling as a bootstrapping task would.
  const OfflineDataset ds(raw.state_dim(), raw.action_dim(), raw.states(),
                          raw.actions(), raw.rewards(), raw.next_states(),
                          Eigen::RowVectorXf::Zero(raw.size()));
  std::vector<Cell> cells;
  for (BenchVariant v : cfg.variants) {
    for (int k : cfg.k_values) {
      if (full_chain(v) && cfg.full_chain_max_k > 0 && k > cfg.full_chain_max_k) {
        continue;
      }
      cells.push_back(is_training_variant(v) ? training_cell(v, k, cfg, ds)
                                             : sampling_cell(v, k, cfg));
    }
  }
  for (Cell& c : cells) c.run(cfg.warmup);
  // Repeats go round-robin over cells so slow spells on the host hit every
  // cell rather than one K.
  for (int r = 0; r < cfg.repeats; ++r) {
    for (Cell& c : cells) {
      reset_noise_net_evaluations();
      const auto t0 = Clock::now();
      c.run(cfg.iters);
      const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
      c.evals = noise_net_evaluations();
      c.rates.push_back(cfg.iters / secs);
    }
  }
  BenchReport report;
  for (const Cell& c : cells) {
    const double rate = median(c.rates);
    const std::uint64_t per = c.evals / static_cast<std::uint64_t>(cfg.iters);
    report.rows.push_back(is_training_variant(c.variant)
                              ? BenchRow{c.variant, c.k, rate, std::nullopt, per}
                              : BenchRow{c.variant, c.k, std::nullopt, rate, per});
  }
  return report;
}

const BenchRow* BenchReport::find(BenchVariant variant, int k) const {
  for (const auto& r : rows) {
    if (r.variant == variant && r.k == k) return &r;
  }
  return nullptr;
}

std::string BenchReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "variant,K,ips,sps\n";
  for (const auto& r : rows) {
    os << to_string(r.variant) << ',' << r.k << ',';
    if (r.ips) os << *r.ips;
    os << ',';
    if (r.sps) os << *r.sps;
    os << '\n';
  }
  return os.str();
}

std::string BenchReport::to_table() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %6s %12s %12s %14s\n", "variant", "K",
                "ips", "sps", "evals/iter");
  out += buf;
  for (const auto& r : rows) {
    const std::string ips = r.ips ? std::to_string(*r.ips) : "-";
    const std::string sps = r.sps ? std::to_string(*r.sps) : "-";
    std::snprintf(buf, sizeof buf, "%-20s %6d %12s %12s %14llu\n",
                  std::string(to_string(r.variant)).c_str(), r.k, ips.c_str(),
                  sps.c_str(), static_cast<unsigned long long>(r.noise_evals_per_iter));
    out += buf;
  }
  return out;
}

BenchReport parse_bench_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "variant,K,ips,sps") {
    throw ParameterError("bench CSV: missing header 'variant,K,ips,sps'");
  }
  BenchReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 4) throw ParameterError("bench CSV: bad row '" + line + "'");
    BenchRow r{parse_bench_variant(f[0]), std::stoi(f[1]), std::nullopt,
               std::nullopt, 0};
    if (!f[2].empty()) r.ips = std::stod(f[2]);
    if (!f[3].empty()) r.sps = std::stod(f[3]);
    if (!r.ips && !r.sps) throw ParameterError("bench CSV: row without a rate");
    rep.rows.push_back(r);
  }
  return rep;
}

}  // namespace edp

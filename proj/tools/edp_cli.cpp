#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <edp/bench.hpp>
#include <edp/config.hpp>
#include <edp/dataset.hpp>
#include <edp/errors.hpp>
#include <edp/evaluation.hpp>
#include <edp/metrics.hpp>
#include <edp/trainer.hpp>

namespace fs = std::filesystem;
using namespace edp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Usage-level failure: bad arguments, bad config, missing inputs.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw UsageError(std::string(what) + " not found: '" + path + "'");
  }
}

std::string metric_log_path(const fs::path& dir) { return (dir / "metrics.csv").string(); }
std::string checkpoint_path(const fs::path& dir) { return (dir / "checkpoint.edpc").string(); }

// ---- gen-data ---------------------------------------------------------------

struct GenArgs {
  std::string env = "bandit";
  std::string mixture;
  long long size = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& a) {
  const SyntheticEnv env = SyntheticEnv::make(parse_env_kind(a.env));
  const BehaviorMixture mix =
      a.mixture.empty() ? default_mixture(env.kind()) : parse_mixture(a.mixture);
  if (a.size < 1) throw ParameterError("--size must be >= 1");
  const OfflineDataset ds = generate_dataset(env, mix, a.size, a.seed);
  save_dataset(ds, a.out);
  std::cout << "wrote " << ds.size() << " transitions (" << a.env << ", "
            << format_mixture(mix) << ") to " << a.out << "\n";
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string algo;
  std::string config;
  std::string out;
  std::string env;
  std::vector<std::string> sets;
  bool resume = false;
};

RunConfig build_run_config(const std::string& file, const std::vector<std::string>& sets) {
  RunConfig rc;
  if (!file.empty()) {
    require_file(file, "config file");
    load_config_file(rc, file);
  }
  for (const auto& s : sets) apply_assignment(rc, s);
  return rc;
}

std::vector<std::pair<std::string, std::string>> run_meta(const RunConfig& rc,
                                                         const OfflineDataset& ds,
                                                         const std::string& env) {
  auto meta = to_key_values(rc);
  for (auto& kv : meta) kv.first = "config." + kv.first;
  meta.emplace_back("state_dim", std::to_string(ds.state_dim()));
  meta.emplace_back("action_dim", std::to_string(ds.action_dim()));
  if (!env.empty()) meta.emplace_back("env", env);
  return meta;
}

int run_train(const TrainArgs& a) {
  require_file(a.dataset, "dataset");
  RunConfig rc;
  try {
    rc = build_run_config(a.config, a.sets);
    if (!a.algo.empty()) apply_setting(rc, "algo", a.algo);
    rc.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  std::optional<SyntheticEnv> env;
  if (!a.env.empty()) env = SyntheticEnv::make(parse_env_kind(a.env));

  OfflineDataset ds = load_dataset(a.dataset);
  if (rc.train.normalize_states && !ds.normalizer()) ds = normalize_states(ds);
  if (!rc.train.normalize_states && ds.normalizer()) {
    ds = OfflineDataset(ds.state_dim(), ds.action_dim(), ds.states(), ds.actions(),
                        ds.rewards(), ds.next_states(), ds.dones());
  }
  if (env && (env->state_dim() != ds.state_dim() || env->action_dim() != ds.action_dim())) {
    throw UsageError("dataset dimensions do not match environment '" + a.env + "'");
  }

  fs::create_directories(a.out);
  TrainState st = make_train_state(rc.train, rc.algo.algo, ds.state_dim(), ds.action_dim(),
                                   env ? env->action_bound() : 1.0, ds.normalizer());
  std::vector<double> history;
  const std::string ckpt = checkpoint_path(a.out);
  if (a.resume && fs::exists(ckpt)) {
    const CheckpointData d = read_checkpoint(ckpt);
    restore_checkpoint(st, d);
    history = parse_score_history(d.meta_value("score_history"));
    std::cerr << "resuming from step " << st.step << "\n";
  }

  TrainHooks hooks;
  hooks.metric_log_path = metric_log_path(a.out);
  hooks.checkpoint_path = ckpt;
  hooks.checkpoint_meta = run_meta(rc, ds, a.env);
  if (env) {
    const ScoreAnchors anchors = env->optimal_score();
    const EvalConfig ec = rc.eval_config();
    hooks.evaluate = [&, anchors, ec](const TrainState& s) {
      const EvalReport r = evaluate_policy(s.policy, s.critics, s.normalizer, *env, anchors, ec);
      std::cerr << "step " << s.step << "  score " << r.normalized_score << "\n";
      return r.normalized_score;
    };
  }
  {
    std::ofstream cfg(fs::path(a.out) / "config.txt");
    cfg << to_config_text(rc);
  }
  const TrainResult res = train(st, ds, rc.train, rc.algo, rc.sampler, hooks, history);
  std::cout << "trained " << res.metrics.size() << " steps (total " << st.step << ")";
  if (!res.score_history.empty()) {
    std::cout << "  OMS " << oms_metric(res.score_history) << "  RAT "
              << rat_metric(res.score_history);
  }
  std::cout << "\nmetric log: " << hooks.metric_log_path << "\ncheckpoint: " << ckpt << "\n";
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string env;
  int eas_n = 10;
  int episodes = 100;
  std::uint64_t seed = 2024;
  bool no_eas = false;
};

int run_eval(const EvalArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  const CheckpointData d = read_checkpoint(a.checkpoint);
  RunConfig rc;
  for (const auto& [k, v] : d.meta) {
    if (k.rfind("config.", 0) == 0) apply_setting(rc, k.substr(7), v);
  }
  std::string env_name = a.env;
  if (env_name.empty()) {
    for (const auto& [k, v] : d.meta) {
      if (k == "env") env_name = v;
    }
  }
  if (env_name.empty()) throw UsageError("--env is required (checkpoint does not name one)");
  const SyntheticEnv env = SyntheticEnv::make(parse_env_kind(env_name));
  const int sd = std::stoi(d.meta_value("state_dim"));
  const int ad = std::stoi(d.meta_value("action_dim"));
  TrainState st = make_train_state(rc.train, rc.algo.algo, sd, ad, env.action_bound());
  restore_checkpoint(st, d);

  EvalConfig ec = rc.eval_config();
  ec.eas_n = a.eas_n;
  ec.episodes = a.episodes;
  ec.eval_seed = a.seed;
  ec.use_eas = !a.no_eas;
  try {
    ec.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  const ScoreAnchors anchors = env.optimal_score();
  const EvalReport r = evaluate_policy(st.policy, st.critics, st.normalizer, env, anchors, ec);
  std::printf("step %llu  episodes %d  mean_return %.6g  std_return %.6g  normalized_score %.3f\n",
              static_cast<unsigned long long>(st.step), ec.episodes, r.mean_return,
              r.std_return, r.normalized_score);
  return kExitOk;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
  std::string fixture = "bandit";
  int iters = 1000;
  std::vector<int> k_values{10, 100, 1000};
  std::vector<std::string> variants;
  int warmup = 100;
  int repeats = 3;
  int full_chain_max_k = 0;
  std::uint64_t seed = 7;
  std::string csv;
};

int run_bench(const BenchArgs& a) {
  if (a.fixture != "bandit") throw UsageError("unknown bench fixture '" + a.fixture + "'");
  BenchConfig cfg;
  cfg.iters = a.iters;
  cfg.k_values = a.k_values;
  cfg.warmup = a.warmup;
  cfg.repeats = a.repeats;
  cfg.full_chain_max_k = a.full_chain_max_k;
  cfg.seed = a.seed;
  if (!a.variants.empty()) {
    cfg.variants.clear();
    for (const auto& v : a.variants) cfg.variants.push_back(parse_bench_variant(v));
  }
  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  const BenchReport rep = bench_training(cfg);
  std::cout << rep.to_table() << "\n" << rep.to_csv();
  if (!a.csv.empty()) {
    std::ofstream out(a.csv);
    out << rep.to_csv();
    if (!out) throw std::runtime_error("cannot write '" + a.csv + "'");
  }
  return kExitOk;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> runs;
  int window = 10;
  bool csv = false;
};

int run_report(const ReportArgs& a) {
  struct Row {
    std::string name;
    std::uint64_t steps = 0;
    double l_diff = 0.0, l_td = 0.0;
    std::vector<double> scores;
  };
  std::vector<Row> rows;
  for (const auto& run : a.runs) {
    const std::string log = fs::is_directory(run) ? metric_log_path(run) : run;
    require_file(log, "metric log");
    const auto metrics = read_metric_log(log);
    Row r;
    r.name = run;
    if (!metrics.empty()) {
      r.steps = metrics.back().step;
      r.l_diff = metrics.back().l_diff;
      r.l_td = metrics.back().l_td;
    }
    for (const auto& m : metrics) {
      if (m.eval_score) r.scores.push_back(*m.eval_score);
    }
    rows.push_back(std::move(r));
  }
  auto fmt = [](const std::vector<double>& s, bool oms, int window) {
    if (s.empty()) return std::string("-");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", oms ? oms_metric(s) : rat_metric(s, window));
    return std::string(buf);
  };
  if (a.csv) {
    std::cout << "run,steps,evals,oms,rat,l_diff,l_td\n";
    for (const auto& r : rows) {
      std::cout << r.name << ',' << r.steps << ',' << r.scores.size() << ','
                << (r.scores.empty() ? "" : fmt(r.scores, true, a.window)) << ','
                << (r.scores.empty() ? "" : fmt(r.scores, false, a.window)) << ','
                << r.l_diff << ',' << r.l_td << "\n";
    }
    return kExitOk;
  }
  std::printf("%-40s %8s %6s %8s %8s %10s %10s\n", "run", "steps", "evals", "OMS", "RAT",
              "l_diff", "l_td");
  for (const auto& r : rows) {
    std::printf("%-40s %8llu %6zu %8s %8s %10.4g %10.4g\n", r.name.c_str(),
                static_cast<unsigned long long>(r.steps), r.scores.size(),
                fmt(r.scores, true, a.window).c_str(), fmt(r.scores, false, a.window).c_str(),
                r.l_diff, r.l_td);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edp: diffusion policies for offline RL on synthetic tasks"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "generate an offline dataset");
  g->add_option("--env", gen.env, "bandit|pointmass")->capture_default_str();
  g->add_option("--mixture", gen.mixture, "behavior mixture, e.g. mode0:0.5,mode1:0.5");
  g->add_option("--size", gen.size, "number of transitions")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "output file")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a policy on a dataset");
  t->add_option("--dataset", tr.dataset)->required();
  t->add_option("--algo", tr.algo, "td3bc|crr|iql (overrides the config file)");
  t->add_option("--config", tr.config, "key=value config file");
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_option("--env", tr.env, "environment for periodic evaluation");
  t->add_option("--set", tr.sets, "key=value override (repeatable)");
  t->add_flag("--resume", tr.resume, "continue from the checkpoint in --out");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--env", ev.env, "bandit|pointmass (default: from checkpoint)");
  e->add_option("--eas-n", ev.eas_n)->capture_default_str();
  e->add_option("--episodes", ev.episodes)->capture_default_str();
  e->add_option("--seed", ev.seed)->capture_default_str();
  e->add_flag("--no-eas", ev.no_eas, "act with a single sample");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "training / sampling throughput");
  b->add_option("--fixture", be.fixture)->capture_default_str();
  b->add_option("--iters", be.iters)->capture_default_str();
  b->add_option("--k", be.k_values, "diffusion step counts")->delimiter(',');
  b->add_option("--variants", be.variants)->delimiter(',');
  b->add_option("--warmup", be.warmup)->capture_default_str();
  b->add_option("--repeats", be.repeats)->capture_default_str();
  b->add_option("--full-chain-max-k", be.full_chain_max_k);
  b->add_option("--seed", be.seed)->capture_default_str();
  b->add_option("--csv", be.csv, "also write the CSV report here");

  ReportArgs re;
  auto* r = app.add_subcommand("report", "summarize metric logs (OMS / RAT)");
  r->add_option("runs", re.runs, "run directories or metric logs")->required();
  r->add_option("--window", re.window)->capture_default_str();
  r->add_flag("--csv", re.csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return run_gen(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*b) return run_bench(be);
    if (*r) return run_report(re);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

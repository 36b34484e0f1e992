#include "edp/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "edp/errors.hpp"
#include "edp/evaluation.hpp"

namespace edp {

PolicyUpdate parse_policy_update(std::string_view name) {
  if (name == "action_approx") return PolicyUpdate::kActionApprox;
  if (name == "full_chain") return PolicyUpdate::kFullChain;
  throw ParameterError("unknown policy_update '" + std::string(name) +
                       "' (expected action_approx|full_chain)");
}

std::string_view to_string(PolicyUpdate mode) {
  return mode == PolicyUpdate::kActionApprox ? "action_approx" : "full_chain";
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !(critic_lr >= 0.0)) {
    throw ParameterError("learning rates must be >= 0");
  }
  if (epochs < 0) throw ParameterError("epochs must be >= 0");
  if (iters_per_epoch < 1) throw ParameterError("iters_per_epoch must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(grad_clip > 0.0)) throw ParameterError("grad_clip must be > 0");
  if (!(polyak_rate >= 0.0 && polyak_rate <= 1.0)) {
    throw ParameterError("polyak_rate must lie in [0, 1]");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ParameterError("gamma must lie in [0, 1)");
  }
  if (diffusion_steps < 1) throw ParameterError("diffusion_steps must be >= 1");
  if (hidden_dim < 1) throw ParameterError("hidden_dim must be >= 1");
  if (embed_dim < 2 || embed_dim % 2 != 0) {
    throw ParameterError("embed_dim must be even and >= 2");
  }
  if (num_next_actions < 1) throw ParameterError("num_next_actions must be >= 1");
  if (next_action_eas_n < 0) throw ParameterError("next_action_eas_n must be >= 0");
  if (!(reward_scale > 0.0)) throw ParameterError("reward_scale must be > 0");
  if (eval_every < 0 || checkpoint_every < 0) {
    throw ParameterError("eval_every and checkpoint_every must be >= 0");
  }
}

NetConfig TrainConfig::net_config() const {
  return NetConfig{hidden_dim, embed_dim, activation};
}

NoiseSchedule TrainConfig::build_schedule() const {
  return NoiseSchedule::build(schedule, diffusion_steps, beta_min, beta_max);
}

TrainState make_train_state(const TrainConfig& config, AlgoKind algo,
                            int state_dim, int action_dim, double action_bound,
                            std::optional<StateNormalizer> normalizer) {
  config.validate();
  Rng rng = derive_rng(config.seed, 0, 0);
  const NetConfig net = config.net_config();
  TrainState st;
  st.policy = DiffusionPolicy(NoiseNet(action_dim, state_dim, net, rng),
                              config.build_schedule(), action_bound);
  st.policy_opt = AdamState::for_params(st.policy.params());
  st.critics = DoubleQ(state_dim, action_dim, net, rng);
  st.q1_opt = AdamState::for_params(st.critics.q1.params());
  st.q2_opt = AdamState::for_params(st.critics.q2.params());
  if (algo == AlgoKind::kIql) {
    st.value = ValueFunction(state_dim, net, rng);
    st.value_opt = AdamState::for_params(st.value->v.params());
  }
  st.normalizer = std::move(normalizer);
  st.seed = config.seed;
  return st;
}

Rng step_rng(std::uint64_t seed, std::uint64_t step, StreamPurpose purpose) {
  return derive_rng(seed, step + 1, static_cast<std::uint64_t>(purpose));
}

namespace {

void update(Params& p, Gradient g, AdamState& opt, double lr, double clip) {
  g = clip_grad_norm(std::move(g), clip);
  adam_step(p, g, opt, lr);
  p.round_to_float();
  opt.m.round_to_float();
  opt.v.round_to_float();
}

struct StepFailure : NumericError {
  using NumericError::NumericError;
};

[[noreturn]] void non_finite(const StepMetrics& m, const char* what,
                             const char* cause = nullptr) {
  std::ostringstream os;
  os.precision(6);
  os << "non-finite " << what << " at step " << m.step
     << " (l_diff=" << m.l_diff << ", l_algo=" << m.l_algo
     << ", l_td=" << m.l_td << ", mean_q=" << m.mean_q
     << ", grad_norm_policy=" << m.grad_norm_policy
     << ", grad_norm_critic=" << m.grad_norm_critic << ")";
  if (cause) os << ": " << cause;
  throw StepFailure(os.str());
}

template <class F>
void guarded(const StepMetrics& m, const char* what, F&& f) {
  try {
    f();
  } catch (const StepFailure&) {
    throw;
  } catch (const NumericError& e) {
    non_finite(m, what, e.what());
  }
}

LossResult improvement_loss(const TrainState& st, const TransitionBatch& b,
                            const NoisePass& diff_pass,
                            const TrainConfig& config, const AlgoConfig& algo,
                            Rng& rng) {
  const DiffusionPolicy& pol = st.policy;
  auto approximation = [&]() {
    if (config.share_noise_draws) {
      ActionApproximation ap;
      ap.pass = diff_pass;
      ap.a0_hat = approximate_actions(pol.schedule(), ap.pass);
      return ap;
    }
    return approx_action_batch(pol, b.s, b.a, rng);
  };

  if (algo.algo == AlgoKind::kTd3Bc) {
    std::bernoulli_distribution coin(0.5);
    if (config.policy_update == PolicyUpdate::kFullChain) {
      const int critic = coin(rng) ? 1 : 0;
      return full_chain_policy_loss(pol, st.critics, b.s, critic, rng);
    }
    const ActionApproximation ap = approximation();
    return td3_policy_loss(pol, st.critics, ap, b.s, coin(rng) ? 1 : 0);
  }

  const bool elbo = algo.likelihood == LikelihoodVariant::kWeightedElbo;
  std::optional<ActionApproximation> ap;
  if (!elbo || algo.algo == AlgoKind::kCrr) ap = approximation();
  RowVector w = algo.algo == AlgoKind::kCrr
                    ? crr_weights(st.critics, b.s, b.a, ap->a0_hat,
                                  pol.action_bound(), algo, rng)
                    : iql_weights(st.critics, *st.value, b.s, b.a, algo);
  if (elbo) return weighted_elbo_loss(pol, b.s, b.a, w, rng);
  return weighted_regression_loss(pol, *ap, b.a, w);
}

}  // namespace

StepMetrics rgdpl_train_step(TrainState& st, const OfflineDataset& dataset,
                             const TrainConfig& config, const AlgoConfig& algo,
                             const SamplerConfig& sampler) {
  config.validate();
  algo.validate();
  sampler.validate();
  if (dataset.size() < config.batch_size) {
    throw ParameterError("batch_size exceeds dataset size");
  }
  if (algo.algo == AlgoKind::kIql && !st.value) {
    throw ParameterError("IQL training state has no value network");
  }
  if (config.policy_update == PolicyUpdate::kFullChain &&
      algo.algo != AlgoKind::kTd3Bc) {
    throw ParameterError("full_chain policy updates are only defined for td3bc");
  }
  const std::uint64_t step = st.step;
  StepMetrics m;
  m.step = step + 1;

  Rng batch_rng = step_rng(st.seed, step, StreamPurpose::kBatch);
  std::uniform_int_distribution<Index> pick(0, dataset.size() - 1);
  std::vector<Index> idx(static_cast<std::size_t>(config.batch_size));
  for (auto& i : idx) i = pick(batch_rng);
  TransitionBatch b = dataset.batch(idx);
  if (config.reward_scale != 1.0) b.r *= config.reward_scale;

  // Critic phase.
  guarded(m, "critic loss", [&] {
    Rng critic_rng = step_rng(st.seed, step, StreamPurpose::kCritic);
    CriticLoss cl;
    if (algo.algo == AlgoKind::kIql) {
      ValueLoss vl = iql_value_loss(*st.value, st.critics, b.s, b.a,
                                    algo.expectile);
      if (!std::isfinite(vl.value) || !vl.grad_v.all_finite()) {
        non_finite(m, "value loss");
      }
      update(st.value->v.params(), std::move(vl.grad_v), st.value_opt,
             config.critic_lr, config.grad_clip);
      cl = iql_q_loss(st.critics, *st.value, b, config.gamma);
    } else if (config.next_action_eas_n > 0) {
      RowVector next;
      for (int i = 0; i < config.num_next_actions; ++i) {
        const Matrix a_next = eas_select(st.policy, st.critics, b.s_next,
                                         config.next_action_eas_n, sampler,
                                         critic_rng);
        const RowVector q = min_q(st.critics, b.s_next, a_next, true);
        next = i == 0 ? q : RowVector(next.cwiseMax(q));
      }
      cl = regress_critics(st.critics, b, bootstrap_targets(b, next, config.gamma));
    } else {
      cl = td_loss(st.critics, st.policy, b, sampler, config.gamma, critic_rng,
                   config.num_next_actions);
    }
    m.l_td = cl.value;
    m.mean_q = cl.mean_q;
    m.grad_norm_critic =
        std::sqrt(cl.grad_q1.squared_norm() + cl.grad_q2.squared_norm());
    if (!std::isfinite(m.l_td) || !std::isfinite(m.grad_norm_critic)) {
      non_finite(m, "critic loss");
    }
    update(st.critics.q1.params(), std::move(cl.grad_q1), st.q1_opt,
           config.critic_lr, config.grad_clip);
    update(st.critics.q2.params(), std::move(cl.grad_q2), st.q2_opt,
           config.critic_lr, config.grad_clip);
  });

  // Policy phase.
  guarded(m, "policy loss", [&] {
    Rng diff_rng = step_rng(st.seed, step, StreamPurpose::kDiffusion);
    const NoisePass pass = corrupt_and_predict(st.policy, b.s, b.a, diff_rng);
    LossResult diff = diffusion_bc_loss(st.policy, pass);
    m.l_diff = diff.value;
    Gradient g = std::move(diff.grad);
    if (algo.lambda > 0.0) {
      Rng imp_rng = step_rng(st.seed, step, StreamPurpose::kImprovement);
      LossResult imp = improvement_loss(st, b, pass, config, algo, imp_rng);
      m.l_algo = imp.value;
      imp.grad *= algo.lambda;
      g += imp.grad;
    }
    m.grad_norm_policy = global_norm(g);
    if (!std::isfinite(m.l_diff) || !std::isfinite(m.l_algo) ||
        !std::isfinite(m.grad_norm_policy)) {
      non_finite(m, "policy loss");
    }
    update(st.policy.params(), std::move(g), st.policy_opt, config.lr,
           config.grad_clip);
  });

  polyak_update(st.critics.q1_target.params(), st.critics.q1.params(),
                config.polyak_rate);
  polyak_update(st.critics.q2_target.params(), st.critics.q2.params(),
                config.polyak_rate);
  st.critics.q1_target.params().round_to_float();
  st.critics.q2_target.params().round_to_float();

  st.step = step + 1;
  return m;
}

namespace {

std::string join_vector(const Vector& v) {
  std::ostringstream os;
  os.precision(17);
  for (Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v(i);
  return os.str();
}

Vector split_vector(const std::string& text) {
  std::istringstream is(text);
  std::vector<double> vals;
  double x = 0.0;
  while (is >> x) vals.push_back(x);
  if (!is.eof()) throw ParameterError("malformed number list '" + text + "'");
  return Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
}

void put(CheckpointData& d, const std::string& name, const Params& p) {
  d.blocks.emplace_back(name, p);
}

void put_opt(CheckpointData& d, const std::string& name, const AdamState& s) {
  put(d, name + ".m", s.m);
  put(d, name + ".v", s.v);
  d.scalars.emplace_back(name + ".t", static_cast<std::uint64_t>(s.t));
}

void take(const CheckpointData& d, const std::string& name, Params& p) {
  const Params& src = d.block(name);
  if (!src.same_shape(p)) {
    throw ParameterError("checkpoint block '" + name +
                         "' does not match the configured network shape");
  }
  p = src;
}

void take_opt(const CheckpointData& d, const std::string& name, AdamState& s) {
  take(d, name + ".m", s.m);
  take(d, name + ".v", s.v);
  s.t = static_cast<std::int64_t>(d.scalar(name + ".t"));
}

}  // namespace

CheckpointData to_checkpoint(const TrainState& st) {
  CheckpointData d;
  d.step = st.step;
  d.scalars.emplace_back("seed", st.seed);
  put(d, "policy", st.policy.params());
  put_opt(d, "policy_opt", st.policy_opt);
  put(d, "q1", st.critics.q1.params());
  put(d, "q2", st.critics.q2.params());
  put(d, "q1_target", st.critics.q1_target.params());
  put(d, "q2_target", st.critics.q2_target.params());
  put_opt(d, "q1_opt", st.q1_opt);
  put_opt(d, "q2_opt", st.q2_opt);
  if (st.value) {
    put(d, "value", st.value->v.params());
    put_opt(d, "value_opt", st.value_opt);
  }
  if (st.normalizer) {
    d.meta.emplace_back("normalizer.mean", join_vector(st.normalizer->mean));
    d.meta.emplace_back("normalizer.std", join_vector(st.normalizer->std));
  }
  return d;
}

void restore_checkpoint(TrainState& st, const CheckpointData& d) {
  take(d, "policy", st.policy.params());
  take_opt(d, "policy_opt", st.policy_opt);
  take(d, "q1", st.critics.q1.params());
  take(d, "q2", st.critics.q2.params());
  take(d, "q1_target", st.critics.q1_target.params());
  take(d, "q2_target", st.critics.q2_target.params());
  take_opt(d, "q1_opt", st.q1_opt);
  take_opt(d, "q2_opt", st.q2_opt);
  if (st.value) {
    take(d, "value", st.value->v.params());
    take_opt(d, "value_opt", st.value_opt);
  } else if (d.has_block("value")) {
    throw ParameterError("checkpoint has a value network but the state does not");
  }
  st.normalizer.reset();
  for (const auto& [k, v] : d.meta) {
    if (k == "normalizer.mean") {
      st.normalizer = StateNormalizer{split_vector(v),
                                      split_vector(d.meta_value("normalizer.std"))};
    }
  }
  st.step = d.step;
  st.seed = d.scalar("seed");
}

std::string format_metric_row(const StepMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,",
                static_cast<unsigned long long>(m.step), m.l_diff, m.l_algo,
                m.l_td, m.mean_q, m.grad_norm_policy, m.grad_norm_critic);
  std::string row(buf);
  if (m.eval_score) {
    std::snprintf(buf, sizeof buf, "%.17g", *m.eval_score);
    row += buf;
  }
  return row;
}

StepMetrics parse_metric_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  if (f.size() != 8) {
    throw ParameterError("metric row has " + std::to_string(f.size()) +
                         " fields, expected 8: '" + line + "'");
  }
  try {
    StepMetrics m;
    m.step = std::stoull(f[0]);
    m.l_diff = std::stod(f[1]);
    m.l_algo = std::stod(f[2]);
    m.l_td = std::stod(f[3]);
    m.mean_q = std::stod(f[4]);
    m.grad_norm_policy = std::stod(f[5]);
    m.grad_norm_critic = std::stod(f[6]);
    if (!f[7].empty()) m.eval_score = std::stod(f[7]);
    return m;
  } catch (const std::logic_error&) {
    throw ParameterError("malformed metric row '" + line + "'");
  }
}

std::vector<StepMetrics> read_metric_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metric log '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricLogHeader) {
    throw ParameterError("'" + path + "' is not an edp metric log");
  }
  std::vector<StepMetrics> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_metric_row(line));
  }
  return rows;
}

std::string format_score_history(const std::vector<double>& history) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < history.size(); ++i) {
    os << (i ? " " : "") << history[i];
  }
  return os.str();
}

std::vector<double> parse_score_history(const std::string& text) {
  const Vector v = split_vector(text);
  return {v.data(), v.data() + v.size()};
}

namespace {

// Opens the log for appending, keeping only rows up to `step`.
std::ofstream open_metric_log(const std::string& path, std::uint64_t step) {
  std::vector<std::string> keep;
  if (step > 0) {
    std::ifstream in(path);
    std::string line;
    if (in && std::getline(in, line) && line == kMetricLogHeader) {
      while (std::getline(in, line)) {
        if (!line.empty() && parse_metric_row(line).step <= step) {
          keep.push_back(line);
        }
      }
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write metric log '" + path + "'");
  out << kMetricLogHeader << '\n';
  for (const auto& l : keep) out << l << '\n';
  return out;
}

}  // namespace

TrainResult train(TrainState& state, const OfflineDataset& dataset,
                  const TrainConfig& config, const AlgoConfig& algo,
                  const SamplerConfig& sampler, const TrainHooks& hooks,
                  std::vector<double> score_history) {
  config.validate();
  algo.validate();
  sampler.validate();
  const std::uint64_t total = static_cast<std::uint64_t>(config.epochs) *
                              static_cast<std::uint64_t>(config.iters_per_epoch);
  if (state.step > total) {
    throw ParameterError("state is already past the configured number of steps");
  }
  TrainResult result;
  result.score_history = std::move(score_history);

  std::ofstream log;
  if (!hooks.metric_log_path.empty()) {
    log = open_metric_log(hooks.metric_log_path, state.step);
  }

  while (state.step < total) {
    StepMetrics m = rgdpl_train_step(state, dataset, config, algo, sampler);
    const bool epoch_end = m.step % config.iters_per_epoch == 0;
    const std::uint64_t epoch = m.step / config.iters_per_epoch;
    if (epoch_end && hooks.evaluate && config.eval_every > 0 &&
        epoch % config.eval_every == 0) {
      m.eval_score = hooks.evaluate(state);
      result.score_history.push_back(*m.eval_score);
    }
    if (log.is_open()) {
      log << format_metric_row(m) << '\n';
      if (epoch_end) log.flush();
      if (!log) throw std::runtime_error("metric log write failed");
    }
    if (!hooks.checkpoint_path.empty() && epoch_end &&
        ((config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) ||
         m.step == total)) {
      CheckpointData d = to_checkpoint(state);
      for (const auto& kv : hooks.checkpoint_meta) d.meta.push_back(kv);
      d.meta.emplace_back("score_history",
                          format_score_history(result.score_history));
      write_checkpoint(hooks.checkpoint_path, d);
    }
    result.metrics.push_back(m);
  }
  return result;
}

}  // namespace edp

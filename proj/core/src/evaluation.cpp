#include "edp/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "edp/errors.hpp"

namespace edp {

void EvalConfig::validate() const {
  if (eas_n < 1) throw ParameterError("eas_n must be >= 1");
  if (episodes < 1) throw ParameterError("episodes must be >= 1");
  sampler.validate();
}

std::size_t eas_choose(std::span<const double> q, Rng& rng) {
  if (q.empty()) throw ParameterError("eas_choose: no candidates");
  if (q.size() == 1) return 0;
  const double top = *std::max_element(q.begin(), q.end());
  std::vector<double> w(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    w[i] = std::exp(std::max(q[i] - top, -500.0));
  }
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return pick(rng);
}

Matrix eas_select(const DiffusionPolicy& policy, const DoubleQ& dq,
                  const Matrix& states, int n, const SamplerConfig& sampler,
                  Rng& rng) {
  if (n < 1) throw ParameterError("eas_select: n must be >= 1");
  const Index batch = states.cols();
  Matrix rep(states.rows(), batch * n);
  for (Index b = 0; b < batch; ++b) {
    for (int i = 0; i < n; ++i) rep.col(b * n + i) = states.col(b);
  }
  const Matrix cand = eval_sample(policy, rep, sampler, rng);
  if (n == 1) return cand;
  const RowVector q = min_q(dq, rep, cand, false);
  Matrix out(cand.rows(), batch);
  for (Index b = 0; b < batch; ++b) {
    const std::size_t pick = eas_choose(
        std::span<const double>(q.data() + b * n, static_cast<std::size_t>(n)),
        rng);
    out.col(b) = cand.col(b * n + static_cast<Index>(pick));
  }
  return out;
}

EvalReport evaluate_actor(const Actor& actor, const SyntheticEnv& env,
                          const ScoreAnchors& anchors, int episodes,
                          std::uint64_t seed) {
  if (episodes < 1) throw ParameterError("episodes must be >= 1");
  Rng env_rng = derive_rng(seed, 1);
  Rng act_rng = derive_rng(seed, 2);
  Matrix s(env.state_dim(), episodes);
  for (int e = 0; e < episodes; ++e) s.col(e) = env.reset(env_rng);
  std::vector<bool> live(static_cast<std::size_t>(episodes), true);
  EvalReport rep;
  rep.returns.assign(static_cast<std::size_t>(episodes), 0.0);

  for (int t = 0; t < env.episode_len(); ++t) {
    const Matrix a = actor(s, act_rng);
    if (a.rows() != env.action_dim() || a.cols() != episodes) {
      throw ShapeError("actor returned wrong action shape");
    }
    bool any = false;
    for (int e = 0; e < episodes; ++e) {
      if (!live[static_cast<std::size_t>(e)]) continue;
      const StepResult res = env.step(s.col(e), a.col(e), t, env_rng);
      rep.returns[static_cast<std::size_t>(e)] += res.r;
      s.col(e) = res.s_next;
      if (res.done) live[static_cast<std::size_t>(e)] = false;
      any = any || !res.done;
    }
    if (!any) break;
  }
  double sum = 0.0, sq = 0.0;
  for (double r : rep.returns) sum += r;
  rep.mean_return = sum / episodes;
  for (double r : rep.returns) sq += (r - rep.mean_return) * (r - rep.mean_return);
  rep.std_return = std::sqrt(sq / episodes);
  rep.normalized_score = normalized_score(rep.mean_return, anchors);
  return rep;
}

EvalReport evaluate_policy(const DiffusionPolicy& policy, const DoubleQ& dq,
                           const std::optional<StateNormalizer>& normalizer,
                           const SyntheticEnv& env, const ScoreAnchors& anchors,
                           const EvalConfig& config) {
  config.validate();
  const Actor actor = [&](const Matrix& raw, Rng& rng) {
    const Matrix s = normalizer ? normalizer->apply(raw) : raw;
    if (!config.use_eas) return eval_sample(policy, s, config.sampler, rng);
    return eas_select(policy, dq, s, config.eas_n, config.sampler, rng);
  };
  return evaluate_actor(actor, env, anchors, config.episodes, config.eval_seed);
}

}  // namespace edp

#include "edp/critic.hpp"

#include <vector>

#include "edp/errors.hpp"

namespace edp {

DoubleQ::DoubleQ(int state_dim, int action_dim, const NetConfig& config,
                 Rng& rng)
    : q1(state_dim, action_dim, config, rng),
      q2(state_dim, action_dim, config, rng),
      q1_target(q1),
      q2_target(q2) {
  if (action_dim < 1) throw ParameterError("DoubleQ needs action_dim >= 1");
}

RowVector min_q(const DoubleQ& dq, const Matrix& s, const Matrix& a,
                bool use_target) {
  const CriticNet& n1 = use_target ? dq.q1_target : dq.q1;
  const CriticNet& n2 = use_target ? dq.q2_target : dq.q2;
  return n1.forward(s, a).cwiseMin(n2.forward(s, a));
}

ValueFunction::ValueFunction(int state_dim, const NetConfig& config, Rng& rng)
    : v(state_dim, 0, config, rng) {}

RowVector bootstrap_targets(const TransitionBatch& batch,
                            const RowVector& next_value, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ParameterError("discount must lie in [0, 1)");
  }
  if (next_value.size() != batch.size() || batch.r.size() != batch.size() ||
      batch.done.size() != batch.size()) {
    throw ShapeError("bootstrap_targets: batch size mismatch");
  }
  return batch.r.array() +
         (1.0 - batch.done.array()) * gamma * next_value.array();
}

CriticLoss regress_critics(const DoubleQ& dq, const TransitionBatch& batch,
                           const RowVector& y) {
  const Index n = batch.size();
  if (n == 0) throw ParameterError("empty batch");
  MlpTape t1, t2;
  const RowVector q1 = dq.q1.forward(batch.s, batch.a, t1);
  const RowVector q2 = dq.q2.forward(batch.s, batch.a, t2);
  const RowVector e1 = q1 - y;
  const RowVector e2 = q2 - y;
  const double inv_n = 1.0 / static_cast<double>(n);

  CriticLoss out;
  out.value = (e1.squaredNorm() + e2.squaredNorm()) * inv_n;
  out.mean_q = 0.5 * (q1.sum() + q2.sum()) * inv_n;
  out.grad_q1 = dq.q1.params().zeros_like();
  out.grad_q2 = dq.q2.params().zeros_like();
  dq.q1.backward(t1, (2.0 * inv_n) * e1, &out.grad_q1);
  dq.q2.backward(t2, (2.0 * inv_n) * e2, &out.grad_q2);
  return out;
}

CriticLoss td_loss(const DoubleQ& dq, const TransitionBatch& batch,
                   const Matrix& next_actions, double gamma) {
  const RowVector next = min_q(dq, batch.s_next, next_actions, true);
  return regress_critics(dq, batch, bootstrap_targets(batch, next, gamma));
}

CriticLoss td_loss(const DoubleQ& dq, const DiffusionPolicy& policy,
                   const TransitionBatch& batch, const SamplerConfig& sampler,
                   double gamma, Rng& rng, int num_next_actions) {
  if (num_next_actions < 1) {
    throw ParameterError("num_next_actions must be >= 1");
  }
  // Terminal columns never bootstrap, so only live ones get a sampled a'.
  const Index n = batch.s_next.cols();
  std::vector<Index> live;
  for (Index j = 0; j < n; ++j) {
    if (batch.done(j) == 0.0) live.push_back(j);
  }
  RowVector next = RowVector::Zero(n);
  if (!live.empty()) {
    const bool all = static_cast<Index>(live.size()) == n;
    const Matrix s_live = all ? batch.s_next : Matrix(batch.s_next(Eigen::all, live));
    RowVector best;
    for (int i = 0; i < num_next_actions; ++i) {
      const Matrix a_next = eval_sample(policy, s_live, sampler, rng);
      const RowVector q = min_q(dq, s_live, a_next, true);
      best = i == 0 ? q : RowVector(best.cwiseMax(q));
    }
    if (all) {
      next = best;
    } else {
      next(live) = best;
    }
  }
  return regress_critics(dq, batch, bootstrap_targets(batch, next, gamma));
}

double expectile_loss(double x, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ParameterError("expectile must lie in (0, 1)");
  }
  return (x < 0.0 ? 1.0 - tau : tau) * x * x;
}

double expectile_loss_grad(double x, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ParameterError("expectile must lie in (0, 1)");
  }
  return 2.0 * (x < 0.0 ? 1.0 - tau : tau) * x;
}

ValueLoss iql_value_loss(const ValueFunction& vf, const DoubleQ& dq,
                         const Matrix& s, const Matrix& a, double tau) {
  const Index n = s.cols();
  if (n == 0) throw ParameterError("empty batch");
  const RowVector q = min_q(dq, s, a, true);
  MlpTape tape;
  const RowVector v = vf.v.forward(s, Matrix(), tape);
  const double inv_n = 1.0 / static_cast<double>(n);

  ValueLoss out;
  RowVector d_v(n);
  for (Index j = 0; j < n; ++j) {
    const double u = q(j) - v(j);
    out.value += expectile_loss(u, tau);
    d_v(j) = -expectile_loss_grad(u, tau) * inv_n;
  }
  out.value *= inv_n;
  out.grad_v = vf.v.params().zeros_like();
  vf.v.backward(tape, d_v, &out.grad_v);
  return out;
}

CriticLoss iql_q_loss(const DoubleQ& dq, const ValueFunction& vf,
                      const TransitionBatch& batch, double gamma) {
  const RowVector next = vf.forward(batch.s_next);
  return regress_critics(dq, batch, bootstrap_targets(batch, next, gamma));
}

}  // namespace edp

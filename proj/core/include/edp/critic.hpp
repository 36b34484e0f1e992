#ifndef EDP_CRITIC_HPP_
#define EDP_CRITIC_HPP_

#include "edp/batch.hpp"
#include "edp/diffusion_policy.hpp"
#include "edp/networks.hpp"

namespace edp {

/// Twin critics with their target copies.
struct DoubleQ {
  CriticNet q1, q2, q1_target, q2_target;

  DoubleQ() = default;
  // Targets start as exact copies of the online nets.
  DoubleQ(int state_dim, int action_dim, const NetConfig& config, Rng& rng);
};

RowVector min_q(const DoubleQ& dq, const Matrix& s, const Matrix& a,
                bool use_target);

struct ValueFunction {
  CriticNet v;

  ValueFunction() = default;
  ValueFunction(int state_dim, const NetConfig& config, Rng& rng);
  RowVector forward(const Matrix& s) const { return v.forward(s, Matrix()); }
};

struct CriticLoss {
  double value = 0.0;
  Gradient grad_q1, grad_q2;
  double mean_q = 0.0;  // mean of (Q1 + Q2) / 2 over the batch
};

// y = r + (1 - done) * gamma * next_value. No gradient flows through y.
RowVector bootstrap_targets(const TransitionBatch& batch,
                            const RowVector& next_value, double gamma);

// mean_b (y - Q1)^2 + (y - Q2)^2 against fixed targets y.
CriticLoss regress_critics(const DoubleQ& dq, const TransitionBatch& batch,
                           const RowVector& y);

// TD loss with caller-supplied next actions (dim(a) x B).
CriticLoss td_loss(const DoubleQ& dq, const TransitionBatch& batch,
                   const Matrix& next_actions, double gamma);

// TD loss with a' ~ pi(. | s') drawn by eval_sample. With num_next_actions > 1
// the backup takes the max over the draws of min-target-Q.
CriticLoss td_loss(const DoubleQ& dq, const DiffusionPolicy& policy,
                   const TransitionBatch& batch, const SamplerConfig& sampler,
                   double gamma, Rng& rng, int num_next_actions = 1);

// |tau - 1(x < 0)| * x^2.
double expectile_loss(double x, double tau);
// d/dx of expectile_loss.
double expectile_loss_grad(double x, double tau);

struct ValueLoss {
  double value = 0.0;
  Gradient grad_v;
};

// mean expectile loss of min-target-Q(s, a) - V(s); gradient w.r.t. V only.
ValueLoss iql_value_loss(const ValueFunction& vf, const DoubleQ& dq,
                         const Matrix& s, const Matrix& a, double tau);

// Both critics regress to r + (1 - done) * gamma * V(s').
CriticLoss iql_q_loss(const DoubleQ& dq, const ValueFunction& vf,
                      const TransitionBatch& batch, double gamma);

}  // namespace edp

#endif  // EDP_CRITIC_HPP_

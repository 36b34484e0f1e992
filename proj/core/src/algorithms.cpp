#include "edp/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "edp/errors.hpp"

namespace edp {

AlgoKind parse_algo_kind(std::string_view name) {
  if (name == "td3bc") return AlgoKind::kTd3Bc;
  if (name == "crr") return AlgoKind::kCrr;
  if (name == "iql") return AlgoKind::kIql;
  throw ParameterError("unknown algorithm '" + std::string(name) +
                       "' (expected td3bc|crr|iql)");
}

std::string_view to_string(AlgoKind kind) {
  switch (kind) {
    case AlgoKind::kTd3Bc: return "td3bc";
    case AlgoKind::kCrr: return "crr";
    case AlgoKind::kIql: return "iql";
  }
  return "?";
}

LikelihoodVariant parse_likelihood_variant(std::string_view name) {
  if (name == "approx_gaussian") return LikelihoodVariant::kApproxGaussian;
  if (name == "weighted_elbo") return LikelihoodVariant::kWeightedElbo;
  throw ParameterError("unknown likelihood variant '" + std::string(name) +
                       "' (expected approx_gaussian|weighted_elbo)");
}

std::string_view to_string(LikelihoodVariant variant) {
  return variant == LikelihoodVariant::kApproxGaussian ? "approx_gaussian"
                                                       : "weighted_elbo";
}

void AlgoConfig::validate() const {
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
  if (!(temp > 0.0)) throw ParameterError("temp must be > 0");
  if (!(expectile > 0.0 && expectile < 1.0)) {
    throw ParameterError("expectile must lie in (0, 1)");
  }
  if (crr_sample_n < 1) throw ParameterError("crr_sample_n must be >= 1");
  if (!(crr_sigma >= 0.0)) throw ParameterError("crr_sigma must be >= 0");
}

namespace {

const CriticNet& pick(const DoubleQ& dq, int index) {
  if (index != 0 && index != 1) throw ParameterError("critic index must be 0 or 1");
  return index == 0 ? dq.q1 : dq.q2;
}

// Zero the gradient where the clamp saturated.
void mask_clamped(const Matrix& raw, double bound, Matrix& grad) {
  for (Index j = 0; j < raw.cols(); ++j) {
    for (Index i = 0; i < raw.rows(); ++i) {
      if (raw(i, j) < -bound || raw(i, j) > bound) grad(i, j) = 0.0;
    }
  }
}

double resolve_scale(const RowVector& q, std::optional<double> q_scale) {
  if (q_scale) {
    if (!(*q_scale > 0.0)) throw ParameterError("q_scale must be > 0");
    return *q_scale;
  }
  const double scale = q.cwiseAbs().mean();
  return scale > 0.0 ? scale : 1.0;
}

}  // namespace

LossResult td3_policy_loss(const DiffusionPolicy& policy, const DoubleQ& dq,
                           const ActionApproximation& approx,
                           const Matrix& states, int critic_index,
                           std::optional<double> q_scale) {
  const CriticNet& critic = pick(dq, critic_index);
  const Index n = approx.a0_hat.cols();
  if (n == 0) throw ParameterError("empty batch");
  const Matrix a = clamp_actions(approx.a0_hat, policy.action_bound());
  MlpTape tape;
  const RowVector q = critic.forward(states, a, tape);
  const double scale = resolve_scale(q, q_scale);

  LossResult out;
  out.value = -q.mean() / scale;
  const RowVector d_q = RowVector::Constant(n, -1.0 / (scale * n));
  Matrix d_a = critic.backward(tape, d_q, nullptr);
  mask_clamped(approx.a0_hat, policy.action_bound(), d_a);
  out.grad = policy.params().zeros_like();
  backprop_noise(policy, approx.pass,
                 noise_grad_from_action_grad(policy.schedule(), approx.pass, d_a),
                 out.grad);
  return out;
}

LossResult td3_policy_loss(const DiffusionPolicy& policy, const DoubleQ& dq,
                           const Matrix& s, const Matrix& a, Rng& rng) {
  const ActionApproximation approx = approx_action_batch(policy, s, a, rng);
  std::bernoulli_distribution coin(0.5);
  return td3_policy_loss(policy, dq, approx, s, coin(rng) ? 1 : 0);
}

RowVector crr_advantage(const DoubleQ& dq, const Matrix& s, const Matrix& a,
                        const Matrix& a0_hat, double action_bound,
                        const AlgoConfig& config, Rng& rng) {
  config.validate();
  if (a0_hat.rows() != a.rows() || a0_hat.cols() != a.cols()) {
    throw ShapeError("crr_advantage: a0_hat shape differs from a");
  }
  const RowVector q = min_q(dq, s, a, false);
  RowVector baseline = RowVector::Zero(a.cols());
  for (int i = 0; i < config.crr_sample_n; ++i) {
    const Matrix sample = clamp_actions(
        a0_hat + config.crr_sigma * standard_normal(a.rows(), a.cols(), rng),
        action_bound);
    baseline += min_q(dq, s, sample, false);
  }
  return q - baseline / config.crr_sample_n;
}

double weight_fn(double arg, double temp, double cap) {
  if (!(temp > 0.0)) throw ParameterError("temperature must be > 0");
  const double clipped = std::clamp(arg, -20.0 * temp, 20.0 * temp);
  const double w = std::exp(clipped / temp);
  return cap > 0.0 ? std::min(w, cap) : w;
}

RowVector weight_fn(const RowVector& arg, double temp, double cap) {
  RowVector w(arg.size());
  for (Index j = 0; j < arg.size(); ++j) w(j) = weight_fn(arg(j), temp, cap);
  return w;
}

RowVector iql_weights(const DoubleQ& dq, const ValueFunction& vf,
                      const Matrix& s, const Matrix& a,
                      const AlgoConfig& config) {
  const RowVector adv = min_q(dq, s, a, true) - vf.forward(s);
  return weight_fn(adv, config.temp, config.weight_cap);
}

RowVector crr_weights(const DoubleQ& dq, const Matrix& s, const Matrix& a,
                      const Matrix& a0_hat, double action_bound,
                      const AlgoConfig& config, Rng& rng) {
  return weight_fn(crr_advantage(dq, s, a, a0_hat, action_bound, config, rng),
                   config.temp, config.weight_cap);
}

LossResult weighted_regression_loss(const DiffusionPolicy& policy,
                                    const ActionApproximation& approx,
                                    const Matrix& a, const RowVector& weights) {
  const Index n = a.cols();
  if (n == 0) throw ParameterError("empty batch");
  if (weights.size() != n || approx.a0_hat.cols() != n ||
      approx.a0_hat.rows() != a.rows()) {
    throw ShapeError("weighted_regression_loss: batch shapes differ");
  }
  if ((weights.array() < 0.0).any()) throw ParameterError("negative weight");
  const Matrix diff = approx.a0_hat - a;
  LossResult out;
  out.value = (diff.colwise().squaredNorm().array() * weights.array()).sum() / n;
  const Matrix d_a0 = (2.0 / n) * (diff.array().rowwise() * weights.array()).matrix();
  out.grad = policy.params().zeros_like();
  backprop_noise(policy, approx.pass,
                 noise_grad_from_action_grad(policy.schedule(), approx.pass, d_a0),
                 out.grad);
  return out;
}

double elbo_coefficient(const NoiseSchedule& schedule, int k) {
  if (k < 2 || k > schedule.steps()) {
    throw ParameterError("elbo coefficient needs 2 <= k <= K");
  }
  return schedule.beta(k) /
         (2.0 * schedule.alpha(k) * (1.0 - schedule.alpha_bar(k - 1)));
}

LossResult weighted_elbo_loss(const DiffusionPolicy& policy,
                              const NoisePass& pass, const RowVector& weights) {
  const Index n = pass.eps.cols();
  if (n == 0) throw ParameterError("empty batch");
  if (weights.size() != n) throw ShapeError("weighted_elbo_loss: weight count");
  const Matrix diff = pass.eps_hat - pass.eps;
  RowVector c(n);
  for (Index j = 0; j < n; ++j) {
    c(j) = weights(j) *
           elbo_coefficient(policy.schedule(),
                            static_cast<int>(pass.k[static_cast<std::size_t>(j)]));
  }
  LossResult out;
  out.value = (diff.colwise().squaredNorm().array() * c.array()).sum() / n;
  out.grad = policy.params().zeros_like();
  backprop_noise(policy, pass,
                 (2.0 / n) * (diff.array().rowwise() * c.array()).matrix(),
                 out.grad);
  return out;
}

LossResult weighted_elbo_loss(const DiffusionPolicy& policy, const Matrix& s,
                              const Matrix& a, const RowVector& weights,
                              Rng& rng) {
  if (policy.schedule().steps() < 2) {
    throw ParameterError("weighted ELBO needs at least 2 diffusion steps");
  }
  return weighted_elbo_loss(policy, corrupt_and_predict(policy, s, a, rng, 2),
                            weights);
}

LossResult full_chain_policy_loss(const DiffusionPolicy& policy,
                                  const DoubleQ& dq, const Matrix& s,
                                  int critic_index, Rng& rng,
                                  std::optional<double> q_scale) {
  const CriticNet& critic = pick(dq, critic_index);
  const NoiseSchedule& sch = policy.schedule();
  const int steps = sch.steps();
  const Index n = s.cols();
  if (n == 0) throw ParameterError("empty batch");

  std::vector<MlpTape> tapes(static_cast<std::size_t>(steps) + 1);
  Matrix a = standard_normal(policy.action_dim(), n, rng);
  for (int k = steps; k >= 1; --k) {
    const std::vector<double> kk(static_cast<std::size_t>(n), k);
    const Matrix eps =
        policy.net().forward(a, s, kk, tapes[static_cast<std::size_t>(k)]);
    a = sch.inv_sqrt_alpha(k) *
        (a - (sch.beta(k) / sch.sqrt_one_minus_alpha_bar(k)) * eps);
    if (k > 1) a += std::sqrt(sch.beta(k)) * standard_normal(a.rows(), n, rng);
  }

  const Matrix a_clamped = clamp_actions(a, policy.action_bound());
  MlpTape ctape;
  const RowVector q = critic.forward(s, a_clamped, ctape);
  const double scale = resolve_scale(q, q_scale);

  LossResult out;
  out.value = -q.mean() / scale;
  out.grad = policy.params().zeros_like();
  Matrix d_a =
      critic.backward(ctape, RowVector::Constant(n, -1.0 / (scale * n)), nullptr);
  mask_clamped(a, policy.action_bound(), d_a);
  // a^(k-1) = c1 (a^k - c2 eps(a^k)) + noise
  for (int k = 1; k <= steps; ++k) {
    const double c1 = sch.inv_sqrt_alpha(k);
    const double c2 = sch.beta(k) / sch.sqrt_one_minus_alpha_bar(k);
    const Matrix d_eps = (-c1 * c2) * d_a;
    const Matrix d_in = policy.net().backward(
        tapes[static_cast<std::size_t>(k)], d_eps, &out.grad);
    d_a = c1 * d_a + d_in;
  }
  return out;
}

}  // namespace edp

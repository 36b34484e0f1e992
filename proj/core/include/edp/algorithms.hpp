#ifndef EDP_ALGORITHMS_HPP_
#define EDP_ALGORITHMS_HPP_

#include <optional>
#include <string_view>

#include "edp/critic.hpp"
#include "edp/diffusion_policy.hpp"

namespace edp {

enum class AlgoKind { kTd3Bc, kCrr, kIql };
enum class LikelihoodVariant { kApproxGaussian, kWeightedElbo };

AlgoKind parse_algo_kind(std::string_view name);
std::string_view to_string(AlgoKind kind);
LikelihoodVariant parse_likelihood_variant(std::string_view name);
std::string_view to_string(LikelihoodVariant variant);

struct AlgoConfig {
  AlgoKind algo = AlgoKind::kTd3Bc;
  double lambda = 1.0;        // weight of the policy-improvement term
  double temp = 1.0;          // CRR / IQL temperature
  double expectile = 0.7;     // IQL tau
  int crr_sample_n = 10;
  double crr_sigma = 1.0;
  LikelihoodVariant likelihood = LikelihoodVariant::kApproxGaussian;
  double weight_cap = 100.0;  // <= 0 disables the cap

  void validate() const;
};

// -E[Q(s, clamp(a0_hat))] / mean|Q|, with the normalizer held constant.
// critic_index picks Q1 (0) or Q2 (1). q_scale overrides the normalizer.
LossResult td3_policy_loss(const DiffusionPolicy& policy, const DoubleQ& dq,
                           const ActionApproximation& approx,
                           const Matrix& states, int critic_index,
                           std::optional<double> q_scale = std::nullopt);
// Draws the approximation and the critic choice from rng.
LossResult td3_policy_loss(const DiffusionPolicy& policy, const DoubleQ& dq,
                           const Matrix& s, const Matrix& a, Rng& rng);

// min-Q(s, a) - (1/N) sum_i min-Q(s, clamp(a0_hat + sigma z_i)) on the online
// critics.
RowVector crr_advantage(const DoubleQ& dq, const Matrix& s, const Matrix& a,
                        const Matrix& a0_hat, double action_bound,
                        const AlgoConfig& config, Rng& rng);

// exp(clip(arg, -20 temp, 20 temp) / temp), optionally capped.
double weight_fn(double arg, double temp, double cap = 0.0);
RowVector weight_fn(const RowVector& arg, double temp, double cap = 0.0);

// IQL weights from min-target-Q(s, a) - V(s).
RowVector iql_weights(const DoubleQ& dq, const ValueFunction& vf,
                      const Matrix& s, const Matrix& a,
                      const AlgoConfig& config);
RowVector crr_weights(const DoubleQ& dq, const Matrix& s, const Matrix& a,
                      const Matrix& a0_hat, double action_bound,
                      const AlgoConfig& config, Rng& rng);

// (1/B) sum_b w_b ||a_b - a0_hat_b||^2 with a0_hat unclamped.
LossResult weighted_regression_loss(const DiffusionPolicy& policy,
                                    const ActionApproximation& approx,
                                    const Matrix& a, const RowVector& weights);

// beta^k / (2 alpha^k (1 - alpha_bar^(k-1))), defined for k >= 2.
double elbo_coefficient(const NoiseSchedule& schedule, int k);

// (1/B) sum_b c(k_b) w_b ||eps_b - eps_hat_b||^2. The pass must use k >= 2.
LossResult weighted_elbo_loss(const DiffusionPolicy& policy,
                              const NoisePass& pass, const RowVector& weights);
// Draws k from {2..K} and fresh noise.
LossResult weighted_elbo_loss(const DiffusionPolicy& policy, const Matrix& s,
                              const Matrix& a, const RowVector& weights,
                              Rng& rng);

// Baseline policy loss that samples a0 through the whole reverse chain and
// backpropagates through every step: -mean Q(s, a0) / scale.
LossResult full_chain_policy_loss(const DiffusionPolicy& policy,
                                  const DoubleQ& dq, const Matrix& s,
                                  int critic_index, Rng& rng,
                                  std::optional<double> q_scale = std::nullopt);

}  // namespace edp

#endif  // EDP_ALGORITHMS_HPP_

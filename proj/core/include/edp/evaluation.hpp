#ifndef EDP_EVALUATION_HPP_
#define EDP_EVALUATION_HPP_

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "edp/critic.hpp"
#include "edp/dataset.hpp"
#include "edp/diffusion_policy.hpp"
#include "edp/env.hpp"

namespace edp {

struct EvalConfig {
  int eas_n = 10;
  int episodes = 100;
  std::uint64_t eval_seed = 2024;
  bool use_eas = true;  // false: act with a single eval_sample draw
  SamplerConfig sampler;

  void validate() const;
};

// Index drawn from softmax(q) after max-subtraction; differences below -500
// are clipped before exponentiation.
std::size_t eas_choose(std::span<const double> q, Rng& rng);

// For every state column: n candidates from eval_sample, one kept with
// probability proportional to exp(min-Q). states are already normalized.
Matrix eas_select(const DiffusionPolicy& policy, const DoubleQ& dq,
                  const Matrix& states, int n, const SamplerConfig& sampler,
                  Rng& rng);

struct EvalReport {
  std::vector<double> returns;
  double mean_return = 0.0;
  double std_return = 0.0;
  double normalized_score = 0.0;
};

// Maps a batch of raw environment states (one per column) to actions.
using Actor = std::function<Matrix(const Matrix& raw_states, Rng& rng)>;

// Runs `episodes` episodes in lock step with actions from `actor`.
EvalReport evaluate_actor(const Actor& actor, const SyntheticEnv& env,
                          const ScoreAnchors& anchors, int episodes,
                          std::uint64_t seed);

EvalReport evaluate_policy(const DiffusionPolicy& policy, const DoubleQ& dq,
                           const std::optional<StateNormalizer>& normalizer,
                           const SyntheticEnv& env, const ScoreAnchors& anchors,
                           const EvalConfig& config);

}  // namespace edp

#endif  // EDP_EVALUATION_HPP_

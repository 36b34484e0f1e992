#ifndef EDP_ENV_HPP_
#define EDP_ENV_HPP_

#include <string_view>

#include "edp/types.hpp"

namespace edp {

enum class EnvKind { kBimodalBandit, kPointMass };

EnvKind parse_env_kind(std::string_view name);
std::string_view to_string(EnvKind kind);

struct StepResult {
  Vector s_next;
  double r = 0.0;
  bool done = false;
  bool clamped = false;  // the action was outside the bounds
};

struct ScoreAnchors {
  double random_score = 0.0;
  double expert_score = 0.0;
};

/// Small synthetic tasks with known optima.
///
/// BimodalBandit: one-step episodes, reward
///   sum_j h_j exp(-||a - m_j||^2 / (2 w^2)), state drawn uniform and carried
///   through unchanged.
/// PointMass: position in [-1, 1]^2, s' = clamp(s + 0.1 a),
///   r = -||s' - goal||^2, 40 steps.
class SyntheticEnv {
 public:
  static SyntheticEnv bimodal_bandit(int state_dim = 2, int action_dim = 2);
  static SyntheticEnv point_mass();
  static SyntheticEnv make(EnvKind kind);

  EnvKind kind() const { return kind_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  double action_bound() const { return action_bound_; }
  int episode_len() const { return episode_len_; }

  // Bandit parameters.
  const Vector& mode(int j) const { return j == 0 ? mode0_ : mode1_; }
  double mode_height(int j) const { return j == 0 ? h0_ : h1_; }
  double mode_width() const { return width_; }
  // Point-mass goal.
  const Vector& goal() const { return goal_; }

  Vector reset(Rng& rng) const;
  // t is the 0-based index of this step within the episode.
  StepResult step(const Vector& s, const Vector& a, int t, Rng& rng) const;
  double reward(const Vector& s, const Vector& a) const;

  // The scripted best action (bandit: argmax of the reward; point mass:
  // per-coordinate greedy move toward the goal).
  Vector expert_action(const Vector& s) const;

  // Random: mean return of the uniform policy over `episodes` episodes.
  // Expert: bandit grid search at resolution 1e-3, point mass greedy rollouts.
  ScoreAnchors optimal_score(int episodes = 10000,
                             std::uint64_t seed = 12345) const;

 private:
  EnvKind kind_ = EnvKind::kBimodalBandit;
  int state_dim_ = 2;
  int action_dim_ = 2;
  double action_bound_ = 1.0;
  int episode_len_ = 1;
  Vector mode0_, mode1_;
  double h0_ = 1.0, h1_ = 0.6, width_ = 0.15;
  Vector goal_;
};

double normalized_score(double mean_return, const ScoreAnchors& anchors);

}  // namespace edp

#endif  // EDP_ENV_HPP_

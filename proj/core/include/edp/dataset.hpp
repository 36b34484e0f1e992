#ifndef EDP_DATASET_HPP_
#define EDP_DATASET_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "edp/batch.hpp"
#include "edp/env.hpp"

namespace edp {

// Per-dimension state statistics; apply() maps raw states to (s - mean) / std.
struct StateNormalizer {
  Vector mean;
  Vector std;

  Matrix apply(const Matrix& s) const;
  bool operator==(const StateNormalizer&) const = default;
};

/// Immutable transition store. Values are held at 32-bit precision, matching
/// the file format. States are kept raw; when normalization statistics are
/// attached, batches are produced with normalized s and s'.
class OfflineDataset {
 public:
  OfflineDataset() = default;
  OfflineDataset(int state_dim, int action_dim, Eigen::MatrixXf states,
                 Eigen::MatrixXf actions, Eigen::RowVectorXf rewards,
                 Eigen::MatrixXf next_states, Eigen::RowVectorXf dones,
                 std::optional<StateNormalizer> normalizer = std::nullopt);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  Index size() const { return states_.cols(); }

  const Eigen::MatrixXf& states() const { return states_; }
  const Eigen::MatrixXf& actions() const { return actions_; }
  const Eigen::RowVectorXf& rewards() const { return rewards_; }
  const Eigen::MatrixXf& next_states() const { return next_states_; }
  const Eigen::RowVectorXf& dones() const { return dones_; }
  const std::optional<StateNormalizer>& normalizer() const {
    return normalizer_;
  }

  TransitionBatch batch(std::span<const Index> indices) const;
  TransitionBatch all() const;

  bool operator==(const OfflineDataset& other) const;

 private:
  int state_dim_ = 0;
  int action_dim_ = 0;
  Eigen::MatrixXf states_, actions_, next_states_;
  Eigen::RowVectorXf rewards_, dones_;
  std::optional<StateNormalizer> normalizer_;
};

// Behavior-mixture component and its probability. Components:
//   bandit:    mode0, mode1 (Gaussian around a mode), uniform
//   pointmass: expert (greedy, small noise), noisy (greedy, large noise and
//              epsilon-uniform actions), uniform
struct MixtureComponent {
  std::string name;
  double weight = 0.0;
};
using BehaviorMixture = std::vector<MixtureComponent>;

// Parses "name:weight,name:weight".
BehaviorMixture parse_mixture(const std::string& spec);
std::string format_mixture(const BehaviorMixture& mixture);
BehaviorMixture default_mixture(EnvKind kind);

struct MixtureParams {
  double mode_std = 0.05;
  double expert_noise = 0.1;
  double noisy_noise = 0.5;
  double noisy_epsilon = 0.3;
};

OfflineDataset generate_dataset(const SyntheticEnv& env,
                                const BehaviorMixture& mixture, Index n,
                                std::uint64_t seed,
                                const MixtureParams& params = {});

void save_dataset(const OfflineDataset& ds, const std::string& path);
OfflineDataset load_dataset(const std::string& path);

// Copy of ds with statistics of its raw states (std floored at 1e-3).
OfflineDataset normalize_states(const OfflineDataset& ds);

}  // namespace edp

#endif  // EDP_DATASET_HPP_

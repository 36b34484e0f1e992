#ifndef EDP_NETWORKS_HPP_
#define EDP_NETWORKS_HPP_

#include <cstdint>
#include <span>

#include "edp/mlp.hpp"

namespace edp {

struct NetConfig {
  int hidden_dim = 64;
  int embed_dim = 16;
  Activation activation = Activation::kMish;
};

/// Noise-prediction network eps_theta(a^k, k; s). Input is the concatenation
/// [a^k; s; sinusoidal_embed(k)], three hidden layers, linear head of size
/// dim(a). The head starts at zero so an untrained policy predicts no noise.
class NoiseNet {
 public:
  NoiseNet() = default;
  NoiseNet(int action_dim, int state_dim, const NetConfig& config, Rng& rng);

  int action_dim() const { return action_dim_; }
  int state_dim() const { return state_dim_; }
  int embed_dim() const { return embed_dim_; }
  const Mlp& mlp() const { return mlp_; }
  Params& params() { return mlp_.params(); }
  const Params& params() const { return mlp_.params(); }

  // a_k: dim(a) x B, s: dim(s) x B, k: B (possibly fractional) step values.
  Matrix forward(const Matrix& a_k, const Matrix& s,
                 std::span<const double> k) const;
  Matrix forward(const Matrix& a_k, const Matrix& s, std::span<const double> k,
                 MlpTape& tape) const;
  // Returns d loss / d a_k; parameter gradients are accumulated into *grad.
  Matrix backward(const MlpTape& tape, const Matrix& d_eps, Params* grad) const;

 private:
  Matrix assemble(const Matrix& a_k, const Matrix& s,
                  std::span<const double> k) const;

  int action_dim_ = 0;
  int state_dim_ = 0;
  int embed_dim_ = 0;
  Mlp mlp_;
};

// Process-wide count of per-sample noise-network evaluations (one per column
// of every forward pass). Used by the benchmark harness and tests.
std::uint64_t noise_net_evaluations();
void reset_noise_net_evaluations();

/// Scalar critic. Q nets take [s; a]; value nets (action_dim = 0) take s.
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(int state_dim, int action_dim, const NetConfig& config, Rng& rng);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const Mlp& mlp() const { return mlp_; }
  Params& params() { return mlp_.params(); }
  const Params& params() const { return mlp_.params(); }

  RowVector forward(const Matrix& s, const Matrix& a) const;
  RowVector forward(const Matrix& s, const Matrix& a, MlpTape& tape) const;
  // Returns d loss / d a (empty for value nets).
  Matrix backward(const MlpTape& tape, const RowVector& d_q, Params* grad) const;

 private:
  Matrix assemble(const Matrix& s, const Matrix& a) const;

  int state_dim_ = 0;
  int action_dim_ = 0;
  Mlp mlp_;
};

}  // namespace edp

#endif  // EDP_NETWORKS_HPP_

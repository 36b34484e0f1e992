#include "edp/networks.hpp"

#include <atomic>
#include <string>

#include "edp/errors.hpp"

namespace edp {
namespace {

std::atomic<std::uint64_t> g_noise_evals{0};

}  // namespace

std::uint64_t noise_net_evaluations() { return g_noise_evals.load(); }
void reset_noise_net_evaluations() { g_noise_evals.store(0); }

NoiseNet::NoiseNet(int action_dim, int state_dim, const NetConfig& config,
                   Rng& rng)
    : action_dim_(action_dim),
      state_dim_(state_dim),
      embed_dim_(config.embed_dim) {
  if (action_dim <= 0 || state_dim < 0) {
    throw ParameterError("NoiseNet: invalid action/state dimensions");
  }
  if (config.embed_dim <= 0 || config.embed_dim % 2 != 0) {
    throw ParameterError("NoiseNet: embed_dim must be even and positive");
  }
  const int in = action_dim + state_dim + config.embed_dim;
  const int h = config.hidden_dim;
  mlp_ = Mlp({in, h, h, h, action_dim}, config.activation, rng,
             /*zero_head=*/true);
}

Matrix NoiseNet::assemble(const Matrix& a_k, const Matrix& s,
                          std::span<const double> k) const {
  const Index batch = a_k.cols();
  if (a_k.rows() != action_dim_ || s.rows() != state_dim_ || s.cols() != batch ||
      static_cast<Index>(k.size()) != batch) {
    throw ShapeError("NoiseNet: input shapes do not match (a " +
                     std::to_string(a_k.rows()) + "x" + std::to_string(batch) +
                     ", s " + std::to_string(s.rows()) + "x" +
                     std::to_string(s.cols()) + ", k " +
                     std::to_string(k.size()) + ")");
  }
  Matrix x(action_dim_ + state_dim_ + embed_dim_, batch);
  x.topRows(action_dim_) = a_k;
  x.middleRows(action_dim_, state_dim_) = s;
  for (Index j = 0; j < batch; ++j) {
    x.col(j).tail(embed_dim_) = sinusoidal_embed(k[j], embed_dim_);
  }
  return x;
}

Matrix NoiseNet::forward(const Matrix& a_k, const Matrix& s,
                         std::span<const double> k) const {
  Matrix out = mlp_.forward(assemble(a_k, s, k));
  g_noise_evals.fetch_add(static_cast<std::uint64_t>(a_k.cols()));
  return out;
}

Matrix NoiseNet::forward(const Matrix& a_k, const Matrix& s,
                         std::span<const double> k, MlpTape& tape) const {
  Matrix out = mlp_.forward(assemble(a_k, s, k), tape);
  g_noise_evals.fetch_add(static_cast<std::uint64_t>(a_k.cols()));
  return out;
}

Matrix NoiseNet::backward(const MlpTape& tape, const Matrix& d_eps,
                          Params* grad) const {
  return mlp_.backward(tape, d_eps, grad).topRows(action_dim_);
}

CriticNet::CriticNet(int state_dim, int action_dim, const NetConfig& config,
                     Rng& rng)
    : state_dim_(state_dim), action_dim_(action_dim) {
  if (state_dim <= 0 || action_dim < 0) {
    throw ParameterError("CriticNet: invalid state/action dimensions");
  }
  const int h = config.hidden_dim;
  mlp_ = Mlp({state_dim + action_dim, h, h, h, 1}, config.activation, rng);
}

Matrix CriticNet::assemble(const Matrix& s, const Matrix& a) const {
  if (s.rows() != state_dim_ ||
      (action_dim_ > 0 && (a.rows() != action_dim_ || a.cols() != s.cols()))) {
    throw ShapeError("CriticNet: input shapes do not match");
  }
  if (action_dim_ == 0) return s;
  Matrix x(state_dim_ + action_dim_, s.cols());
  x.topRows(state_dim_) = s;
  x.bottomRows(action_dim_) = a;
  return x;
}

RowVector CriticNet::forward(const Matrix& s, const Matrix& a) const {
  return mlp_.forward(assemble(s, a));
}

RowVector CriticNet::forward(const Matrix& s, const Matrix& a,
                             MlpTape& tape) const {
  return mlp_.forward(assemble(s, a), tape);
}

Matrix CriticNet::backward(const MlpTape& tape, const RowVector& d_q,
                           Params* grad) const {
  Matrix d_in = mlp_.backward(tape, d_q, grad);
  return d_in.bottomRows(action_dim_);
}

}  // namespace edp

#include "edp/optim.hpp"

#include <cmath>

#include "edp/errors.hpp"

namespace edp {

AdamState AdamState::for_params(const Params& p) {
  AdamState st;
  st.m = p.zeros_like();
  st.v = p.zeros_like();
  return st;
}

void adam_step(Params& p, const Gradient& g, AdamState& state, double lr) {
  if (!p.same_shape(g) || !p.same_shape(state.m) || !p.same_shape(state.v)) {
    throw ShapeError("adam_step: parameter/gradient/moment shapes differ");
  }
  if (!(lr >= 0.0)) throw ParameterError("adam_step: learning rate must be >= 0");
  state.t += 1;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m.array() = b1 * m.array() + (1.0 - b1) * grad.array();
    v.array() = b2 * v.array() + (1.0 - b2) * grad.array().square();
    param.array() -= lr * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    update(p.layers[i].weight, g.layers[i].weight, state.m.layers[i].weight,
           state.v.layers[i].weight);
    update(p.layers[i].bias, g.layers[i].bias, state.m.layers[i].bias,
           state.v.layers[i].bias);
  }
}

double global_norm(const Gradient& g) { return std::sqrt(g.squared_norm()); }

Gradient clip_grad_norm(Gradient g, double max_norm) {
  if (!(max_norm > 0.0)) throw ParameterError("clip_grad_norm: max_norm must be > 0");
  const double norm = global_norm(g);
  if (norm > max_norm) g *= max_norm / norm;
  return g;
}

void polyak_update(Params& target, const Params& online, double rate) {
  if (!target.same_shape(online)) throw ShapeError("polyak_update: shape mismatch");
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ParameterError("polyak_update: rate must lie in [0, 1]");
  }
  if (rate == 0.0) return;
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& o = online.layers[i];
    t.weight = (1.0 - rate) * t.weight + rate * o.weight;
    t.bias = (1.0 - rate) * t.bias + rate * o.bias;
  }
}

}  // namespace edp

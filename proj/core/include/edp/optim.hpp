#ifndef EDP_OPTIM_HPP_
#define EDP_OPTIM_HPP_

#include <cstdint>

#include "edp/mlp.hpp"

namespace edp {

struct AdamState {
  Params m;
  Params v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const Params& p);
};

// One bias-corrected Adam update of p in place.
void adam_step(Params& p, const Gradient& g, AdamState& state, double lr);

double global_norm(const Gradient& g);

// Rescales g so its global L2 norm is at most max_norm.
Gradient clip_grad_norm(Gradient g, double max_norm);

// target <- (1 - rate) * target + rate * online.
void polyak_update(Params& target, const Params& online, double rate);

}  // namespace edp

#endif  // EDP_OPTIM_HPP_

#include "edp/env.hpp"

#include <cmath>
#include <string>

#include "edp/errors.hpp"

namespace edp {

EnvKind parse_env_kind(std::string_view name) {
  if (name == "bandit") return EnvKind::kBimodalBandit;
  if (name == "pointmass") return EnvKind::kPointMass;
  throw ParameterError("unknown environment '" + std::string(name) +
                       "' (expected bandit|pointmass)");
}

std::string_view to_string(EnvKind kind) {
  return kind == EnvKind::kBimodalBandit ? "bandit" : "pointmass";
}

SyntheticEnv SyntheticEnv::bimodal_bandit(int state_dim, int action_dim) {
  if (state_dim < 1 || action_dim < 1) {
    throw ParameterError("bandit dimensions must be positive");
  }
  SyntheticEnv env;
  env.kind_ = EnvKind::kBimodalBandit;
  env.state_dim_ = state_dim;
  env.action_dim_ = action_dim;
  env.episode_len_ = 1;
  env.mode0_ = Vector::Constant(action_dim, 0.6);
  env.mode1_ = Vector::Constant(action_dim, -0.6);
  return env;
}

SyntheticEnv SyntheticEnv::point_mass() {
  SyntheticEnv env;
  env.kind_ = EnvKind::kPointMass;
  env.state_dim_ = 2;
  env.action_dim_ = 2;
  env.episode_len_ = 40;
  env.goal_ = Vector::Constant(2, 0.5);
  return env;
}

SyntheticEnv SyntheticEnv::make(EnvKind kind) {
  return kind == EnvKind::kBimodalBandit ? bimodal_bandit() : point_mass();
}

Vector SyntheticEnv::reset(Rng& rng) const {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector s(state_dim_);
  for (Index i = 0; i < s.size(); ++i) s(i) = u(rng);
  return s;
}

double SyntheticEnv::reward(const Vector& s, const Vector& a) const {
  if (kind_ == EnvKind::kBimodalBandit) {
    const double denom = 2.0 * width_ * width_;
    return h0_ * std::exp(-(a - mode0_).squaredNorm() / denom) +
           h1_ * std::exp(-(a - mode1_).squaredNorm() / denom);
  }
  const Vector s_next = (s + 0.1 * a).cwiseMax(-1.0).cwiseMin(1.0);
  return -(s_next - goal_).squaredNorm();
}

StepResult SyntheticEnv::step(const Vector& s, const Vector& a, int t,
                              Rng& /*rng*/) const {
  if (s.size() != state_dim_ || a.size() != action_dim_) {
    throw ShapeError("env step: state/action dimension mismatch");
  }
  StepResult out;
  Vector act = a;
  if ((a.array().abs() > action_bound_).any()) {
    out.clamped = true;
    act = a.cwiseMax(-action_bound_).cwiseMin(action_bound_);
  }
  out.r = reward(s, act);
  if (kind_ == EnvKind::kBimodalBandit) {
    out.s_next = s;
    out.done = true;
  } else {
    out.s_next = (s + 0.1 * act).cwiseMax(-1.0).cwiseMin(1.0);
    out.done = t + 1 >= episode_len_;
  }
  return out;
}

Vector SyntheticEnv::expert_action(const Vector& s) const {
  if (kind_ == EnvKind::kPointMass) {
    return ((goal_ - s) / 0.1).cwiseMax(-action_bound_).cwiseMin(action_bound_);
  }
  // The maximum of two isotropic bumps lies on the line through their
  // centres; search it at resolution 1e-3 within the action box.
  const Vector dir = mode0_ - mode1_;
  Vector best = mode0_;
  double best_r = reward(s, best);
  for (int i = -2000; i <= 2000; ++i) {
    const Vector a = mode1_ + (i * 1e-3) * dir;
    if ((a.array().abs() > action_bound_).any()) continue;
    const double r = reward(s, a);
    if (r > best_r) {
      best_r = r;
      best = a;
    }
  }
  return best;
}

ScoreAnchors SyntheticEnv::optimal_score(int episodes,
                                         std::uint64_t seed) const {
  if (episodes < 1) throw ParameterError("episodes must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-action_bound_, action_bound_);
  ScoreAnchors out;
  const Vector bandit_best =
      kind_ == EnvKind::kBimodalBandit ? expert_action(Vector::Zero(state_dim_))
                                       : Vector();
  for (int e = 0; e < episodes; ++e) {
    const Vector s0 = reset(rng);
    Vector s = s0;
    for (int t = 0; t < episode_len_; ++t) {
      Vector a(action_dim_);
      for (Index i = 0; i < a.size(); ++i) a(i) = u(rng);
      const StepResult res = step(s, a, t, rng);
      out.random_score += res.r;
      s = res.s_next;
      if (res.done) break;
    }
    s = s0;
    for (int t = 0; t < episode_len_; ++t) {
      const Vector a = kind_ == EnvKind::kBimodalBandit ? bandit_best
                                                        : expert_action(s);
      const StepResult res = step(s, a, t, rng);
      out.expert_score += res.r;
      s = res.s_next;
      if (res.done) break;
    }
  }
  out.random_score /= episodes;
  out.expert_score /= episodes;
  return out;
}

double normalized_score(double mean_return, const ScoreAnchors& anchors) {
  const double span = anchors.expert_score - anchors.random_score;
  if (!(std::abs(span) > 0.0)) throw NumericError("degenerate score anchors");
  return 100.0 * (mean_return - anchors.random_score) / span;
}

}  // namespace edp

#include "edp/diffusion_schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "edp/errors.hpp"

namespace edp {
namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void check_same_size(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

}  // namespace

ScheduleVariant parse_schedule_variant(std::string_view name) {
  if (name == "linear") return ScheduleVariant::kLinear;
  if (name == "vp") return ScheduleVariant::kVariancePreserving;
  throw ParameterError("unknown schedule variant '" + std::string(name) +
                       "' (expected linear|vp)");
}

std::string_view to_string(ScheduleVariant variant) {
  return variant == ScheduleVariant::kLinear ? "linear" : "vp";
}

NoiseSchedule NoiseSchedule::build(ScheduleVariant variant, int steps,
                                   double beta_min, double beta_max) {
  if (steps < 1) throw ParameterError("schedule needs at least one step");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !std::isfinite(beta_max)) {
    throw ParameterError("schedule requires 0 < beta_min <= beta_max");
  }
  if (variant == ScheduleVariant::kLinear && !(beta_max < 1.0)) {
    throw ParameterError("linear schedule requires beta_max < 1");
  }

  NoiseSchedule s;
  s.variant_ = variant;
  s.steps_ = steps;
  const auto n = static_cast<std::size_t>(steps) + 1;
  s.beta_.assign(n, 0.0);
  s.alpha_.assign(n, 1.0);
  s.alpha_bar_.assign(n, 1.0);

  const double K = steps;
  for (int k = 1; k <= steps; ++k) {
    double beta = 0.0;
    if (variant == ScheduleVariant::kLinear) {
      beta = steps == 1 ? beta_min
                        : beta_min + (k - 1) / (K - 1) * (beta_max - beta_min);
    } else {
      beta = -std::expm1(-beta_min / K -
                         0.5 * (beta_max - beta_min) * (2.0 * k - 1.0) / (K * K));
    }
    if (!(beta > 0.0 && beta < 1.0)) {
      throw ParameterError("schedule produced beta^" + std::to_string(k) +
                           " outside (0, 1)");
    }
    s.beta_[k] = beta;
    s.alpha_[k] = 1.0 - beta;
    s.alpha_bar_[k] = s.alpha_bar_[k - 1] * s.alpha_[k];
  }

  s.sqrt_alpha_bar_.resize(n);
  s.sqrt_one_minus_alpha_bar_.resize(n);
  s.inv_sqrt_alpha_.resize(n);
  s.log_mean_coeff_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.sqrt_alpha_bar_[k] = std::sqrt(s.alpha_bar_[k]);
    s.sqrt_one_minus_alpha_bar_[k] = std::sqrt(1.0 - s.alpha_bar_[k]);
    s.inv_sqrt_alpha_[k] = 1.0 / std::sqrt(s.alpha_[k]);
    s.log_mean_coeff_[k] = 0.5 * std::log(s.alpha_bar_[k]);
  }
  return s;
}

int NoiseSchedule::check(int k, int lo) const {
  if (k < lo || k > steps_) {
    throw ParameterError("diffusion step " + std::to_string(k) +
                         " outside [" + std::to_string(lo) + ", " +
                         std::to_string(steps_) + "]");
  }
  return k;
}

double NoiseSchedule::log_mean_coeff(double k) const {
  if (steps_ == 1) return log_mean_coeff_[1];
  // Linear interpolation on [1, K], extrapolating the end segments.
  const double clamped = std::clamp(k, 1.0, static_cast<double>(steps_));
  int lo = static_cast<int>(std::floor(clamped));
  lo = std::min(lo, steps_ - 1);
  const double frac = k - lo;
  return log_mean_coeff_[lo] +
         frac * (log_mean_coeff_[lo + 1] - log_mean_coeff_[lo]);
}

double NoiseSchedule::mean_coeff(double k) const {
  return std::exp(log_mean_coeff(k));
}

double NoiseSchedule::noise_coeff(double k) const {
  return std::sqrt(-std::expm1(2.0 * log_mean_coeff(k)));
}

double NoiseSchedule::log_snr(double k) const {
  const double lm = log_mean_coeff(k);
  return lm - 0.5 * std::log(-std::expm1(2.0 * lm));
}

double NoiseSchedule::step_from_log_snr(double lambda) const {
  if (steps_ == 1) return 1.0;
  // log(sqrt(ab)) = -0.5 * log(1 + exp(-2 lambda)).
  const double target = -0.5 * softplus(-2.0 * lambda);
  // log_mean_coeff_ is strictly decreasing on [1, K].
  const auto first = log_mean_coeff_.begin() + 1;
  const auto last = log_mean_coeff_.end();
  auto it = std::lower_bound(first, last, target,
                             [](double a, double b) { return a > b; });
  int hi = static_cast<int>(it - log_mean_coeff_.begin());
  hi = std::clamp(hi, 2, steps_);
  const int lo = hi - 1;
  const double y0 = log_mean_coeff_[lo];
  const double y1 = log_mean_coeff_[hi];
  return lo + (target - y0) / (y1 - y0);
}

Vector forward_diffuse(const NoiseSchedule& schedule, const Vector& a0, int k,
                       const Vector& eps) {
  check_same_size(a0, eps, "forward_diffuse");
  if (k < 1 || k > schedule.steps()) {
    throw ParameterError("forward_diffuse: step outside [1, K]");
  }
  return schedule.sqrt_alpha_bar(k) * a0 +
         schedule.sqrt_one_minus_alpha_bar(k) * eps;
}

Vector approximate_action(const NoiseSchedule& schedule, const Vector& a_k,
                          int k, const Vector& eps_pred) {
  check_same_size(a_k, eps_pred, "approximate_action");
  if (k < 1 || k > schedule.steps()) {
    throw ParameterError("approximate_action: step outside [1, K]");
  }
  const double inv = 1.0 / schedule.sqrt_alpha_bar(k);
  return inv * a_k - (schedule.sqrt_one_minus_alpha_bar(k) * inv) * eps_pred;
}

Vector ddpm_reverse_step(const NoiseSchedule& schedule, const Vector& eps_pred,
                         const Vector& a_k, int k, const Vector& z) {
  check_same_size(a_k, eps_pred, "ddpm_reverse_step");
  check_same_size(a_k, z, "ddpm_reverse_step");
  if (k < 1 || k > schedule.steps()) {
    throw ParameterError("ddpm_reverse_step: step outside [1, K]");
  }
  const double coef = schedule.beta(k) / schedule.sqrt_one_minus_alpha_bar(k);
  return schedule.inv_sqrt_alpha(k) * (a_k - coef * eps_pred) +
         std::sqrt(schedule.beta(k)) * z;
}

}  // namespace edp

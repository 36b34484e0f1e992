#ifndef EDP_DIFFUSION_SCHEDULE_HPP_
#define EDP_DIFFUSION_SCHEDULE_HPP_

#include <string_view>
#include <vector>

#include "edp/types.hpp"

namespace edp {

enum class ScheduleVariant { kLinear, kVariancePreserving };

ScheduleVariant parse_schedule_variant(std::string_view name);
std::string_view to_string(ScheduleVariant variant);

/// Variance schedule beta^1..beta^K with the derived alpha and cumulative
/// alpha_bar tables. Step indices are 1-based; alpha_bar(0) is 1 so that
/// k = 0 denotes the clean action.
///
/// Immutable after construction. Square-root tables are precomputed so the
/// training loop never recomputes them.
class NoiseSchedule {
 public:
  static NoiseSchedule build(ScheduleVariant variant, int steps, double beta_min,
                             double beta_max);

  ScheduleVariant variant() const { return variant_; }
  int steps() const { return steps_; }

  double beta(int k) const { return beta_[check(k, 1)]; }
  double alpha(int k) const { return alpha_[check(k, 1)]; }
  double alpha_bar(int k) const { return alpha_bar_[check(k, 0)]; }
  double sqrt_alpha_bar(int k) const { return sqrt_alpha_bar_[check(k, 0)]; }
  double sqrt_one_minus_alpha_bar(int k) const {
    return sqrt_one_minus_alpha_bar_[check(k, 0)];
  }
  double inv_sqrt_alpha(int k) const { return inv_sqrt_alpha_[check(k, 1)]; }

  // True when alpha_bar^K < 1e-3, i.e. the terminal marginal is close to
  // N(0, I).
  bool terminal_bound_ok() const { return alpha_bar_[steps_] < 1e-3; }

  // Continuous-step view used by the ODE sampler. log(sqrt(alpha_bar)) is
  // interpolated piecewise-linearly between integer steps on [1, K].
  double log_mean_coeff(double k) const;
  double mean_coeff(double k) const;   // sqrt(alpha_bar)
  double noise_coeff(double k) const;  // sqrt(1 - alpha_bar)
  double log_snr(double k) const;      // log(sqrt(ab) / sqrt(1 - ab))
  double step_from_log_snr(double lambda) const;

 private:
  NoiseSchedule() = default;
  int check(int k, int lo) const;

  ScheduleVariant variant_ = ScheduleVariant::kVariancePreserving;
  int steps_ = 0;
  // All tables are indexed by k in [0, K]; entry 0 is only meaningful for the
  // alpha_bar family.
  std::vector<double> beta_, alpha_, alpha_bar_, sqrt_alpha_bar_,
      sqrt_one_minus_alpha_bar_, inv_sqrt_alpha_, log_mean_coeff_;
};

// a^k = sqrt(ab^k) a0 + sqrt(1 - ab^k) eps.
Vector forward_diffuse(const NoiseSchedule& schedule, const Vector& a0, int k,
                       const Vector& eps);

// Inverse of forward_diffuse with the noise replaced by a prediction. Not
// clipped.
Vector approximate_action(const NoiseSchedule& schedule, const Vector& a_k,
                          int k, const Vector& eps_pred);

// One ancestral DDPM step with variance beta^k. The caller passes z = 0 at
// k = 1.
Vector ddpm_reverse_step(const NoiseSchedule& schedule, const Vector& eps_pred,
                         const Vector& a_k, int k, const Vector& z);

}  // namespace edp

#endif  // EDP_DIFFUSION_SCHEDULE_HPP_

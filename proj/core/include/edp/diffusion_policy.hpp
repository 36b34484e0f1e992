#ifndef EDP_DIFFUSION_POLICY_HPP_
#define EDP_DIFFUSION_POLICY_HPP_

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "edp/diffusion_schedule.hpp"
#include "edp/networks.hpp"

namespace edp {

enum class SamplerMethod { kDdpmChain, kOdeSolver };

SamplerMethod parse_sampler_method(std::string_view name);
std::string_view to_string(SamplerMethod method);

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::kOdeSolver;
  int nfe = 15;                   // network calls for the ODE solver
  int ode_order = 3;              // 1 or 3
  double policy_scale = 1.0;      // multiplies every noise prediction
  double init_noise_scale = 1.0;  // a^K ~ init_noise_scale * N(0, I)

  void validate() const;
};

/// The policy pi_theta(a | s): a noise-prediction network, the schedule it was
/// trained with, and the action box [-bound, bound]^d.
class DiffusionPolicy {
 public:
  DiffusionPolicy() = default;
  DiffusionPolicy(NoiseNet net, NoiseSchedule schedule, double action_bound);

  int action_dim() const { return net_.action_dim(); }
  int state_dim() const { return net_.state_dim(); }
  double action_bound() const { return action_bound_; }
  const NoiseNet& net() const { return net_; }
  NoiseNet& net() { return net_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  Params& params() { return net_.params(); }
  const Params& params() const { return net_.params(); }

 private:
  NoiseNet net_;
  NoiseSchedule schedule_ =
      NoiseSchedule::build(ScheduleVariant::kLinear, 1, 0.5, 0.5);
  double action_bound_ = 1.0;
};

// Anything that predicts the corrupting noise: the policy network, or an
// analytic predictor in tests.
using NoisePredictor = std::function<Matrix(
    const Matrix& a_k, const Matrix& s, std::span<const double> k)>;

struct Denoiser {
  NoisePredictor predict;
  const NoiseSchedule* schedule = nullptr;
  int action_dim = 0;
  double action_bound = 1.0;
};

Denoiser make_denoiser(const DiffusionPolicy& policy);

// All samplers are batched: states is dim(s) x B, the result dim(a) x B.
Matrix sample_action_ddpm(const Denoiser& denoiser, const Matrix& states,
                          const SamplerConfig& config, Rng& rng);
Matrix sample_action_ode(const Denoiser& denoiser, const Matrix& states,
                         const SamplerConfig& config, Rng& rng);
Matrix eval_sample(const Denoiser& denoiser, const Matrix& states,
                   const SamplerConfig& config, Rng& rng);

Matrix sample_action_ddpm(const DiffusionPolicy& policy, const Matrix& states,
                          const SamplerConfig& config, Rng& rng);
Matrix sample_action_ode(const DiffusionPolicy& policy, const Matrix& states,
                         const SamplerConfig& config, Rng& rng);
Matrix eval_sample(const DiffusionPolicy& policy, const Matrix& states,
                   const SamplerConfig& config, Rng& rng);

// Network calls made by sample_action_ode for a given config.
std::vector<int> ode_step_orders(const SamplerConfig& config);

// ---------------------------------------------------------------------------
// Training-time passes

/// One corruption + noise prediction over a batch: a^k is built from the
/// dataset action with a fresh step k and noise eps per column, then eps_theta
/// is evaluated once per column.
struct NoisePass {
  std::vector<double> k;
  Matrix eps;
  Matrix a_k;
  Matrix eps_hat;
  MlpTape tape;
};

NoisePass corrupt_and_predict(const DiffusionPolicy& policy, const Matrix& s,
                              const Matrix& a0, Rng& rng, int k_min = 1);
// Same with caller-chosen steps and noise.
NoisePass corrupt_and_predict(const DiffusionPolicy& policy, const Matrix& s,
                              const Matrix& a0, std::vector<int> k,
                              Matrix eps);

// One-step clean-action estimate per column of pass.eps_hat. Not clipped.
Matrix approximate_actions(const NoiseSchedule& schedule, const NoisePass& pass);

// Chain rule through the approximation: d loss / d eps_hat given
// d loss / d a0_hat.
Matrix noise_grad_from_action_grad(const NoiseSchedule& schedule,
                                   const NoisePass& pass,
                                   const Matrix& d_a0_hat);

// Accumulates parameter gradients of a loss with d loss / d eps_hat = d_eps.
void backprop_noise(const DiffusionPolicy& policy, const NoisePass& pass,
                    const Matrix& d_eps, Gradient& grad);

struct LossResult {
  double value = 0.0;
  Gradient grad;
};

// Mean over the batch of ||eps - eps_hat||^2.
LossResult diffusion_bc_loss(const DiffusionPolicy& policy,
                             const NoisePass& pass);
LossResult diffusion_bc_loss(const DiffusionPolicy& policy, const Matrix& s,
                             const Matrix& a0, Rng& rng);

struct ActionApproximation {
  NoisePass pass;
  Matrix a0_hat;
};

// Corrupt the dataset actions and denoise them in one network call each.
ActionApproximation approx_action_batch(const DiffusionPolicy& policy,
                                        const Matrix& s, const Matrix& a,
                                        Rng& rng);

Matrix clamp_actions(const Matrix& a, double bound);

}  // namespace edp

#endif  // EDP_DIFFUSION_POLICY_HPP_

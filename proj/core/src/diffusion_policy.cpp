#include "edp/diffusion_policy.hpp"

#include <cmath>
#include <string>

#include "edp/errors.hpp"

namespace edp {

SamplerMethod parse_sampler_method(std::string_view name) {
  if (name == "ddpm") return SamplerMethod::kDdpmChain;
  if (name == "ode") return SamplerMethod::kOdeSolver;
  throw ParameterError("unknown sampler method '" + std::string(name) +
                       "' (expected ddpm|ode)");
}

std::string_view to_string(SamplerMethod method) {
  return method == SamplerMethod::kDdpmChain ? "ddpm" : "ode";
}

void SamplerConfig::validate() const {
  if (ode_order != 1 && ode_order != 3) {
    throw ParameterError("ode_order must be 1 or 3");
  }
  if (nfe < 1) throw ParameterError("nfe must be positive");
  if (nfe < ode_order) {
    throw ParameterError("nfe (" + std::to_string(nfe) +
                         ") must be at least ode_order (" +
                         std::to_string(ode_order) + ")");
  }
  if (!(policy_scale > 0.0)) throw ParameterError("policy_scale must be > 0");
  if (!(init_noise_scale >= 0.0 && init_noise_scale <= 1.0)) {
    throw ParameterError("init_noise_scale must lie in [0, 1]");
  }
}

DiffusionPolicy::DiffusionPolicy(NoiseNet net, NoiseSchedule schedule,
                                 double action_bound)
    : net_(std::move(net)),
      schedule_(std::move(schedule)),
      action_bound_(action_bound) {
  if (!(action_bound > 0.0)) throw ParameterError("action_bound must be > 0");
}

Denoiser make_denoiser(const DiffusionPolicy& policy) {
  const NoiseNet* net = &policy.net();
  return Denoiser{
      [net](const Matrix& a_k, const Matrix& s, std::span<const double> k) {
        return net->forward(a_k, s, k);
      },
      &policy.schedule(), policy.action_dim(), policy.action_bound()};
}

Matrix clamp_actions(const Matrix& a, double bound) {
  return a.cwiseMax(-bound).cwiseMin(bound);
}

namespace {

Matrix predict_scaled(const Denoiser& d, const Matrix& a, const Matrix& s,
                      double k, double scale) {
  const std::vector<double> steps(static_cast<std::size_t>(a.cols()), k);
  Matrix eps = d.predict(a, s, steps);
  if (scale != 1.0) eps *= scale;
  return eps;
}

Matrix initial_noise(const Denoiser& d, Index batch, const SamplerConfig& cfg,
                     Rng& rng) {
  Matrix a = standard_normal(d.action_dim, batch, rng);
  if (cfg.init_noise_scale != 1.0) a *= cfg.init_noise_scale;
  return a;
}

}  // namespace

Matrix sample_action_ddpm(const Denoiser& d, const Matrix& states,
                          const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  const NoiseSchedule& sch = *d.schedule;
  const Index batch = states.cols();
  Matrix a = initial_noise(d, batch, cfg, rng);
  for (int k = sch.steps(); k >= 1; --k) {
    const Matrix eps = predict_scaled(d, a, states, k, cfg.policy_scale);
    const double coef = sch.beta(k) / sch.sqrt_one_minus_alpha_bar(k);
    a = sch.inv_sqrt_alpha(k) * (a - coef * eps);
    if (k > 1) a += std::sqrt(sch.beta(k)) * standard_normal(a.rows(), batch, rng);
  }
  return clamp_actions(a, d.action_bound);
}

std::vector<int> ode_step_orders(const SamplerConfig& cfg) {
  cfg.validate();
  const int steps = cfg.nfe;
  std::vector<int> orders;
  if (cfg.ode_order == 1) {
    orders.assign(static_cast<std::size_t>(steps), 1);
    return orders;
  }
  // Third-order singlestep schedule: as many order-3 steps as fit, with a
  // lower-order tail so the total number of calls is exactly nfe.
  const int outer = steps / 3 + 1;
  if (steps % 3 == 0) {
    orders.assign(static_cast<std::size_t>(outer - 2), 3);
    orders.push_back(2);
    orders.push_back(1);
  } else {
    orders.assign(static_cast<std::size_t>(outer - 1), 3);
    orders.push_back(steps % 3);
  }
  return orders;
}

Matrix sample_action_ode(const Denoiser& d, const Matrix& states,
                         const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  const NoiseSchedule& sch = *d.schedule;
  if (sch.steps() < 2) {
    throw ParameterError("ODE sampler needs a schedule with at least 2 steps");
  }
  const std::vector<int> orders = ode_step_orders(cfg);
  const Index batch = states.cols();
  Matrix x = initial_noise(d, batch, cfg, rng);

  // Outer grid uniform in log-SNR from k = K (noisiest) to k = 1.
  const double lambda_start = sch.log_snr(sch.steps());
  const double lambda_end = sch.log_snr(1.0);
  const auto outer = static_cast<int>(orders.size());
  std::vector<double> grid(static_cast<std::size_t>(outer) + 1);
  for (int i = 0; i <= outer; ++i) {
    const double lam = lambda_start + (lambda_end - lambda_start) * i / outer;
    grid[static_cast<std::size_t>(i)] = sch.step_from_log_snr(lam);
  }
  grid.front() = sch.steps();
  grid.back() = 1.0;

  auto eps_at = [&](const Matrix& a, double k) {
    return predict_scaled(d, a, states, k, cfg.policy_scale);
  };

  for (int i = 0; i < outer; ++i) {
    const double ks = grid[static_cast<std::size_t>(i)];
    const double kt = grid[static_cast<std::size_t>(i) + 1];
    const double lam_s = sch.log_snr(ks);
    const double lam_t = sch.log_snr(kt);
    const double h = lam_t - lam_s;
    const double log_alpha_s = sch.log_mean_coeff(ks);
    const double log_alpha_t = sch.log_mean_coeff(kt);
    const double sigma_t = sch.noise_coeff(kt);
    const Matrix eps_s = eps_at(x, ks);

    const int order = orders[static_cast<std::size_t>(i)];
    if (order == 1) {
      x = std::exp(log_alpha_t - log_alpha_s) * x -
          sigma_t * std::expm1(h) * eps_s;
    } else if (order == 2) {
      const double r1 = 0.5;
      const double k1 = sch.step_from_log_snr(lam_s + r1 * h);
      const Matrix x1 = std::exp(sch.log_mean_coeff(k1) - log_alpha_s) * x -
                        sch.noise_coeff(k1) * std::expm1(r1 * h) * eps_s;
      const Matrix eps_1 = eps_at(x1, k1);
      const double phi_1 = std::expm1(h);
      x = std::exp(log_alpha_t - log_alpha_s) * x - sigma_t * phi_1 * eps_s -
          (0.5 / r1) * sigma_t * phi_1 * (eps_1 - eps_s);
    } else {
      const double r1 = 1.0 / 3.0;
      const double r2 = 2.0 / 3.0;
      const double k1 = sch.step_from_log_snr(lam_s + r1 * h);
      const double k2 = sch.step_from_log_snr(lam_s + r2 * h);
      const double phi_11 = std::expm1(r1 * h);
      const double phi_12 = std::expm1(r2 * h);
      const double phi_1 = std::expm1(h);
      const double phi_22 = std::expm1(r2 * h) / (r2 * h) - 1.0;
      const double phi_2 = phi_1 / h - 1.0;

      const Matrix x1 = std::exp(sch.log_mean_coeff(k1) - log_alpha_s) * x -
                        sch.noise_coeff(k1) * phi_11 * eps_s;
      const Matrix eps_1 = eps_at(x1, k1);
      const double sigma_2 = sch.noise_coeff(k2);
      const Matrix x2 = std::exp(sch.log_mean_coeff(k2) - log_alpha_s) * x -
                        sigma_2 * phi_12 * eps_s -
                        (r2 / r1) * sigma_2 * phi_22 * (eps_1 - eps_s);
      const Matrix eps_2 = eps_at(x2, k2);
      x = std::exp(log_alpha_t - log_alpha_s) * x - sigma_t * phi_1 * eps_s -
          (1.0 / r2) * sigma_t * phi_2 * (eps_2 - eps_s);
    }
  }
  return clamp_actions(x, d.action_bound);
}

Matrix eval_sample(const Denoiser& d, const Matrix& states,
                   const SamplerConfig& cfg, Rng& rng) {
  return cfg.method == SamplerMethod::kDdpmChain
             ? sample_action_ddpm(d, states, cfg, rng)
             : sample_action_ode(d, states, cfg, rng);
}

Matrix sample_action_ddpm(const DiffusionPolicy& policy, const Matrix& states,
                          const SamplerConfig& cfg, Rng& rng) {
  return sample_action_ddpm(make_denoiser(policy), states, cfg, rng);
}

Matrix sample_action_ode(const DiffusionPolicy& policy, const Matrix& states,
                         const SamplerConfig& cfg, Rng& rng) {
  return sample_action_ode(make_denoiser(policy), states, cfg, rng);
}

Matrix eval_sample(const DiffusionPolicy& policy, const Matrix& states,
                   const SamplerConfig& cfg, Rng& rng) {
  return eval_sample(make_denoiser(policy), states, cfg, rng);
}

// ---------------------------------------------------------------------------

NoisePass corrupt_and_predict(const DiffusionPolicy& policy, const Matrix& s,
                              const Matrix& a0, Rng& rng, int k_min) {
  const int steps = policy.schedule().steps();
  if (k_min < 1 || k_min > steps) {
    throw ParameterError("corrupt_and_predict: k_min outside [1, K]");
  }
  if (a0.cols() == 0) throw ParameterError("empty batch");
  std::uniform_int_distribution<int> pick(k_min, steps);
  std::vector<int> k(static_cast<std::size_t>(a0.cols()));
  for (auto& v : k) v = pick(rng);
  Matrix eps = standard_normal(a0.rows(), a0.cols(), rng);
  return corrupt_and_predict(policy, s, a0, std::move(k), std::move(eps));
}

NoisePass corrupt_and_predict(const DiffusionPolicy& policy, const Matrix& s,
                              const Matrix& a0, std::vector<int> k,
                              Matrix eps) {
  if (a0.cols() == 0) throw ParameterError("empty batch");
  if (a0.rows() != policy.action_dim() || eps.rows() != a0.rows() ||
      eps.cols() != a0.cols() || static_cast<Index>(k.size()) != a0.cols()) {
    throw ShapeError("corrupt_and_predict: shape mismatch");
  }
  const NoiseSchedule& sch = policy.schedule();
  NoisePass pass;
  pass.k.assign(k.begin(), k.end());
  pass.a_k.resize(a0.rows(), a0.cols());
  for (Index j = 0; j < a0.cols(); ++j) {
    const int kj = k[static_cast<std::size_t>(j)];
    pass.a_k.col(j) = sch.sqrt_alpha_bar(kj) * a0.col(j) +
                      sch.sqrt_one_minus_alpha_bar(kj) * eps.col(j);
  }
  pass.eps = std::move(eps);
  pass.eps_hat = policy.net().forward(pass.a_k, s, pass.k, pass.tape);
  return pass;
}

Matrix approximate_actions(const NoiseSchedule& sch, const NoisePass& pass) {
  Matrix out(pass.a_k.rows(), pass.a_k.cols());
  for (Index j = 0; j < out.cols(); ++j) {
    const int k = static_cast<int>(pass.k[static_cast<std::size_t>(j)]);
    const double inv = 1.0 / sch.sqrt_alpha_bar(k);
    out.col(j) = inv * pass.a_k.col(j) -
                 (sch.sqrt_one_minus_alpha_bar(k) * inv) * pass.eps_hat.col(j);
  }
  return out;
}

Matrix noise_grad_from_action_grad(const NoiseSchedule& sch,
                                   const NoisePass& pass,
                                   const Matrix& d_a0_hat) {
  Matrix d_eps(d_a0_hat.rows(), d_a0_hat.cols());
  for (Index j = 0; j < d_eps.cols(); ++j) {
    const int k = static_cast<int>(pass.k[static_cast<std::size_t>(j)]);
    d_eps.col(j) = -(sch.sqrt_one_minus_alpha_bar(k) / sch.sqrt_alpha_bar(k)) *
                   d_a0_hat.col(j);
  }
  return d_eps;
}

void backprop_noise(const DiffusionPolicy& policy, const NoisePass& pass,
                    const Matrix& d_eps, Gradient& grad) {
  policy.net().backward(pass.tape, d_eps, &grad);
}

LossResult diffusion_bc_loss(const DiffusionPolicy& policy,
                             const NoisePass& pass) {
  const double batch = static_cast<double>(pass.eps.cols());
  const Matrix diff = pass.eps_hat - pass.eps;
  LossResult out;
  out.value = diff.squaredNorm() / batch;
  out.grad = policy.params().zeros_like();
  backprop_noise(policy, pass, (2.0 / batch) * diff, out.grad);
  return out;
}

LossResult diffusion_bc_loss(const DiffusionPolicy& policy, const Matrix& s,
                             const Matrix& a0, Rng& rng) {
  return diffusion_bc_loss(policy, corrupt_and_predict(policy, s, a0, rng));
}

ActionApproximation approx_action_batch(const DiffusionPolicy& policy,
                                        const Matrix& s, const Matrix& a,
                                        Rng& rng) {
  ActionApproximation out;
  out.pass = corrupt_and_predict(policy, s, a, rng);
  out.a0_hat = approximate_actions(policy.schedule(), out.pass);
  return out;
}

}  // namespace edp

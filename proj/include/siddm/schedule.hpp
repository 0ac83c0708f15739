#pragma once

#include <functional>
#include <span>
#include <vector>

#include "siddm/autodiff.hpp"
#include "siddm/rng.hpp"
#include "siddm/tensor.hpp"

namespace siddm {

/// Few-step variance schedule. Vectors are indexed by step: beta[t] and
/// alpha[t] for t in 1..T (index 0 holds 0 and 1), alpha_bar[t] for t in 0..T.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  /// Coefficients of the forward posterior q(x_{t-1} | x_t, x_0).
  double posterior_x0_coef(int t) const;
  double posterior_xt_coef(int t) const;
  double posterior_var(int t) const;

  void check_step(int t, int lo = 1) const;
};

NoiseSchedule build_cosine_schedule(int steps, double offset = 0.008,
                                    double beta_clip = 0.999);
/// Schedule from explicit betas (beta[0] is step 1).
NoiseSchedule schedule_from_betas(std::span<const double> betas);

/// (n, cols) tensor whose row i is filled with f(t[i]).
Tensor per_row(std::span<const int> t, std::size_t cols,
               const std::function<double(int)>& f);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps; t = 0 returns x0.
Tensor q_sample_marginal(const Tensor& x0, int t, const Tensor& eps,
                         const NoiseSchedule& sched);
Tensor q_sample_marginal(const Tensor& x0, std::span<const int> t,
                         const Tensor& eps, const NoiseSchedule& sched);

/// x_t = sqrt(1 - beta_t) x_prev + sqrt(beta_t) eps.
Tensor q_sample_step(const Tensor& x_prev, int t, const Tensor& eps,
                     const NoiseSchedule& sched);
Tensor q_sample_step(const Tensor& x_prev, std::span<const int> t,
                     const Tensor& eps, const NoiseSchedule& sched);
Var q_sample_step(Var x_prev, std::span<const int> t, const Tensor& eps,
                  const NoiseSchedule& sched);

struct PosteriorParams {
  Tensor mean;
  double var = 0.0;
};

PosteriorParams posterior_params(const Tensor& x_t, const Tensor& x0, int t,
                                 const NoiseSchedule& sched);

/// Reparameterized draw from q(x_{t-1} | x_t, x0 = x0_hat); differentiable in
/// x0_hat (and x_t) through the posterior mean.
Var posterior_sample(Var x_t, Var x0_hat, std::span<const int> t,
                     const Tensor& z, const NoiseSchedule& sched);
Tensor posterior_sample(const Tensor& x_t, const Tensor& x0_hat, int t,
                        const Tensor& z, const NoiseSchedule& sched);

/// Predicts x0 from (x_t, latent z, step t).
using DenoiseFn =
    std::function<Tensor(const Tensor& x_t, const Tensor& z, int t)>;

/// x_T ~ N(0, I), then T posterior steps down to x_0. Per step the latent is
/// drawn before the posterior noise.
Tensor ancestral_sample(const DenoiseFn& denoiser, const NoiseSchedule& sched,
                        std::size_t n, std::size_t data_dim,
                        std::size_t latent_dim, Rng& rng);

Tensor normal_tensor(Shape shape, Rng& rng);

}  // namespace siddm

#pragma once

#include <span>
#include <vector>

#include "siddm/autodiff.hpp"
#include "siddm/networks.hpp"
#include "siddm/rng.hpp"
#include "siddm/schedule.hpp"

namespace siddm {

enum class AdvMode { NonSaturating, Saturating };

/// One training batch drawn as x0 ~ data, x_{t-1} ~ q(.|x0), x_t ~ q(.|x_{t-1}).
struct BatchContext {
  Tensor x0;
  std::vector<int> t;
  Tensor eps_prev;  ///< noise behind x_prev
  Tensor eps;       ///< noise of the step x_prev -> x_t
  Tensor x_prev;
  Tensor x_t;
  Tensor z;         ///< denoiser latent
  Tensor z_post;    ///< posterior-sampling noise
  Tensor eps_afd;   ///< noise for the forward step x'_{t-1} -> x'_t
};

/// Draw order: t for every row, then eps_prev, eps, z, z_post, eps_afd.
BatchContext make_batch_context(const Tensor& x0, const NoiseSchedule& sched,
                                std::size_t latent_dim, Rng& rng);

struct FakeSample {
  Var x_prev;  ///< x'_{t-1}
  Var x_t;     ///< x'_t, forward-diffused from x'_{t-1}
};

/// x'_{t-1} from the denoiser's posterior, and x'_t one forward step on.
/// With detach, both are cut from the denoiser's parameters.
FakeSample sample_fake(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                       Binding binding, const NoiseSchedule& sched, bool detach);

// Loss terms. All are batch means.

/// mean -log sigmoid(logit): real samples scored as real.
Var adv_real_term(Var logits);
/// mean -log(1 - sigmoid(logit)): fake samples scored as fake.
Var adv_fake_term(Var logits);
/// Generator's adversarial term; non-saturating -log sigmoid, or the
/// saturating log(1 - sigmoid).
Var adv_generator_term(Var logits, AdvMode mode);
/// mean (1 - beta_t) ||x'_{t-1} - x_{t-1}||^2 / beta_t, the Gaussian
/// cross-entropy of q(x_t | x'_{t-1}) with x_t integrated out. The per-sample
/// form ||x_t - sqrt(1 - beta_t) x'_{t-1}||^2 / beta_t is not equivalent
/// because x'_{t-1} depends on x_t; its minimizer is x_t / sqrt(1 - beta_t).
Var afd_cross_entropy(Var real_prev, Var fake_prev, std::span<const int> t,
                      const NoiseSchedule& sched);
/// mean ||C(x'_{t-1}) - x'_t||^2 / beta_t.
Var afd_entropy(Var cpsi_out, Var fake_t, std::span<const int> t,
                const NoiseSchedule& sched);

struct CriticLosses {
  Var d_loss;       ///< adv_real + adv_fake + lambda_reg * regularizer
  Var c_loss;
  Var adv_real;
  Var adv_fake;
  Var regularizer;  ///< mean ||denoise(x_{t-1}, t) - x0||^2, real data only
};

/// Discriminator and regression losses on one detached fake batch.
CriticLosses siddm_critic_losses(Graph& g, const BatchContext& ctx,
                                 Denoiser& denoiser, Critic& critic,
                                 const NoiseSchedule& sched, double lambda_reg);
Var siddm_d_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                 Critic& critic, const NoiseSchedule& sched, double lambda_reg);
Var siddm_c_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                 Critic& critic, const NoiseSchedule& sched);

struct GeneratorWeights {
  double lambda_afd = 1.0;
  /// false encodes an infinite AFD weight: the adversarial term is dropped
  /// and the AFD pair enters with unit weight.
  bool adversarial = true;
  AdvMode adv_mode = AdvMode::NonSaturating;
};

struct GeneratorLoss {
  Var total;
  Var adv;
  Var afd_cross_entropy;
  Var afd_entropy;
};

/// Denoiser loss with the critic frozen:
/// adv + lambda_afd * (afd_cross_entropy - afd_entropy).
GeneratorLoss siddm_g_loss(Graph& g, const BatchContext& ctx,
                           Denoiser& denoiser, Critic& critic,
                           const NoiseSchedule& sched,
                           const GeneratorWeights& weights);

struct GanLosses {
  Var loss;
  Var adv_real;  ///< unset for the generator loss
  Var adv_fake;
};

/// Joint-critic GAN on (x_{t-1}, x_t) pairs; fakes detached.
GanLosses ddgan_d_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                       Critic& critic, const NoiseSchedule& sched);
/// Joint-critic GAN generator loss with the critic frozen.
GanLosses ddgan_g_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                       Critic& critic, const NoiseSchedule& sched,
                       AdvMode mode = AdvMode::NonSaturating);

/// mean ||G(x_t, 0, t) - x0||^2, the x0-prediction denoising loss.
Var ddpm_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
              Binding binding = Binding::Trainable);

}  // namespace siddm

#pragma once

#include <span>
#include <vector>

#include "siddm/autodiff.hpp"
#include "siddm/params.hpp"
#include "siddm/rng.hpp"

namespace siddm {

/// Sinusoidal features of u = t / steps at geometric frequencies 1..1000:
/// [sin(f_0 u) .. sin(f_{k-1} u), cos(f_0 u) .. cos(f_{k-1} u)], k = dim / 2.
std::vector<double> time_embed(int t, int steps, std::size_t dim);
Tensor time_embed_rows(std::span<const int> t, int steps, std::size_t dim);

enum class Binding { Trainable, Frozen };

enum class CriticMode { Marginal, Joint };

struct DenoiserArch {
  std::size_t data_dim = 2;
  std::size_t latent_dim = 2;
  std::size_t embed_dim = 64;
  std::vector<std::size_t> hidden{256, 256, 256};
  double slope = 0.2;
  int steps = 4;
};

struct CriticArch {
  std::size_t data_dim = 2;
  std::size_t embed_dim = 64;
  std::vector<std::size_t> hidden{256, 256, 256};
  double slope = 0.2;
  int steps = 4;
  CriticMode mode = CriticMode::Marginal;
};

struct InitOptions {
  /// Zero the denoiser output layer and all three critic heads.
  bool zero_output_heads = true;
};

struct Denoiser {
  DenoiserArch arch;
  ParamSet params;
};

/// Shared trunk with three linear heads: adversarial logit, denoising
/// reconstruction (discriminator regularizer), and the conditional-mean
/// regression model.
struct Critic {
  CriticArch arch;
  ParamSet params;
};

struct CriticOutputs {
  Var adv;
  Var denoise;
  Var cpsi;
};

Denoiser make_denoiser(const DenoiserArch& arch, Rng& rng,
                       const InitOptions& options = {});
Critic make_critic(const CriticArch& arch, Rng& rng,
                   const InitOptions& options = {});

/// x0_hat from (x_t, z, t). Input layout is concat(x_t, embed(t), z).
Var denoiser_forward(Graph& g, Denoiser& net, Binding binding, Var x_t, Var z,
                     std::span<const int> t);
/// Graph-free evaluation for sampling.
Tensor denoiser_predict(const Denoiser& net, const Tensor& x_t, const Tensor& z,
                        int t);

/// Marginal critic on concat(x, embed(t)).
CriticOutputs critic_forward(Graph& g, Critic& net, Binding binding, Var x,
                             std::span<const int> t);
/// Joint critic on concat(x_prev, x_t, embed(t)).
CriticOutputs critic_forward(Graph& g, Critic& net, Binding binding, Var x_prev,
                             Var x_t, std::span<const int> t);

struct EmaParams {
  ParamSet shadow;
  double decay = 0.999;
};

EmaParams make_ema(const ParamSet& params, double decay);
/// shadow <- decay * shadow + (1 - decay) * params.
void ema_update(EmaParams& ema, const ParamSet& params);

}  // namespace siddm

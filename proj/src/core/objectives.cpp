#include "siddm/objectives.hpp"

#include <cmath>

#include "siddm/error.hpp"

namespace siddm {

BatchContext make_batch_context(const Tensor& x0, const NoiseSchedule& sched,
                                std::size_t latent_dim, Rng& rng) {
  if (x0.rank() != 2 || x0.rows() == 0) {
    fail(ErrorKind::Shape, "make_batch_context: x0 must be a non-empty batch, got " +
                               shape_string(x0.shape()));
  }
  const std::size_t n = x0.rows();
  const std::size_t d = x0.cols();
  BatchContext ctx;
  ctx.x0 = x0;
  ctx.t.resize(n);
  for (auto& s : ctx.t) s = static_cast<int>(rng.uniform_int(1, sched.steps));
  ctx.eps_prev = normal_tensor({n, d}, rng);
  ctx.eps = normal_tensor({n, d}, rng);
  ctx.z = normal_tensor({n, latent_dim}, rng);
  ctx.z_post = normal_tensor({n, d}, rng);
  ctx.eps_afd = normal_tensor({n, d}, rng);

  std::vector<int> prev(n);
  for (std::size_t i = 0; i < n; ++i) prev[i] = ctx.t[i] - 1;
  ctx.x_prev = q_sample_marginal(x0, prev, ctx.eps_prev, sched);
  ctx.x_t = q_sample_step(ctx.x_prev, ctx.t, ctx.eps, sched);
  return ctx;
}

FakeSample sample_fake(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                       Binding binding, const NoiseSchedule& sched,
                       bool detach) {
  Var x_t = g.constant(ctx.x_t);
  Var z = g.constant(ctx.z);
  Var x0_hat = denoiser_forward(g, denoiser, binding, x_t, z, ctx.t);
  Var prev = posterior_sample(x_t, x0_hat, ctx.t, ctx.z_post, sched);
  if (detach) prev = stop_gradient(prev);
  return {prev, q_sample_step(prev, ctx.t, ctx.eps_afd, sched)};
}

Var adv_real_term(Var logits) { return -mean(log_sigmoid(logits)); }

Var adv_fake_term(Var logits) { return -mean(log_sigmoid(-logits)); }

Var adv_generator_term(Var logits, AdvMode mode) {
  return mode == AdvMode::NonSaturating ? -mean(log_sigmoid(logits))
                                        : mean(log_sigmoid(-logits));
}

namespace {

Var inverse_beta_rows(Graph& g, std::span<const int> t,
                      const NoiseSchedule& sched) {
  return g.constant(per_row(t, 1, [&](int s) { return 1.0 / sched.beta[s]; }));
}

}  // namespace

Var afd_cross_entropy(Var real_prev, Var fake_prev, std::span<const int> t,
                      const NoiseSchedule& sched) {
  Graph& g = real_prev.graph();
  Var weight = g.constant(per_row(
      t, 1, [&](int s) { return (1.0 - sched.beta[s]) / sched.beta[s]; }));
  return mean(row_sq_norm(fake_prev - real_prev) * weight);
}

Var afd_entropy(Var cpsi_out, Var fake_t, std::span<const int> t,
                const NoiseSchedule& sched) {
  Graph& g = cpsi_out.graph();
  return mean(row_sq_norm(cpsi_out - fake_t) * inverse_beta_rows(g, t, sched));
}

CriticLosses siddm_critic_losses(Graph& g, const BatchContext& ctx,
                                 Denoiser& denoiser, Critic& critic,
                                 const NoiseSchedule& sched,
                                 double lambda_reg) {
  require(lambda_reg >= 0.0, "lambda_reg must be non-negative");
  FakeSample fake =
      sample_fake(g, ctx, denoiser, Binding::Trainable, sched, true);
  CriticOutputs real = critic_forward(g, critic, Binding::Trainable,
                                      g.constant(ctx.x_prev), ctx.t);
  CriticOutputs gen =
      critic_forward(g, critic, Binding::Trainable, fake.x_prev, ctx.t);

  CriticLosses out;
  out.adv_real = adv_real_term(real.adv);
  out.adv_fake = adv_fake_term(gen.adv);
  out.regularizer = mean(row_sq_norm(real.denoise - g.constant(ctx.x0)));
  out.d_loss = out.adv_real + out.adv_fake + lambda_reg * out.regularizer;
  out.c_loss = afd_entropy(gen.cpsi, fake.x_t, ctx.t, sched);
  return out;
}

Var siddm_d_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                 Critic& critic, const NoiseSchedule& sched,
                 double lambda_reg) {
  return siddm_critic_losses(g, ctx, denoiser, critic, sched, lambda_reg).d_loss;
}

Var siddm_c_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                 Critic& critic, const NoiseSchedule& sched) {
  return siddm_critic_losses(g, ctx, denoiser, critic, sched, 0.0).c_loss;
}

GeneratorLoss siddm_g_loss(Graph& g, const BatchContext& ctx,
                           Denoiser& denoiser, Critic& critic,
                           const NoiseSchedule& sched,
                           const GeneratorWeights& weights) {
  if (!(weights.lambda_afd >= 0.0)) {
    fail(ErrorKind::InvalidArgument, "lambda_afd must be non-negative");
  }
  FakeSample fake =
      sample_fake(g, ctx, denoiser, Binding::Trainable, sched, false);
  CriticOutputs gen =
      critic_forward(g, critic, Binding::Frozen, fake.x_prev, ctx.t);

  GeneratorLoss out;
  out.adv = adv_generator_term(gen.adv, weights.adv_mode);
  out.afd_cross_entropy =
      afd_cross_entropy(g.constant(ctx.x_prev), fake.x_prev, ctx.t, sched);
  out.afd_entropy = afd_entropy(gen.cpsi, fake.x_t, ctx.t, sched);
  Var afd = out.afd_cross_entropy - out.afd_entropy;
  out.total = weights.adversarial ? out.adv + weights.lambda_afd * afd : afd;
  return out;
}

GanLosses ddgan_d_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                       Critic& critic, const NoiseSchedule& sched) {
  FakeSample fake =
      sample_fake(g, ctx, denoiser, Binding::Trainable, sched, true);
  Var x_t = g.constant(ctx.x_t);
  CriticOutputs real = critic_forward(g, critic, Binding::Trainable,
                                      g.constant(ctx.x_prev), x_t, ctx.t);
  CriticOutputs gen =
      critic_forward(g, critic, Binding::Trainable, fake.x_prev, x_t, ctx.t);
  GanLosses out;
  out.adv_real = adv_real_term(real.adv);
  out.adv_fake = adv_fake_term(gen.adv);
  out.loss = out.adv_real + out.adv_fake;
  return out;
}

GanLosses ddgan_g_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
                       Critic& critic, const NoiseSchedule& sched,
                       AdvMode mode) {
  FakeSample fake =
      sample_fake(g, ctx, denoiser, Binding::Trainable, sched, false);
  CriticOutputs gen = critic_forward(g, critic, Binding::Frozen, fake.x_prev,
                                     g.constant(ctx.x_t), ctx.t);
  GanLosses out;
  out.loss = adv_generator_term(gen.adv, mode);
  return out;
}

Var ddpm_loss(Graph& g, const BatchContext& ctx, Denoiser& denoiser,
              Binding binding) {
  Tensor zeros = Tensor::matrix(ctx.x_t.rows(), denoiser.arch.latent_dim);
  Var x0_hat = denoiser_forward(g, denoiser, binding, g.constant(ctx.x_t),
                                g.constant(std::move(zeros)), ctx.t);
  return mean(row_sq_norm(x0_hat - g.constant(ctx.x0)));
}

}  // namespace siddm

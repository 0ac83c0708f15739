#include "siddm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "siddm/error.hpp"

namespace siddm {

void NoiseSchedule::check_step(int t, int lo) const {
  if (t < lo || t > steps) {
    fail(ErrorKind::InvalidArgument,
         "step " + std::to_string(t) + " outside [" + std::to_string(lo) +
             ", " + std::to_string(steps) + "]");
  }
}

double NoiseSchedule::posterior_x0_coef(int t) const {
  check_step(t);
  if (t == 1) return 1.0;
  return std::sqrt(alpha_bar[t - 1]) * beta[t] / (1.0 - alpha_bar[t]);
}

double NoiseSchedule::posterior_xt_coef(int t) const {
  check_step(t);
  if (t == 1) return 0.0;
  return std::sqrt(alpha[t]) * (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]);
}

double NoiseSchedule::posterior_var(int t) const {
  check_step(t);
  if (t == 1) return 0.0;
  return (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]) * beta[t];
}

NoiseSchedule schedule_from_betas(std::span<const double> betas) {
  require(!betas.empty(), "schedule needs at least one step");
  NoiseSchedule s;
  s.steps = static_cast<int>(betas.size());
  s.beta.assign(betas.size() + 1, 0.0);
  s.alpha.assign(betas.size() + 1, 1.0);
  s.alpha_bar.assign(betas.size() + 1, 1.0);
  for (std::size_t t = 1; t <= betas.size(); ++t) {
    const double b = betas[t - 1];
    require(b > 0.0 && b < 1.0, "beta must lie in (0, 1)");
    s.beta[t] = b;
    s.alpha[t] = 1.0 - b;
    s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - b);
  }
  return s;
}

NoiseSchedule build_cosine_schedule(int steps, double offset,
                                    double beta_clip) {
  require(steps >= 1, "cosine schedule: step count must be at least 1");
  require(offset > 0.0, "cosine schedule: offset must be positive");
  require(beta_clip > 0.0 && beta_clip < 1.0,
          "cosine schedule: beta_clip must lie in (0, 1)");
  auto f = [offset](double u) {
    const double c = std::cos((u + offset) / (1.0 + offset) * std::numbers::pi / 2);
    return c * c;
  };
  const double f0 = f(0.0);
  std::vector<double> betas(steps);
  double prev = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double abar = f(static_cast<double>(t) / steps) / f0;
    betas[t - 1] = std::min(1.0 - abar / prev, beta_clip);
    prev = abar;
  }
  return schedule_from_betas(betas);
}

Tensor per_row(std::span<const int> t, std::size_t cols,
               const std::function<double(int)>& f) {
  Tensor out = Tensor::matrix(t.size(), cols);
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double v = f(t[r]);
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = v;
  }
  return out;
}

namespace {

std::vector<int> repeat_step(int t, std::size_t n) {
  return std::vector<int>(n, t);
}

void check_rows(const Tensor& x, std::span<const int> t, const char* op) {
  if (x.rank() != 2 || x.rows() != t.size()) {
    fail(ErrorKind::Shape, std::string(op) + ": tensor " +
                               shape_string(x.shape()) + " vs " +
                               std::to_string(t.size()) + " step indices");
  }
}

}  // namespace

Tensor q_sample_marginal(const Tensor& x0, std::span<const int> t,
                         const Tensor& eps, const NoiseSchedule& sched) {
  check_same_shape(x0.shape(), eps.shape(), "q_sample_marginal");
  check_rows(x0, t, "q_sample_marginal");
  Tensor out(x0.shape());
  const std::size_t d = x0.cols();
  for (std::size_t r = 0; r < t.size(); ++r) {
    sched.check_step(t[r], 0);
    if (t[r] == 0) {
      for (std::size_t c = 0; c < d; ++c) out(r, c) = x0(r, c);
      continue;
    }
    const double a = std::sqrt(sched.alpha_bar[t[r]]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t[r]]);
    for (std::size_t c = 0; c < d; ++c) out(r, c) = a * x0(r, c) + b * eps(r, c);
  }
  return out;
}

Tensor q_sample_marginal(const Tensor& x0, int t, const Tensor& eps,
                         const NoiseSchedule& sched) {
  return q_sample_marginal(x0, repeat_step(t, x0.rows()), eps, sched);
}

Tensor q_sample_step(const Tensor& x_prev, std::span<const int> t,
                     const Tensor& eps, const NoiseSchedule& sched) {
  check_same_shape(x_prev.shape(), eps.shape(), "q_sample_step");
  check_rows(x_prev, t, "q_sample_step");
  Tensor out(x_prev.shape());
  const std::size_t d = x_prev.cols();
  for (std::size_t r = 0; r < t.size(); ++r) {
    sched.check_step(t[r]);
    const double a = std::sqrt(1.0 - sched.beta[t[r]]);
    const double b = std::sqrt(sched.beta[t[r]]);
    for (std::size_t c = 0; c < d; ++c) {
      out(r, c) = a * x_prev(r, c) + b * eps(r, c);
    }
  }
  return out;
}

Tensor q_sample_step(const Tensor& x_prev, int t, const Tensor& eps,
                     const NoiseSchedule& sched) {
  return q_sample_step(x_prev, repeat_step(t, x_prev.rows()), eps, sched);
}

Var q_sample_step(Var x_prev, std::span<const int> t, const Tensor& eps,
                  const NoiseSchedule& sched) {
  check_same_shape(x_prev.shape(), eps.shape(), "q_sample_step");
  check_rows(x_prev.value(), t, "q_sample_step");
  for (int s : t) sched.check_step(s);
  const std::size_t d = eps.cols();
  Graph& g = x_prev.graph();
  Tensor keep = per_row(t, d, [&](int s) { return std::sqrt(1.0 - sched.beta[s]); });
  Tensor noise = per_row(t, d, [&](int s) { return std::sqrt(sched.beta[s]); });
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] *= eps[i];
  return g.constant(std::move(keep)) * x_prev + g.constant(std::move(noise));
}

PosteriorParams posterior_params(const Tensor& x_t, const Tensor& x0, int t,
                                 const NoiseSchedule& sched) {
  check_same_shape(x_t.shape(), x0.shape(), "posterior_params");
  sched.check_step(t);
  const double c0 = sched.posterior_x0_coef(t);
  const double ct = sched.posterior_xt_coef(t);
  PosteriorParams out{Tensor(x0.shape()), sched.posterior_var(t)};
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out.mean[i] = c0 * x0[i] + ct * x_t[i];
  }
  return out;
}

Var posterior_sample(Var x_t, Var x0_hat, std::span<const int> t,
                     const Tensor& z, const NoiseSchedule& sched) {
  check_same_shape(x_t.shape(), x0_hat.shape(), "posterior_sample");
  check_same_shape(x_t.shape(), z.shape(), "posterior_sample");
  check_rows(z, t, "posterior_sample");
  for (int s : t) sched.check_step(s);
  Graph& g = x_t.graph();
  const std::size_t d = z.cols();
  Tensor c0 = per_row(t, d, [&](int s) { return sched.posterior_x0_coef(s); });
  Tensor ct = per_row(t, d, [&](int s) { return sched.posterior_xt_coef(s); });
  Tensor noise = per_row(t, d, [&](int s) { return std::sqrt(sched.posterior_var(s)); });
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] *= z[i];
  return g.constant(std::move(c0)) * x0_hat + g.constant(std::move(ct)) * x_t +
         g.constant(std::move(noise));
}

Tensor posterior_sample(const Tensor& x_t, const Tensor& x0_hat, int t,
                        const Tensor& z, const NoiseSchedule& sched) {
  check_same_shape(x_t.shape(), z.shape(), "posterior_sample");
  PosteriorParams p = posterior_params(x_t, x0_hat, t, sched);
  if (p.var == 0.0) return std::move(p.mean);
  const double sd = std::sqrt(p.var);
  for (std::size_t i = 0; i < p.mean.size(); ++i) p.mean[i] += sd * z[i];
  return std::move(p.mean);
}

Tensor normal_tensor(Shape shape, Rng& rng) {
  Tensor out(std::move(shape));
  for (double& v : out.data()) v = rng.normal();
  return out;
}

Tensor ancestral_sample(const DenoiseFn& denoiser, const NoiseSchedule& sched,
                        std::size_t n, std::size_t data_dim,
                        std::size_t latent_dim, Rng& rng) {
  require(n >= 1, "ancestral_sample: need at least one sample");
  Tensor x = normal_tensor({n, data_dim}, rng);
  for (int t = sched.steps; t >= 1; --t) {
    Tensor z = normal_tensor({n, latent_dim}, rng);
    Tensor noise = normal_tensor({n, data_dim}, rng);
    Tensor x0_hat = denoiser(x, z, t);
    check_same_shape(x0_hat.shape(), x.shape(), "ancestral_sample");
    x = posterior_sample(x, x0_hat, t, noise, sched);
  }
  return x;
}

}  // namespace siddm

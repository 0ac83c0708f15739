#include "siddm/networks.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "siddm/error.hpp"

namespace siddm {

std::vector<double> time_embed(int t, int steps, std::size_t dim) {
  require(steps >= 1 && t >= 1 && t <= steps,
          "time_embed: step " + std::to_string(t) + " outside [1, " +
              std::to_string(steps) + "]");
  require(dim >= 2 && dim % 2 == 0, "time_embed: dimension must be even");
  const std::size_t half = dim / 2;
  const double u = static_cast<double>(t) / steps;
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq =
        half == 1 ? 1.0
                  : std::pow(1000.0, static_cast<double>(k) / (half - 1));
    out[k] = std::sin(freq * u);
    out[half + k] = std::cos(freq * u);
  }
  return out;
}

Tensor time_embed_rows(std::span<const int> t, int steps, std::size_t dim) {
  Tensor out = Tensor::matrix(t.size(), dim);
  std::vector<double> cache;
  int cached = -1;
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (t[r] != cached) {
      cache = time_embed(t[r], steps, dim);
      cached = t[r];
    }
    for (std::size_t c = 0; c < dim; ++c) out(r, c) = cache[c];
  }
  return out;
}

namespace {

using Binder = std::function<Var(const std::string&)>;

void add_linear(ParamSet& params, const std::string& prefix, std::size_t fan_in,
                std::size_t fan_out, double slope, bool zero, Rng& rng) {
  Tensor w = Tensor::matrix(fan_in, fan_out);
  if (!zero) {
    const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * fan_in));
    for (double& v : w.data()) v = bound * (2.0 * rng.uniform() - 1.0);
  }
  params.add(prefix + ".w", std::move(w));
  params.add(prefix + ".b", Tensor::matrix(1, fan_out));
}

Var linear(const Binder& bind, const std::string& prefix, Var x) {
  return add_row(matmul(x, bind(prefix + ".w")), bind(prefix + ".b"));
}

Var mlp_trunk(const Binder& bind, const std::string& prefix,
              std::size_t depth, double slope, Var h) {
  for (std::size_t i = 0; i < depth; ++i) {
    h = leaky_relu(linear(bind, prefix + std::to_string(i), h), slope);
  }
  return h;
}

Binder binder(Graph& g, ParamSet& params, Binding binding) {
  return [&g, &params, binding](const std::string& name) {
    Tensor& t = params.at(name);
    return binding == Binding::Trainable ? g.param(t) : g.frozen(t);
  };
}

void check_batch(Var x, std::size_t cols, std::size_t rows, const char* what) {
  const Tensor& v = x.value();
  if (v.rank() != 2 || v.cols() != cols || v.rows() != rows) {
    fail(ErrorKind::Shape, std::string(what) + ": got " +
                               shape_string(v.shape()) + ", expected (" +
                               std::to_string(rows) + ", " +
                               std::to_string(cols) + ")");
  }
}

Var denoiser_graph(Graph& g, const DenoiserArch& arch, const Binder& bind,
                   Var x_t, Var z, std::span<const int> t) {
  const std::size_t n = t.size();
  check_batch(x_t, arch.data_dim, n, "denoiser input x_t");
  check_batch(z, arch.latent_dim, n, "denoiser latent z");
  Var embed = g.constant(time_embed_rows(t, arch.steps, arch.embed_dim));
  std::vector<Var> parts{x_t, embed};
  if (arch.latent_dim > 0) parts.push_back(z);
  Var h = mlp_trunk(bind, "l", arch.hidden.size(), arch.slope, concat_cols(parts));
  return linear(bind, "out", h);
}

CriticOutputs critic_heads(const Binder& bind, const CriticArch& arch, Var in) {
  Var h = mlp_trunk(bind, "trunk.l", arch.hidden.size(), arch.slope, in);
  return {linear(bind, "adv", h), linear(bind, "denoise", h),
          linear(bind, "cpsi", h)};
}

}  // namespace

Denoiser make_denoiser(const DenoiserArch& arch, Rng& rng,
                       const InitOptions& options) {
  require(arch.data_dim >= 1, "denoiser: data dimension must be positive");
  require(!arch.hidden.empty(), "denoiser: need at least one hidden layer");
  Denoiser net{arch, {}};
  std::size_t fan_in = arch.data_dim + arch.embed_dim + arch.latent_dim;
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
    add_linear(net.params, "l" + std::to_string(i), fan_in, arch.hidden[i],
               arch.slope, false, rng);
    fan_in = arch.hidden[i];
  }
  add_linear(net.params, "out", fan_in, arch.data_dim, arch.slope,
             options.zero_output_heads, rng);
  return net;
}

Critic make_critic(const CriticArch& arch, Rng& rng,
                   const InitOptions& options) {
  require(arch.data_dim >= 1, "critic: data dimension must be positive");
  require(!arch.hidden.empty(), "critic: need at least one hidden layer");
  Critic net{arch, {}};
  const std::size_t inputs =
      arch.mode == CriticMode::Joint ? 2 * arch.data_dim : arch.data_dim;
  std::size_t fan_in = inputs + arch.embed_dim;
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
    add_linear(net.params, "trunk.l" + std::to_string(i), fan_in,
               arch.hidden[i], arch.slope, false, rng);
    fan_in = arch.hidden[i];
  }
  const bool zero = options.zero_output_heads;
  add_linear(net.params, "adv", fan_in, 1, arch.slope, zero, rng);
  add_linear(net.params, "denoise", fan_in, arch.data_dim, arch.slope, zero, rng);
  add_linear(net.params, "cpsi", fan_in, arch.data_dim, arch.slope, zero, rng);
  return net;
}

Var denoiser_forward(Graph& g, Denoiser& net, Binding binding, Var x_t, Var z,
                     std::span<const int> t) {
  return denoiser_graph(g, net.arch, binder(g, net.params, binding), x_t, z, t);
}

Tensor denoiser_predict(const Denoiser& net, const Tensor& x_t, const Tensor& z,
                        int t) {
  Graph g;
  std::vector<int> steps(x_t.rank() == 2 ? x_t.rows() : 0, t);
  Binder bind = [&](const std::string& name) {
    return g.constant(net.params.at(name));
  };
  Var out = denoiser_graph(g, net.arch, bind, g.constant(x_t), g.constant(z), steps);
  return out.value();
}

CriticOutputs critic_forward(Graph& g, Critic& net, Binding binding, Var x,
                             std::span<const int> t) {
  if (net.arch.mode != CriticMode::Marginal) {
    fail(ErrorKind::InvalidArgument, "critic_forward: joint critic needs a pair");
  }
  check_batch(x, net.arch.data_dim, t.size(), "critic input");
  Var embed = g.constant(time_embed_rows(t, net.arch.steps, net.arch.embed_dim));
  return critic_heads(binder(g, net.params, binding), net.arch,
                      concat_cols({x, embed}));
}

CriticOutputs critic_forward(Graph& g, Critic& net, Binding binding, Var x_prev,
                             Var x_t, std::span<const int> t) {
  if (net.arch.mode != CriticMode::Joint) {
    fail(ErrorKind::InvalidArgument,
         "critic_forward: marginal critic takes a single input");
  }
  check_same_shape(x_prev.shape(), x_t.shape(), "joint critic pair");
  check_batch(x_prev, net.arch.data_dim, t.size(), "critic input");
  Var embed = g.constant(time_embed_rows(t, net.arch.steps, net.arch.embed_dim));
  return critic_heads(binder(g, net.params, binding), net.arch,
                      concat_cols({x_prev, x_t, embed}));
}

EmaParams make_ema(const ParamSet& params, double decay) {
  require(decay >= 0.0 && decay < 1.0, "ema decay must lie in [0, 1)");
  EmaParams ema;
  ema.decay = decay;
  for (const auto& e : params) {
    ema.shadow.add(e.name, Tensor(e.tensor.shape(), e.tensor.values()));
  }
  return ema;
}

void ema_update(EmaParams& ema, const ParamSet& params) {
  require(ema.decay >= 0.0 && ema.decay < 1.0, "ema decay must lie in [0, 1)");
  ema.shadow.check_compatible(params, "ema_update");
  auto src = params.begin();
  for (auto& e : ema.shadow) {
    auto dst = e.tensor.data();
    const auto from = src->tensor.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = ema.decay * dst[i] + (1.0 - ema.decay) * from[i];
    }
    ++src;
  }
}

}  // namespace siddm

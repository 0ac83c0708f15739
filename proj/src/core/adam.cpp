#include "siddm/adam.hpp"

#include <cmath>

#include "siddm/error.hpp"

namespace siddm {

void adam_step(ParamSet& params, AdamState& state, double lr) {
  require(lr > 0.0, "adam_step: learning rate must be positive");
  if (state.m.empty() && state.step == 0) {
    for (const auto& e : params) {
      state.m.emplace_back(e.tensor.size(), 0.0);
      state.v.emplace_back(e.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorKind::Shape, "adam_step: optimizer state tracks " +
                               std::to_string(state.m.size()) +
                               " tensors, parameters have " +
                               std::to_string(params.size()));
  }

  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  std::size_t k = 0;
  for (auto& e : params) {
    Tensor& p = e.tensor;
    auto& m = state.m[k];
    auto& v = state.v[k];
    ++k;
    if (m.size() != p.size() || v.size() != p.size()) {
      fail(ErrorKind::Shape, "adam_step: moment buffers for '" + e.name +
                                 "' do not match shape " +
                                 shape_string(p.shape()));
    }
    if (!p.has_grad()) continue;
    const auto& g = p.grad();
    auto data = p.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace siddm

#pragma once

#include <cstdint>
#include <vector>

#include "siddm/params.hpp"

namespace siddm {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of every tensor in `params` from its grad
/// buffer. Moment buffers are created on the first call.
void adam_step(ParamSet& params, AdamState& state, double lr);

}  // namespace siddm

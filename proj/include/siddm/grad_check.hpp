#pragma once

#include <functional>
#include <span>

#include "siddm/autodiff.hpp"

namespace siddm {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  bool pass = true;
};

/// Builds a scalar loss on a fresh graph. It must bind the tensors under test
/// with Graph::param so they receive gradients.
using LossBuilder = std::function<Var(Graph&)>;

/// Compares backward() against central differences for every element of
/// every tensor in `points`, extrapolated from steps h and h/2. Per element
/// the error is relative to max(|analytic|, |numeric|), or absolute when that
/// magnitude is below 1e-8.
GradCheckReport grad_check(const LossBuilder& f, std::span<Tensor* const> points,
                           double h, double tol);

}  // namespace siddm

#pragma once

#include <string>

#include "siddm/metrics.hpp"
#include "siddm/tensor.hpp"

namespace siddm {

struct ScatterStyle {
  double size_px = 480.0;
  double point_radius = 1.2;
  double point_opacity = 0.35;
  /// Half-width of the plotted square in data units; 0 fits the grid.
  double extent = 0.0;
};

/// Standalone SVG: sample points over the mixture centers (open circles of
/// radius 3 sigma), square axes.
std::string scatter_svg(const Tensor& samples, const MogSpec& spec,
                        const std::string& title, const ScatterStyle& style = {});

}  // namespace siddm

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "siddm/rng.hpp"
#include "siddm/tensor.hpp"

namespace siddm {

/// k x k grid of isotropic Gaussians with equal weights, centred on
/// {-(k-1)/2 .. (k-1)/2} * spacing in each coordinate.
struct MogSpec {
  int grid_k = 5;
  double spacing = 2.0;
  double sigma = 0.1;

  std::vector<std::array<double, 2>> centers() const;
  void validate() const;
};

/// n x 2 samples: a uniform mode index, then a Gaussian around its center.
Tensor mog_sample(const MogSpec& spec, std::size_t n, Rng& rng);

struct Coverage {
  int modes_covered = 0;
  double hq_fraction = 0.0;
};

/// Nearest-center assignment. A mode counts as covered when at least
/// ceil(min_count_frac * n) of its samples fall within `radius` of it;
/// radius <= 0 means 3 sigma.
Coverage mode_coverage(const Tensor& samples, const MogSpec& spec,
                       double radius = 0.0, double min_count_frac = 0.001);

struct FrechetResult {
  double value = 0.0;
  bool det_clipped = false;
};

/// Frechet distance between Gaussians fitted to two 2-D sample sets.
FrechetResult frechet_gaussian_2d(const Tensor& real, const Tensor& gen);

/// Sliced Wasserstein-2 over K fixed directions theta_k = pi k / K. The larger
/// set is truncated to the size of the smaller one.
double sliced_w2(const Tensor& real, const Tensor& gen, int directions = 128);

struct MetricsReport {
  int modes_covered = 0;
  double hq_fraction = 0.0;
  double frechet = 0.0;
  double sliced_w2 = 0.0;
  std::size_t n_samples = 0;
  bool det_clipped = false;
};

MetricsReport evaluate_samples(const Tensor& real, const Tensor& gen,
                               const MogSpec& spec);

std::string metrics_to_json(const MetricsReport& report);

/// CSV with header "x,y", one point per row, 17 significant digits.
void write_samples_csv(const std::string& path, const Tensor& samples);
Tensor read_samples_csv(const std::string& path);

}  // namespace siddm

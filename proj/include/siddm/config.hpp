#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "siddm/adam.hpp"
#include "siddm/metrics.hpp"
#include "siddm/objectives.hpp"

namespace siddm {

enum class Objective { Siddm, Ddgan, Ddpm, VanillaGan };

const char* to_string(Objective objective);
Objective objective_from_string(const std::string& name);

struct RunConfig {
  Objective objective = Objective::Siddm;
  int steps = 4;
  double lambda_afd = 1.0;
  /// false encodes lambda_afd = infinity: no adversarial term for the denoiser.
  bool adversarial = true;
  double lambda_reg = 1.0;
  AdvMode adv_mode = AdvMode::NonSaturating;
  std::size_t latent_dim = 2;
  std::size_t embed_dim = 64;
  std::vector<std::size_t> hidden{256, 256, 256};
  std::size_t batch_size = 512;
  std::int64_t iters = 50000;
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  double ema_decay = 0.999;
  std::int64_t eval_every = 1000;
  std::size_t eval_samples = 10000;
  /// Also evaluate the raw (non-EMA) denoiser at every eval point.
  bool eval_raw = false;
  std::uint64_t seed = 0;
  MogSpec mog;
  std::string output_dir;

  void validate() const;
  AdamConfig adam() const { return {adam_beta1, adam_beta2, 1e-8}; }
};

/// JSON object with every field. output_dir is omitted when
/// `include_output_dir` is false so run location never leaks into
/// checkpoints.
std::string config_to_json(const RunConfig& config, bool include_output_dir = true,
                           int indent = -1);
/// Starts from defaults; unknown keys are rejected.
RunConfig config_from_json(const std::string& text);
/// Sets one field from its textual value ("inf" for lambda_afd disables the
/// adversarial term). Unknown keys are rejected.
void set_config_field(RunConfig& config, const std::string& key,
                      const std::string& value);

}  // namespace siddm

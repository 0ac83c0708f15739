#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "siddm/adam.hpp"
#include "siddm/config.hpp"
#include "siddm/metrics.hpp"
#include "siddm/networks.hpp"
#include "siddm/rng.hpp"
#include "siddm/schedule.hpp"

namespace siddm {

struct LossComponents {
  double adv_real = 0.0;
  double adv_fake = 0.0;
  double regularizer = 0.0;
  double adv_gen = 0.0;
  double afd_cross_entropy = 0.0;
  double afd_entropy = 0.0;
};

struct LossBundle {
  double d_loss = 0.0;
  double c_loss = 0.0;
  double g_loss = 0.0;
  LossComponents components;
};

struct LogRecord {
  std::int64_t iteration = 0;
  LossBundle losses;
  MetricsReport ema;
  std::optional<MetricsReport> raw;
  double wall_clock_s = 0.0;
};

/// Append-only evaluation log.
class RunLog {
 public:
  void append(LogRecord record);
  const std::vector<LogRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  /// Deterministic CSV; wall-clock times are excluded.
  std::string to_csv() const;
  std::string timings_csv() const;
  static const char* csv_header();

 private:
  std::vector<LogRecord> records_;
};

struct Checkpoint {
  static constexpr int kVersion = 1;

  int version = kVersion;
  RunConfig config;
  std::int64_t step = 0;
  Rng::State rng;
  ParamSet denoiser;
  ParamSet critic;
  ParamSet ema;
  AdamState denoiser_opt;
  AdamState critic_opt;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
/// Distinct error kinds: Version, Shape (tensor disagrees with the
/// architecture the config implies), Format (anything else malformed).
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

struct TrainHooks {
  /// Called after every iteration with the step just completed.
  std::function<void(std::int64_t, const LossBundle&)> on_step;
  /// Called after each evaluation record is appended.
  std::function<void(const LogRecord&)> on_eval;
};

DenoiserArch denoiser_arch(const RunConfig& config);
CriticArch critic_arch(const RunConfig& config);

/// Alternating trainer. Owns networks, optimizers, EMA and the training RNG.
class Trainer {
 public:
  explicit Trainer(const RunConfig& config);
  explicit Trainer(const Checkpoint& checkpoint);

  /// Runs iterations until step() == target, evaluating at every multiple of
  /// eval_every.
  void run_until(std::int64_t target, RunLog& log, const TrainHooks& hooks = {});
  LossBundle train_step();

  std::int64_t step() const { return step_; }
  const RunConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return sched_; }
  Checkpoint checkpoint() const;

  Denoiser& denoiser() { return denoiser_; }
  Critic& critic() { return critic_; }
  const EmaParams& ema() const { return ema_; }
  Denoiser ema_denoiser() const;

  /// Metrics at the current step from the fixed evaluation stream.
  MetricsReport evaluate(bool use_ema) const;

 private:
  RunConfig config_;
  NoiseSchedule sched_;
  Denoiser denoiser_;
  Critic critic_;
  EmaParams ema_;
  AdamState denoiser_opt_;
  AdamState critic_opt_;
  Rng rng_;
  std::int64_t step_ = 0;
  Tensor eval_reference_;
};

Tensor sample_denoiser(const Denoiser& net, const NoiseSchedule& sched,
                       std::size_t n, Rng& rng);

struct TrainResult {
  Checkpoint checkpoint;
  RunLog log;
  /// EMA metrics at the final step.
  MetricsReport final_metrics;
};

/// Fresh run to config.iters. Writes checkpoint.json, runlog.csv and
/// timings.csv under config.output_dir when it is non-empty.
TrainResult train(const RunConfig& config, const TrainHooks& hooks = {});
/// Continues a checkpoint to `iters` total iterations.
TrainResult resume(const Checkpoint& checkpoint, std::int64_t iters,
                   const TrainHooks& hooks = {});

enum class SweepAxis { LambdaAfd, Steps };

SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepRow {
  std::string value;
  MetricsReport metrics;
};

/// One train() per value with the base seed. Lambda values accept "inf".
/// Each run writes into <output_dir>/<axis>_<value> when output_dir is set.
std::vector<SweepRow> ablation_sweep(const RunConfig& base, SweepAxis axis,
                                     const std::vector<std::string>& values);
std::string sweep_to_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace siddm

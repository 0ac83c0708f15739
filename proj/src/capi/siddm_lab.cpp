#include "siddm_lab/siddm_lab.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "siddm/config.hpp"
#include "siddm/divergence.hpp"
#include "siddm/error.hpp"
#include "siddm/io.hpp"
#include "siddm/metrics.hpp"
#include "siddm/plot.hpp"
#include "siddm/trainer.hpp"

struct siddm_config {
  siddm::RunConfig value;
};

struct siddm_checkpoint {
  siddm::Checkpoint value;
};

namespace {

thread_local std::string g_last_error;

siddm_status status_of(siddm::ErrorKind kind) {
  using siddm::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidArgument: return SIDDM_ERR_INVALID_ARGUMENT;
    case ErrorKind::Shape: return SIDDM_ERR_SHAPE;
    case ErrorKind::NonFinite: return SIDDM_ERR_NONFINITE;
    case ErrorKind::Io: return SIDDM_ERR_IO;
    case ErrorKind::Version: return SIDDM_ERR_VERSION;
    case ErrorKind::Format: return SIDDM_ERR_FORMAT;
    case ErrorKind::Support: return SIDDM_ERR_SUPPORT;
    case ErrorKind::Training: return SIDDM_ERR_TRAINING;
  }
  return SIDDM_ERR_INTERNAL;
}

template <typename F>
siddm_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SIDDM_OK;
  } catch (const siddm::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SIDDM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SIDDM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SIDDM_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) {
    siddm::fail(siddm::ErrorKind::InvalidArgument, std::string(what) + " is NULL");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

siddm::MogSpec mog_of(const siddm_config* config) {
  return config ? config->value.mog : siddm::MogSpec{};
}

siddm::Tensor tensor_of(const double* xy, std::size_t n) {
  return siddm::Tensor({n, 2}, std::vector<double>(xy, xy + 2 * n));
}

void copy_out(const siddm::Tensor& t, double* out) {
  const auto data = t.data();
  std::copy(data.begin(), data.end(), out);
}

siddm_metrics to_c(const siddm::MetricsReport& m) {
  return {m.modes_covered, m.hq_fraction, m.frechet, m.sliced_w2, m.n_samples,
          m.det_clipped ? 1 : 0};
}

siddm::MetricsReport from_c(const siddm_metrics& m) {
  siddm::MetricsReport r;
  r.modes_covered = m.modes_covered;
  r.hq_fraction = m.hq_fraction;
  r.frechet = m.frechet;
  r.sliced_w2 = m.sliced_w2;
  r.n_samples = m.n_samples;
  r.det_clipped = m.det_clipped != 0;
  return r;
}

std::size_t env_threads() {
  const char* v = std::getenv("SIDDM_LAB_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) {
    siddm::fail(siddm::ErrorKind::InvalidArgument,
                std::string("SIDDM_LAB_THREADS must be a positive integer, got '") +
                    v + "'");
  }
  return static_cast<std::size_t>(n);
}

void publish(const siddm::TrainResult& result, siddm_checkpoint** checkpoint_out,
             siddm_metrics* final_metrics) {
  if (final_metrics) *final_metrics = to_c(result.final_metrics);
  if (checkpoint_out) *checkpoint_out = new siddm_checkpoint{result.checkpoint};
}

siddm::TrainHooks hooks_for(siddm_progress_fn progress, void* user) {
  siddm::TrainHooks hooks;
  if (progress) {
    hooks.on_eval = [progress, user](const siddm::LogRecord& rec) {
      const siddm_metrics m = to_c(rec.ema);
      progress(rec.iteration, &m, user);
    };
  }
  return hooks;
}

}  // namespace

extern "C" {

const char* siddm_last_error(void) { return g_last_error.c_str(); }

const char* siddm_status_name(siddm_status status) {
  switch (status) {
    case SIDDM_OK: return "ok";
    case SIDDM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SIDDM_ERR_SHAPE: return "shape";
    case SIDDM_ERR_NONFINITE: return "non_finite";
    case SIDDM_ERR_IO: return "io";
    case SIDDM_ERR_VERSION: return "version";
    case SIDDM_ERR_FORMAT: return "format";
    case SIDDM_ERR_SUPPORT: return "support";
    case SIDDM_ERR_TRAINING: return "training";
    case SIDDM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* siddm_version(void) { return "0.1.0"; }

void siddm_string_free(char* s) { std::free(s); }

siddm_status siddm_config_new(siddm_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new siddm_config{};
  });
}

siddm_status siddm_config_from_json(const char* json, siddm_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new siddm_config{siddm::config_from_json(json)};
  });
}

siddm_status siddm_config_load(const char* path, siddm_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new siddm_config{siddm::config_from_json(siddm::read_file(path))};
  });
}

siddm_status siddm_config_set(siddm_config* config, const char* key,
                              const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    siddm::set_config_field(config->value, key, value);
  });
}

siddm_status siddm_config_validate(const siddm_config* config) {
  return guarded([&] {
    need(config, "config");
    config->value.validate();
  });
}

siddm_status siddm_config_to_json(const siddm_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = dup_string(siddm::config_to_json(config->value, true, 2));
  });
}

void siddm_config_free(siddm_config* config) { delete config; }

siddm_status siddm_train(const siddm_config* config, siddm_checkpoint** checkpoint_out,
                         siddm_metrics* final_metrics) {
  return siddm_train_ex(config, nullptr, nullptr, checkpoint_out, final_metrics);
}

siddm_status siddm_train_ex(const siddm_config* config, siddm_progress_fn progress,
                            void* user, siddm_checkpoint** checkpoint_out,
                            siddm_metrics* final_metrics) {
  return guarded([&] {
    need(config, "config");
    publish(siddm::train(config->value, hooks_for(progress, user)), checkpoint_out,
            final_metrics);
  });
}

siddm_status siddm_resume(const siddm_checkpoint* checkpoint, int64_t iters,
                          const char* output_dir, siddm_checkpoint** checkpoint_out,
                          siddm_metrics* final_metrics) {
  return siddm_resume_ex(checkpoint, iters, output_dir, nullptr, nullptr,
                         checkpoint_out, final_metrics);
}

siddm_status siddm_resume_ex(const siddm_checkpoint* checkpoint, int64_t iters,
                             const char* output_dir, siddm_progress_fn progress,
                             void* user, siddm_checkpoint** checkpoint_out,
                             siddm_metrics* final_metrics) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    siddm::Checkpoint start = checkpoint->value;
    start.config.output_dir = output_dir ? output_dir : "";
    publish(siddm::resume(start, iters, hooks_for(progress, user)), checkpoint_out,
            final_metrics);
  });
}

siddm_status siddm_checkpoint_load(const char* path, siddm_checkpoint** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new siddm_checkpoint{siddm::load_checkpoint(path)};
  });
}

siddm_status siddm_checkpoint_save(const siddm_checkpoint* checkpoint,
                                   const char* path) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(path, "path");
    siddm::save_checkpoint(path, checkpoint->value);
  });
}

siddm_status siddm_checkpoint_step(const siddm_checkpoint* checkpoint, int64_t* step) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(step, "step");
    *step = checkpoint->value.step;
  });
}

siddm_status siddm_checkpoint_steps(const siddm_checkpoint* checkpoint, int* steps) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(steps, "steps");
    *steps = checkpoint->value.config.steps;
  });
}

siddm_status siddm_checkpoint_config(const siddm_checkpoint* checkpoint,
                                     siddm_config** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    *out = new siddm_config{checkpoint->value.config};
  });
}

void siddm_checkpoint_free(siddm_checkpoint* checkpoint) { delete checkpoint; }

siddm_status siddm_sample(const siddm_checkpoint* checkpoint, size_t n, uint64_t seed,
                          int use_ema, double* out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    siddm::require(n >= 1, "sample count must be at least 1");
    const auto& c = checkpoint->value;
    siddm::Denoiser net{siddm::denoiser_arch(c.config),
                        use_ema ? c.ema : c.denoiser};
    siddm::Rng rng(seed);
    const auto sched = siddm::build_cosine_schedule(c.config.steps);
    copy_out(siddm::sample_denoiser(net, sched, n, rng), out);
  });
}

siddm_status siddm_mog_sample(const siddm_config* config, size_t n, uint64_t seed,
                              double* out) {
  return guarded([&] {
    need(out, "out");
    siddm::require(n >= 1, "sample count must be at least 1");
    siddm::Rng rng(seed);
    copy_out(siddm::mog_sample(mog_of(config), n, rng), out);
  });
}

siddm_status siddm_evaluate(const siddm_config* config, const double* real,
                            size_t n_real, const double* gen, size_t n_gen,
                            siddm_metrics* out) {
  return guarded([&] {
    need(real, "real");
    need(gen, "gen");
    need(out, "out");
    *out = to_c(siddm::evaluate_samples(tensor_of(real, n_real),
                                        tensor_of(gen, n_gen), mog_of(config)));
  });
}

siddm_status siddm_metrics_to_json(const siddm_metrics* metrics, char** out) {
  return guarded([&] {
    need(metrics, "metrics");
    need(out, "out");
    *out = dup_string(siddm::metrics_to_json(from_c(*metrics)));
  });
}

siddm_status siddm_samples_write_csv(const char* path, const double* xy, size_t n) {
  return guarded([&] {
    need(path, "path");
    need(xy, "xy");
    siddm::write_samples_csv(path, tensor_of(xy, n));
  });
}

siddm_status siddm_samples_read_csv(const char* path, double** xy_out, size_t* n_out) {
  return guarded([&] {
    need(path, "path");
    need(xy_out, "xy_out");
    need(n_out, "n_out");
    const siddm::Tensor t = siddm::read_samples_csv(path);
    double* buf = static_cast<double*>(std::malloc(std::max<std::size_t>(1, t.size()) *
                                                   sizeof(double)));
    if (buf == nullptr) throw std::bad_alloc();
    copy_out(t, buf);
    *xy_out = buf;
    *n_out = t.rows();
  });
}

void siddm_buffer_free(double* buffer) { std::free(buffer); }

siddm_status siddm_plot_svg(const siddm_config* config, const double* xy, size_t n,
                            const char* title, char** svg_out) {
  return guarded([&] {
    need(xy, "xy");
    need(svg_out, "svg_out");
    *svg_out = dup_string(
        siddm::scatter_svg(tensor_of(xy, n), mog_of(config), title ? title : ""));
  });
}

siddm_status siddm_verify_theorem(size_t trials, size_t max_support, uint64_t seed,
                                  size_t threads, siddm_verifier_summary* summary,
                                  char** json_out) {
  return guarded([&] {
    const std::size_t workers = threads == 0 ? env_threads() : threads;
    const siddm::VerifierRun run =
        siddm::run_theorem_trials(trials, max_support, seed, workers);
    if (summary) {
      const auto& s = run.summary;
      *summary = {s.trials,
                  s.violations,
                  s.triangle_violations,
                  s.pinsker_violations,
                  s.sandwich_violations,
                  s.conditional_step_violations,
                  s.not_applicable,
                  s.min_slack};
    }
    if (json_out) *json_out = dup_string(siddm::verifier_to_json(run));
  });
}

siddm_status siddm_sweep(const siddm_config* base, const char* axis,
                         const char* const* values, size_t n_values, char** csv_out) {
  return guarded([&] {
    need(base, "base");
    need(axis, "axis");
    need(csv_out, "csv_out");
    siddm::require(values != nullptr || n_values == 0, "values is NULL");
    std::vector<std::string> list;
    for (size_t i = 0; i < n_values; ++i) {
      need(values[i], "value");
      list.emplace_back(values[i]);
    }
    const siddm::SweepAxis a = siddm::sweep_axis_from_string(axis);
    *csv_out = dup_string(siddm::sweep_to_csv(a, siddm::ablation_sweep(base->value, a, list)));
  });
}

}  // extern "C"

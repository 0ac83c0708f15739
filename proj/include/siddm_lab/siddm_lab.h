#ifndef SIDDM_LAB_H
#define SIDDM_LAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SIDDM_API __declspec(dllexport)
#else
#define SIDDM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum siddm_status {
  SIDDM_OK = 0,
  SIDDM_ERR_INVALID_ARGUMENT = 1,
  SIDDM_ERR_SHAPE = 2,
  SIDDM_ERR_NONFINITE = 3,
  SIDDM_ERR_IO = 4,
  SIDDM_ERR_VERSION = 5,
  SIDDM_ERR_FORMAT = 6,
  SIDDM_ERR_SUPPORT = 7,
  SIDDM_ERR_TRAINING = 8,
  SIDDM_ERR_INTERNAL = 9
} siddm_status;

/* Message for the most recent failure on the calling thread. Never NULL. */
SIDDM_API const char* siddm_last_error(void);
SIDDM_API const char* siddm_status_name(siddm_status status);
SIDDM_API const char* siddm_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
SIDDM_API void siddm_string_free(char* s);

typedef struct siddm_metrics {
  int modes_covered;
  double hq_fraction;
  double frechet;
  double sliced_w2;
  size_t n_samples;
  int det_clipped;
} siddm_metrics;

typedef struct siddm_verifier_summary {
  size_t trials;
  size_t violations;
  size_t triangle_violations;
  size_t pinsker_violations;
  size_t sandwich_violations;
  size_t conditional_step_violations;
  size_t not_applicable;
  double min_slack;
} siddm_verifier_summary;

/* ---- run configuration ---- */

typedef struct siddm_config siddm_config;

SIDDM_API siddm_status siddm_config_new(siddm_config** out);
SIDDM_API siddm_status siddm_config_from_json(const char* json, siddm_config** out);
SIDDM_API siddm_status siddm_config_load(const char* path, siddm_config** out);
/* Keys are field names ("lambda_afd", "mog.sigma", ...); hyphens are
   accepted. lambda_afd = "inf" disables the adversarial term. */
SIDDM_API siddm_status siddm_config_set(siddm_config* config, const char* key,
                                        const char* value);
SIDDM_API siddm_status siddm_config_validate(const siddm_config* config);
SIDDM_API siddm_status siddm_config_to_json(const siddm_config* config, char** out);
SIDDM_API void siddm_config_free(siddm_config* config);

/* ---- training and checkpoints ---- */

typedef struct siddm_checkpoint siddm_checkpoint;

/* Trains from scratch. Writes checkpoint.json, runlog.csv and timings.csv
   under the config's output_dir when set. Either out-parameter may be NULL. */
SIDDM_API siddm_status siddm_train(const siddm_config* config,
                                   siddm_checkpoint** checkpoint_out,
                                   siddm_metrics* final_metrics);
/* Called after every periodic evaluation with the EMA metrics. */
typedef void (*siddm_progress_fn)(int64_t iteration, const siddm_metrics* ema,
                                  void* user);

SIDDM_API siddm_status siddm_train_ex(const siddm_config* config,
                                      siddm_progress_fn progress, void* user,
                                      siddm_checkpoint** checkpoint_out,
                                      siddm_metrics* final_metrics);
/* Continues to `iters` total iterations; output_dir may be NULL. */
SIDDM_API siddm_status siddm_resume(const siddm_checkpoint* checkpoint, int64_t iters,
                                    const char* output_dir,
                                    siddm_checkpoint** checkpoint_out,
                                    siddm_metrics* final_metrics);
SIDDM_API siddm_status siddm_resume_ex(const siddm_checkpoint* checkpoint,
                                       int64_t iters, const char* output_dir,
                                       siddm_progress_fn progress, void* user,
                                       siddm_checkpoint** checkpoint_out,
                                       siddm_metrics* final_metrics);
SIDDM_API siddm_status siddm_checkpoint_load(const char* path, siddm_checkpoint** out);
SIDDM_API siddm_status siddm_checkpoint_save(const siddm_checkpoint* checkpoint,
                                             const char* path);
SIDDM_API siddm_status siddm_checkpoint_step(const siddm_checkpoint* checkpoint,
                                             int64_t* step);
/* Number of denoising steps T the checkpoint was trained with. */
SIDDM_API siddm_status siddm_checkpoint_steps(const siddm_checkpoint* checkpoint,
                                              int* steps);
SIDDM_API siddm_status siddm_checkpoint_config(const siddm_checkpoint* checkpoint,
                                               siddm_config** out);
SIDDM_API void siddm_checkpoint_free(siddm_checkpoint* checkpoint);

/* n x 2 row-major samples from the checkpoint's denoiser by ancestral
   sampling. use_ema selects the EMA parameters. */
SIDDM_API siddm_status siddm_sample(const siddm_checkpoint* checkpoint, size_t n,
                                    uint64_t seed, int use_ema, double* out);

/* ---- data and metrics ---- */

/* n x 2 row-major draws from the config's mixture (defaults when NULL). */
SIDDM_API siddm_status siddm_mog_sample(const siddm_config* config, size_t n,
                                        uint64_t seed, double* out);
SIDDM_API siddm_status siddm_evaluate(const siddm_config* config, const double* real,
                                      size_t n_real, const double* gen, size_t n_gen,
                                      siddm_metrics* out);
SIDDM_API siddm_status siddm_metrics_to_json(const siddm_metrics* metrics, char** out);
SIDDM_API siddm_status siddm_samples_write_csv(const char* path, const double* xy,
                                               size_t n);
/* Reads "x,y" CSV. *xy_out must be released with siddm_buffer_free. */
SIDDM_API siddm_status siddm_samples_read_csv(const char* path, double** xy_out,
                                              size_t* n_out);
SIDDM_API void siddm_buffer_free(double* buffer);
SIDDM_API siddm_status siddm_plot_svg(const siddm_config* config, const double* xy,
                                      size_t n, const char* title, char** svg_out);

/* ---- divergence lab ---- */

/* threads = 0 reads SIDDM_LAB_THREADS (default 1). json_out may be NULL. */
SIDDM_API siddm_status siddm_verify_theorem(size_t trials, size_t max_support,
                                            uint64_t seed, size_t threads,
                                            siddm_verifier_summary* summary,
                                            char** json_out);

/* ---- ablation ---- */

/* axis is "lambda_afd" or "steps"; returns the CSV table. */
SIDDM_API siddm_status siddm_sweep(const siddm_config* base, const char* axis,
                                   const char* const* values, size_t n_values,
                                   char** csv_out);

#ifdef __cplusplus
}
#endif

#endif

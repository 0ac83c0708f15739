#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "siddm_lab/siddm_lab.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Failure carrying the exit code it maps to.
struct CliFailure {
  int code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) {
  throw CliFailure{kExitUsage, message};
}

/// Invalid arguments are the caller's fault; everything else is a runtime error.
void check(siddm_status status, bool usage_on_invalid = false) {
  if (status == SIDDM_OK) return;
  const int code = usage_on_invalid && status == SIDDM_ERR_INVALID_ARGUMENT
                       ? kExitUsage
                       : kExitRuntime;
  throw CliFailure{code, std::string(siddm_status_name(status)) + ": " +
                             siddm_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Owned {
  T* p = nullptr;
  Owned() = default;
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
  ~Owned() { Free(p); }
};

using Config = Owned<siddm_config, siddm_config_free>;
using Checkpoint = Owned<siddm_checkpoint, siddm_checkpoint_free>;

struct CString {
  char* p = nullptr;
  CString() = default;
  CString(const CString&) = delete;
  CString& operator=(const CString&) = delete;
  ~CString() { siddm_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Buffer {
  double* p = nullptr;
  std::size_t n = 0;
  ~Buffer() { siddm_buffer_free(p); }
};

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string metrics_line(const siddm_metrics& m) {
  return "modes_covered=" + std::to_string(m.modes_covered) +
         " hq_fraction=" + short_num(m.hq_fraction) +
         " frechet=" + short_num(m.frechet) + " sliced_w2=" + short_num(m.sliced_w2);
}

void write_text(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw CliFailure{kExitRuntime, "io: cannot write " + tmp.string()};
  }
  fs::rename(tmp, target, ec);
  if (ec) throw CliFailure{kExitRuntime, "io: cannot write " + path + ": " + ec.message()};
}

void emit(const std::optional<std::string>& path, const std::string& text) {
  if (path) {
    write_text(*path, text);
  } else {
    std::cout << text;
    std::cout.flush();
  }
}

/// Run-configuration flags shared by train and sweep.
struct ConfigFlags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> objective;
  std::optional<int> steps;
  std::optional<std::string> lambda_afd;
  std::optional<double> lambda_reg;
  std::optional<int> latent_dim;
  std::optional<std::int64_t> iters;
  std::optional<int> batch;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration");
    app->add_option("--seed", seed, "Root seed for every stochastic path");
    app->add_option("--out-dir", out_dir, "Directory for run artifacts");
    app->add_option("--objective", objective, "siddm, ddgan, ddpm or vanilla_gan");
    app->add_option("--steps", steps, "Number of denoising steps T");
    app->add_option("--lambda-afd", lambda_afd,
                    "Weight of the forward-diffusion term; 'inf' drops the "
                    "adversarial term");
    app->add_option("--lambda-reg", lambda_reg, "Weight of the critic regularizer");
    app->add_option("--latent-dim", latent_dim, "Latent dimension of the denoiser");
    app->add_option("--iters", iters, "Training iterations");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--set", overrides,
                    "Any other config field as KEY=VALUE (repeatable)");
  }

  void set(siddm_config* c, const std::string& key, const std::string& value) const {
    check(siddm_config_set(c, key.c_str(), value.c_str()), true);
  }

  /// Defaults, then the config file, then individual flags.
  void build(Config& cfg) const {
    if (config_path) {
      check(siddm_config_load(config_path->c_str(), &cfg.p), true);
    } else {
      check(siddm_config_new(&cfg.p));
    }
    if (objective) {
      set(cfg.p, "objective", *objective);
      // The degenerate GAN is only defined for a single step.
      if (!steps && (*objective == "vanilla_gan" || *objective == "vanilla-gan")) {
        set(cfg.p, "steps", "1");
      }
    }
    if (seed) set(cfg.p, "seed", std::to_string(*seed));
    if (out_dir) set(cfg.p, "output_dir", *out_dir);
    if (steps) set(cfg.p, "steps", std::to_string(*steps));
    if (lambda_afd) set(cfg.p, "lambda_afd", *lambda_afd);
    if (lambda_reg) set(cfg.p, "lambda_reg", short_or_full(*lambda_reg));
    if (latent_dim) set(cfg.p, "latent_dim", std::to_string(*latent_dim));
    if (iters) set(cfg.p, "iters", std::to_string(*iters));
    if (batch) set(cfg.p, "batch_size", std::to_string(*batch));
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        usage_error("--set expects KEY=VALUE, got '" + kv + "'");
      }
      set(cfg.p, kv.substr(0, eq), kv.substr(eq + 1));
    }
    check(siddm_config_validate(cfg.p), true);
  }

  static std::string short_or_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
};

void report_progress(int64_t iteration, const siddm_metrics* m, void*) {
  std::cerr << "[" << iteration << "] " << metrics_line(*m) << "\n";
}

int cmd_train(const ConfigFlags& flags, const std::optional<std::string>& resume_from) {
  Checkpoint result;
  siddm_metrics final_metrics{};
  if (resume_from) {
    Checkpoint start;
    check(siddm_checkpoint_load(resume_from->c_str(), &start.p));
    if (flags.config_path || flags.objective || flags.steps || flags.lambda_afd ||
        flags.lambda_reg || flags.latent_dim || flags.batch || flags.seed ||
        !flags.overrides.empty()) {
      usage_error("train --checkpoint continues a run; only --iters and --out-dir "
                  "may be given");
    }
    if (!flags.out_dir) usage_error("train --checkpoint requires --out-dir");
    if (!flags.iters) {
      usage_error("train --checkpoint requires --iters (the total iteration count)");
    }
    const int64_t target = *flags.iters;
    check(siddm_resume_ex(start.p, target, flags.out_dir->c_str(), report_progress,
                          nullptr, &result.p, &final_metrics),
          true);
  } else {
    if (!flags.out_dir) usage_error("train requires --out-dir");
    Config cfg;
    flags.build(cfg);
    check(siddm_train_ex(cfg.p, report_progress, nullptr, &result.p, &final_metrics),
          true);
  }
  int64_t step = 0;
  check(siddm_checkpoint_step(result.p, &step));
  std::cout << "step=" << step << " " << metrics_line(final_metrics) << "\n";
  std::cout << "wrote " << *flags.out_dir << "/checkpoint.json, runlog.csv, timings.csv\n";
  return 0;
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) usage_error("empty entry in --values");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) usage_error("--values must list at least one value");
  return out;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& axis,
              const std::string& values_text) {
  if (axis != "lambda_afd" && axis != "lambda-afd" && axis != "steps") {
    usage_error("--axis must be lambda_afd or steps");
  }
  const std::vector<std::string> values = split_csv_list(values_text);
  Config cfg;
  flags.build(cfg);
  std::vector<const char*> ptrs;
  for (const auto& v : values) ptrs.push_back(v.c_str());
  CString csv;
  check(siddm_sweep(cfg.p, axis.c_str(), ptrs.data(), ptrs.size(), &csv.p), true);
  if (flags.out_dir) write_text(*flags.out_dir + "/sweep.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

/// Mixture spec from a JSON file holding either a full config or a bare
/// {"grid_k", "spacing", "sigma"} object.
void load_spec(Config& cfg, const std::optional<std::string>& spec_path,
               const std::optional<std::string>& config_path) {
  if (spec_path && config_path) usage_error("give either --spec or --config, not both");
  if (config_path) {
    check(siddm_config_load(config_path->c_str(), &cfg.p), true);
    return;
  }
  check(siddm_config_new(&cfg.p));
  if (!spec_path) return;
  std::ifstream in(*spec_path);
  if (!in) throw CliFailure{kExitRuntime, "io: cannot open " + *spec_path};
  std::stringstream text;
  text << in.rdbuf();
  const std::string wrapped = "{\"mog\": " + text.str() + "}";
  Config parsed;
  check(siddm_config_from_json(wrapped.c_str(), &parsed.p));
  std::swap(cfg.p, parsed.p);
}

int cmd_sample(const std::optional<std::string>& checkpoint_path, std::size_t n,
               const std::optional<int>& steps, std::uint64_t seed, bool raw,
               bool target, const std::optional<std::string>& spec_path,
               const std::optional<std::string>& out) {
  if (n < 1) usage_error("--n must be at least 1");
  std::vector<double> xy(2 * n);
  if (target) {
    if (checkpoint_path || steps || raw) {
      usage_error("--mog draws from the target mixture; it excludes --checkpoint, "
                  "--steps and --raw");
    }
    Config cfg;
    load_spec(cfg, spec_path, std::nullopt);
    check(siddm_mog_sample(cfg.p, n, seed, xy.data()), true);
  } else {
    if (!checkpoint_path) usage_error("sample requires --checkpoint (or --mog)");
    if (spec_path) usage_error("--spec only applies with --mog");
    Checkpoint ckpt;
    check(siddm_checkpoint_load(checkpoint_path->c_str(), &ckpt.p));
    if (steps) {
      int trained = 0;
      check(siddm_checkpoint_steps(ckpt.p, &trained));
      if (trained != *steps) {
        usage_error("--steps " + std::to_string(*steps) +
                    " does not match the checkpoint, which was trained with T=" +
                    std::to_string(trained));
      }
    }
    check(siddm_sample(ckpt.p, n, seed, raw ? 0 : 1, xy.data()));
  }
  if (out) {
    check(siddm_samples_write_csv(out->c_str(), xy.data(), n));
  } else {
    std::string text = "x,y\n";
    char line[96];
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(line, sizeof line, "%.17g,%.17g\n", xy[2 * i], xy[2 * i + 1]);
      text += line;
    }
    std::cout << text;
  }
  return 0;
}

int cmd_eval(const std::string& samples_path, const std::optional<std::string>& spec_path,
             const std::optional<std::string>& config_path,
             const std::optional<std::size_t>& n_ref, std::uint64_t seed,
             const std::optional<std::string>& out) {
  Config cfg;
  load_spec(cfg, spec_path, config_path);
  Buffer gen;
  check(siddm_samples_read_csv(samples_path.c_str(), &gen.p, &gen.n));
  const std::size_t n = n_ref.value_or(gen.n);
  if (n < 2) usage_error("the reference set needs at least 2 samples");
  std::vector<double> real(2 * n);
  check(siddm_mog_sample(cfg.p, n, seed, real.data()), true);
  siddm_metrics m{};
  check(siddm_evaluate(cfg.p, real.data(), n, gen.p, gen.n, &m));
  CString json;
  check(siddm_metrics_to_json(&m, &json.p));
  emit(out, json.str());
  if (out) std::cout << metrics_line(m) << "\n";
  return 0;
}

int cmd_verify(std::size_t trials, std::size_t max_support, std::uint64_t seed,
               bool summary_only, const std::optional<std::string>& out) {
  if (max_support < 1) usage_error("--max-support must be at least 1");
  siddm_verifier_summary s{};
  CString json;
  check(siddm_verify_theorem(trials, max_support, seed, 0, &s,
                             summary_only && !out ? nullptr : &json.p));
  std::ostringstream line;
  line << "trials=" << s.trials << " violations=" << s.violations
       << " triangle_violations=" << s.triangle_violations
       << " pinsker_violations=" << s.pinsker_violations
       << " sandwich_violations=" << s.sandwich_violations
       << " conditional_step_violations=" << s.conditional_step_violations
       << " not_applicable=" << s.not_applicable
       << " min_slack=" << short_num(s.min_slack) << "\n";
  if (out) {
    write_text(*out, json.str());
    std::cout << line.str();
  } else if (summary_only) {
    std::cout << line.str();
  } else {
    std::cout << json.str();
  }
  return 0;
}

int cmd_plot(const std::string& samples_path, const std::string& out,
             const std::optional<std::string>& title,
             const std::optional<std::string>& spec_path,
             const std::optional<std::string>& config_path) {
  Config cfg;
  load_spec(cfg, spec_path, config_path);
  Buffer xy;
  check(siddm_samples_read_csv(samples_path.c_str(), &xy.p, &xy.n));
  const std::string caption =
      title.value_or(std::filesystem::path(samples_path).filename().string());
  CString svg;
  check(siddm_plot_svg(cfg.p, xy.p, xy.n, caption.c_str(), &svg.p));
  write_text(out, svg.str());
  std::cout << "wrote " << out << " (" << xy.n << " points)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-implicit denoising diffusion lab on a 2-D Gaussian mixture",
               "siddm-lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(siddm_version()));

  ConfigFlags train_flags;
  std::optional<std::string> train_checkpoint;
  auto* train = app.add_subcommand("train", "Train a denoiser and write its artifacts");
  train_flags.attach(train);
  train->add_option("--checkpoint", train_checkpoint,
                    "Continue from this checkpoint to --iters total iterations");

  std::optional<std::string> sample_checkpoint, sample_spec, sample_out;
  std::size_t sample_n = 10000;
  std::optional<int> sample_steps;
  std::uint64_t sample_seed = 0;
  bool sample_raw = false, sample_target = false;
  auto* sample = app.add_subcommand("sample", "Draw samples as x,y CSV");
  sample->add_option("--checkpoint", sample_checkpoint, "Trained checkpoint");
  sample->add_option("--n", sample_n, "Number of samples")->capture_default_str();
  sample->add_option("--steps", sample_steps,
                     "Expected number of denoising steps (must match the checkpoint)");
  sample->add_option("--seed", sample_seed, "Sampling seed")->capture_default_str();
  sample->add_flag("--raw", sample_raw, "Use raw parameters instead of the EMA");
  sample->add_flag("--mog", sample_target, "Draw from the target mixture instead");
  sample->add_option("--spec", sample_spec, "Mixture spec JSON (with --mog)");
  sample->add_option("--out", sample_out, "Output CSV (default: stdout)");

  std::string eval_samples;
  std::optional<std::string> eval_spec, eval_config, eval_out;
  std::optional<std::size_t> eval_n;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Score samples against the target mixture");
  eval->add_option("--samples", eval_samples, "Samples CSV")->required();
  eval->add_option("--spec", eval_spec, "Mixture spec JSON");
  eval->add_option("--config", eval_config, "Run config JSON (its mixture is used)");
  eval->add_option("--n", eval_n, "Reference sample count (default: sample count)");
  eval->add_option("--seed", eval_seed, "Reference sampling seed")->capture_default_str();
  eval->add_option("--out", eval_out, "Metrics JSON path (default: stdout)");

  ConfigFlags sweep_flags;
  std::string sweep_axis, sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Train once per value and tabulate metrics");
  sweep_flags.attach(sweep);
  sweep->add_option("--axis", sweep_axis, "lambda_afd or steps")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values, e.g. 0,1,inf")
      ->required();

  std::size_t verify_trials = 1000, verify_support = 8;
  std::uint64_t verify_seed = 0;
  bool verify_summary = false;
  std::optional<std::string> verify_out;
  auto* verify = app.add_subcommand(
      "verify-theorem", "Check the joint-JSD bound on random discrete pairs");
  verify->add_option("--trials", verify_trials, "Number of random pairs")
      ->capture_default_str();
  verify->add_option("--max-support", verify_support, "Largest support per coordinate")
      ->capture_default_str();
  verify->add_option("--seed", verify_seed, "Root seed")->capture_default_str();
  verify->add_flag("--summary", verify_summary, "Print only the summary line");
  verify->add_option("--out", verify_out, "Report JSON path (default: stdout)");

  std::string plot_samples, plot_out;
  std::optional<std::string> plot_title, plot_spec, plot_config;
  auto* plot = app.add_subcommand("plot", "Render samples over the mixture centers as SVG");
  plot->add_option("--samples", plot_samples, "Samples CSV")->required();
  plot->add_option("--out", plot_out, "SVG path")->required();
  plot->add_option("--title", plot_title, "Panel title");
  plot->add_option("--spec", plot_spec, "Mixture spec JSON");
  plot->add_option("--config", plot_config, "Run config JSON (its mixture is used)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_flags, train_checkpoint);
    if (*sample) {
      return cmd_sample(sample_checkpoint, sample_n, sample_steps, sample_seed,
                        sample_raw, sample_target, sample_spec, sample_out);
    }
    if (*eval) return cmd_eval(eval_samples, eval_spec, eval_config, eval_n, eval_seed, eval_out);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_axis, sweep_values);
    if (*verify) {
      return cmd_verify(verify_trials, verify_support, verify_seed, verify_summary,
                        verify_out);
    }
    if (*plot) return cmd_plot(plot_samples, plot_out, plot_title, plot_spec, plot_config);
  } catch (const CliFailure& f) {
    std::cerr << "siddm-lab: " << f.message << "\n";
    if (f.code == kExitUsage) std::cerr << "Run with --help for usage.\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "siddm-lab: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

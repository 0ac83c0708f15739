#include "siddm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "siddm/error.hpp"
#include "siddm/io.hpp"
#include "siddm/objectives.hpp"

namespace siddm {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kReferenceStream = 3;
constexpr std::uint64_t kEvalStreamBase = 1000;

std::string metrics_cells(const MetricsReport& m) {
  return std::to_string(m.modes_covered) + "," + format_double(m.hq_fraction) +
         "," + format_double(m.frechet) + "," + format_double(m.sliced_w2);
}

}  // namespace

// ---------------------------------------------------------------- RunLog

void RunLog::append(LogRecord record) {
  if (!records_.empty() && record.iteration <= records_.back().iteration) {
    fail(ErrorKind::InvalidArgument, "run log: iterations must increase");
  }
  records_.push_back(std::move(record));
}

const char* RunLog::csv_header() {
  return "iteration,d_loss,c_loss,g_loss,adv_real,adv_fake,regularizer,"
         "adv_gen,afd_cross_entropy,afd_entropy,modes_covered,hq_fraction,"
         "frechet,sliced_w2,raw_modes_covered,raw_hq_fraction,raw_frechet,"
         "raw_sliced_w2";
}

std::string RunLog::to_csv() const {
  std::string out = csv_header();
  out += '\n';
  for (const auto& r : records_) {
    const auto& l = r.losses;
    const auto& c = l.components;
    out += std::to_string(r.iteration);
    for (double v : {l.d_loss, l.c_loss, l.g_loss, c.adv_real, c.adv_fake,
                     c.regularizer, c.adv_gen, c.afd_cross_entropy,
                     c.afd_entropy}) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    out += metrics_cells(r.ema);
    out += ',';
    out += r.raw ? metrics_cells(*r.raw) : std::string(",,,");
    out += '\n';
  }
  return out;
}

std::string RunLog::timings_csv() const {
  std::string out = "iteration,wall_clock_s\n";
  for (const auto& r : records_) {
    out += std::to_string(r.iteration) + "," + format_short(r.wall_clock_s) + "\n";
  }
  return out;
}

// ------------------------------------------------------------ Checkpoint

namespace {

using nlohmann::json;

void append_values(std::string& out, std::span<const double> values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    // -0.0 would not survive the JSON round trip.
    out += values[i] == 0.0 ? std::string("0") : format_double(values[i]);
  }
  out += ']';
}

void append_params(std::string& out, const std::vector<const ParamSet*>& sets,
                   const std::vector<std::string>& prefixes) {
  out += '{';
  bool first = true;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (const auto& e : *sets[s]) {
      out += first ? "\n    " : ",\n    ";
      first = false;
      out += json(prefixes[s] + e.name).dump();
      out += ": {\"shape\": [";
      const auto& shape = e.tensor.shape();
      for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
      }
      out += "], \"data\": ";
      append_values(out, e.tensor.data());
      out += '}';
    }
  }
  out += "\n  }";
}

void append_adam(std::string& out, const AdamState& state) {
  out += "{\"step\": " + std::to_string(state.step) + ", \"m\": [";
  for (std::size_t i = 0; i < state.m.size(); ++i) {
    if (i) out += ", ";
    append_values(out, state.m[i]);
  }
  out += "], \"v\": [";
  for (std::size_t i = 0; i < state.v.size(); ++i) {
    if (i) out += ", ";
    append_values(out, state.v[i]);
  }
  out += "]}";
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    fail(ErrorKind::Format, std::string("checkpoint: missing field '") + key + "'");
  }
  return j.at(key);
}

template <typename T>
T get_as(const json& j, const char* what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("checkpoint: bad ") + what + ": " + e.what());
  }
}

/// Copies tensors named <prefix><name> into `target`, checking shapes.
void read_params(const json& j, const std::string& prefix, ParamSet& target) {
  for (auto& e : target) {
    const std::string key = prefix + e.name;
    if (!j.contains(key)) {
      fail(ErrorKind::Format, "checkpoint: missing tensor '" + key + "'");
    }
    const json& entry = j.at(key);
    const auto shape = get_as<Shape>(field(entry, "shape"), "shape");
    if (shape != e.tensor.shape()) {
      fail(ErrorKind::Shape, "checkpoint: tensor '" + key + "' has shape " +
                                 shape_string(shape) + ", architecture expects " +
                                 shape_string(e.tensor.shape()));
    }
    auto data = get_as<std::vector<double>>(field(entry, "data"), "tensor data");
    if (data.size() != e.tensor.size()) {
      fail(ErrorKind::Shape, "checkpoint: tensor '" + key + "' holds " +
                                 std::to_string(data.size()) + " values for shape " +
                                 shape_string(shape));
    }
    e.tensor.values() = std::move(data);
  }
  std::size_t expected = 0;
  for (const auto& item : j.items()) {
    if (item.key().rfind(prefix, 0) == 0) ++expected;
  }
  if (expected != target.size()) {
    fail(ErrorKind::Shape, "checkpoint: " + std::to_string(expected) +
                               " tensors under '" + prefix + "', architecture has " +
                               std::to_string(target.size()));
  }
}

AdamState read_adam(const json& j, const ParamSet& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  state.step = get_as<std::int64_t>(field(j, "step"), "optimizer step");
  state.m = get_as<std::vector<std::vector<double>>>(field(j, "m"), "moments");
  state.v = get_as<std::vector<std::vector<double>>>(field(j, "v"), "moments");
  if (state.m.empty() && state.v.empty()) return state;
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorKind::Shape, "checkpoint: optimizer state tracks the wrong tensors");
  }
  std::size_t k = 0;
  for (const auto& e : params) {
    if (state.m[k].size() != e.tensor.size() ||
        state.v[k].size() != e.tensor.size()) {
      fail(ErrorKind::Shape,
           "checkpoint: optimizer moments for '" + e.name + "' have wrong size");
    }
    ++k;
  }
  return state;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  std::string out = "{\n  \"version\": " + std::to_string(c.version) + ",\n";
  out += "  \"config\": " + config_to_json(c.config, false) + ",\n";
  out += "  \"step\": " + std::to_string(c.step) + ",\n";
  out += "  \"rng_state\": {\"s\": [";
  for (std::size_t i = 0; i < c.rng.s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(c.rng.s[i]);
  }
  out += "], \"has_spare\": ";
  out += c.rng.has_spare ? "true" : "false";
  out += ", \"spare\": ";
  out += c.rng.spare == 0.0 ? std::string("0") : format_double(c.rng.spare);
  out += "},\n  \"params\": ";
  append_params(out, {&c.denoiser, &c.critic}, {"g.", "d."});
  out += ",\n  \"ema_params\": ";
  append_params(out, {&c.ema}, {"g."});
  out += ",\n  \"optimizer\": {\n    \"g\": ";
  append_adam(out, c.denoiser_opt);
  out += ",\n    \"d\": ";
  append_adam(out, c.critic_opt);
  out += "\n  }\n}\n";
  return out;
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint c;
  c.version = get_as<int>(field(j, "version"), "version");
  if (c.version != Checkpoint::kVersion) {
    fail(ErrorKind::Version, "checkpoint version " + std::to_string(c.version) +
                                 " is not supported (expected " +
                                 std::to_string(Checkpoint::kVersion) + ")");
  }
  c.config = config_from_json(field(j, "config").dump());
  c.config.validate();
  c.step = get_as<std::int64_t>(field(j, "step"), "step");
  const json& rng = field(j, "rng_state");
  const auto words = get_as<std::vector<std::uint64_t>>(field(rng, "s"), "rng words");
  if (words.size() != 4) fail(ErrorKind::Format, "checkpoint: rng state needs 4 words");
  std::copy(words.begin(), words.end(), c.rng.s.begin());
  c.rng.has_spare = get_as<bool>(field(rng, "has_spare"), "rng spare flag");
  c.rng.spare = get_as<double>(field(rng, "spare"), "rng spare");

  Rng scratch(0);
  Denoiser g = make_denoiser(denoiser_arch(c.config), scratch);
  Critic d = make_critic(critic_arch(c.config), scratch);
  c.denoiser = std::move(g.params);
  c.critic = std::move(d.params);
  c.ema = c.denoiser;
  read_params(field(j, "params"), "g.", c.denoiser);
  read_params(field(j, "params"), "d.", c.critic);
  read_params(field(j, "ema_params"), "g.", c.ema);
  const json& opt = field(j, "optimizer");
  c.denoiser_opt = read_adam(field(opt, "g"), c.denoiser, c.config.adam());
  c.critic_opt = read_adam(field(opt, "d"), c.critic, c.config.adam());
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, checkpoint_to_json(checkpoint));
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_file(path));
}

// --------------------------------------------------------------- Trainer

DenoiserArch denoiser_arch(const RunConfig& config) {
  DenoiserArch arch;
  arch.data_dim = 2;
  // ddpm predicts from x_t alone; untrained latent weights would only add noise.
  arch.latent_dim = config.objective == Objective::Ddpm ? 0 : config.latent_dim;
  arch.embed_dim = config.embed_dim;
  arch.hidden = config.hidden;
  arch.steps = config.steps;
  return arch;
}

CriticArch critic_arch(const RunConfig& config) {
  CriticArch arch;
  arch.data_dim = 2;
  arch.embed_dim = config.embed_dim;
  arch.hidden = config.hidden;
  arch.steps = config.steps;
  arch.mode = config.objective == Objective::Ddgan ? CriticMode::Joint
                                                   : CriticMode::Marginal;
  return arch;
}

Tensor sample_denoiser(const Denoiser& net, const NoiseSchedule& sched,
                       std::size_t n, Rng& rng) {
  DenoiseFn fn = [&net](const Tensor& x_t, const Tensor& z, int t) {
    return denoiser_predict(net, x_t, z, t);
  };
  return ancestral_sample(fn, sched, n, net.arch.data_dim, net.arch.latent_dim,
                          rng);
}

Trainer::Trainer(const RunConfig& config) : config_(config) {
  config_.validate();
  sched_ = build_cosine_schedule(config_.steps);
  const Rng root(config_.seed);
  Rng init = root.fork(kInitStream);
  denoiser_ = make_denoiser(denoiser_arch(config_), init);
  critic_ = make_critic(critic_arch(config_), init);
  ema_ = make_ema(denoiser_.params, config_.ema_decay);
  denoiser_opt_.config = config_.adam();
  critic_opt_.config = config_.adam();
  rng_ = root.fork(kTrainStream);
  Rng ref = root.fork(kReferenceStream);
  eval_reference_ = mog_sample(config_.mog, config_.eval_samples, ref);
}

Trainer::Trainer(const Checkpoint& checkpoint) : Trainer(checkpoint.config) {
  denoiser_.params.check_compatible(checkpoint.denoiser, "checkpoint denoiser");
  critic_.params.check_compatible(checkpoint.critic, "checkpoint critic");
  ema_.shadow.check_compatible(checkpoint.ema, "checkpoint ema");
  denoiser_.params = checkpoint.denoiser;
  critic_.params = checkpoint.critic;
  ema_.shadow = checkpoint.ema;
  denoiser_opt_ = checkpoint.denoiser_opt;
  critic_opt_ = checkpoint.critic_opt;
  denoiser_opt_.config = config_.adam();
  critic_opt_.config = config_.adam();
  rng_ = Rng(checkpoint.rng);
  step_ = checkpoint.step;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.step = step_;
  c.rng = rng_.state();
  c.denoiser = denoiser_.params;
  c.critic = critic_.params;
  c.ema = ema_.shadow;
  c.denoiser_opt = denoiser_opt_;
  c.critic_opt = critic_opt_;
  return c;
}

Denoiser Trainer::ema_denoiser() const { return Denoiser{denoiser_.arch, ema_.shadow}; }

MetricsReport Trainer::evaluate(bool use_ema) const {
  Rng rng = Rng(config_.seed).fork(kEvalStreamBase + static_cast<std::uint64_t>(step_));
  const Tensor samples =
      use_ema ? sample_denoiser(ema_denoiser(), sched_, config_.eval_samples, rng)
              : sample_denoiser(denoiser_, sched_, config_.eval_samples, rng);
  return evaluate_samples(eval_reference_, samples, config_.mog);
}

LossBundle Trainer::train_step() {
  const Tensor x0 = mog_sample(config_.mog, config_.batch_size, rng_);
  const BatchContext ctx =
      make_batch_context(x0, sched_, config_.latent_dim, rng_);
  LossBundle out;
  auto& comp = out.components;

  switch (config_.objective) {
    case Objective::Siddm:
    case Objective::VanillaGan: {
      const bool vanilla = config_.objective == Objective::VanillaGan;
      const double lambda_afd = vanilla ? 0.0 : config_.lambda_afd;
      const double lambda_reg = vanilla ? 0.0 : config_.lambda_reg;
      const bool adversarial = vanilla || config_.adversarial;
      const bool afd_active = !adversarial || lambda_afd > 0.0;
      {
        Graph g;
        CriticLosses c =
            siddm_critic_losses(g, ctx, denoiser_, critic_, sched_, lambda_reg);
        out.d_loss = c.d_loss.value().item();
        out.c_loss = c.c_loss.value().item();
        comp.adv_real = c.adv_real.value().item();
        comp.adv_fake = c.adv_fake.value().item();
        comp.regularizer = c.regularizer.value().item();
        Var objective = adversarial && afd_active ? c.d_loss + c.c_loss
                        : adversarial             ? c.d_loss
                                                  : c.c_loss;
        g.backward(objective);
        adam_step(critic_.params, critic_opt_, config_.lr_d);
      }
      {
        Graph g;
        GeneratorWeights w{lambda_afd, adversarial, config_.adv_mode};
        GeneratorLoss l = siddm_g_loss(g, ctx, denoiser_, critic_, sched_, w);
        out.g_loss = l.total.value().item();
        comp.adv_gen = l.adv.value().item();
        comp.afd_cross_entropy = l.afd_cross_entropy.value().item();
        comp.afd_entropy = l.afd_entropy.value().item();
        g.backward(l.total);
        adam_step(denoiser_.params, denoiser_opt_, config_.lr_g);
      }
      break;
    }
    case Objective::Ddgan: {
      {
        Graph g;
        GanLosses d = ddgan_d_loss(g, ctx, denoiser_, critic_, sched_);
        out.d_loss = d.loss.value().item();
        comp.adv_real = d.adv_real.value().item();
        comp.adv_fake = d.adv_fake.value().item();
        g.backward(d.loss);
        adam_step(critic_.params, critic_opt_, config_.lr_d);
      }
      {
        Graph g;
        GanLosses l =
            ddgan_g_loss(g, ctx, denoiser_, critic_, sched_, config_.adv_mode);
        out.g_loss = l.loss.value().item();
        comp.adv_gen = out.g_loss;
        g.backward(l.loss);
        adam_step(denoiser_.params, denoiser_opt_, config_.lr_g);
      }
      break;
    }
    case Objective::Ddpm: {
      Graph g;
      Var loss = ddpm_loss(g, ctx, denoiser_);
      out.g_loss = loss.value().item();
      g.backward(loss);
      adam_step(denoiser_.params, denoiser_opt_, config_.lr_g);
      break;
    }
  }
  ema_update(ema_, denoiser_.params);
  ++step_;
  return out;
}

void Trainer::run_until(std::int64_t target, RunLog& log,
                        const TrainHooks& hooks) {
  const auto start = std::chrono::steady_clock::now();
  while (step_ < target) {
    LossBundle losses;
    try {
      losses = train_step();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      fail(ErrorKind::Training, "iteration " + std::to_string(step_ + 1) +
                                    ": " + e.what());
    }
    if (hooks.on_step) hooks.on_step(step_, losses);
    if (step_ % config_.eval_every == 0) {
      LogRecord rec;
      rec.iteration = step_;
      rec.losses = losses;
      rec.ema = evaluate(true);
      if (config_.eval_raw) rec.raw = evaluate(false);
      rec.wall_clock_s = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
      log.append(std::move(rec));
      if (hooks.on_eval) hooks.on_eval(log.records().back());
    }
  }
}

namespace {

TrainResult finish(Trainer& trainer, RunLog log) {
  TrainResult result{trainer.checkpoint(), std::move(log), trainer.evaluate(true)};
  const std::string& dir = trainer.config().output_dir;
  if (!dir.empty()) {
    namespace fs = std::filesystem;
    save_checkpoint((fs::path(dir) / "checkpoint.json").string(),
                    result.checkpoint);
    write_file_atomic((fs::path(dir) / "runlog.csv").string(), result.log.to_csv());
    write_file_atomic((fs::path(dir) / "timings.csv").string(),
                      result.log.timings_csv());
  }
  return result;
}

}  // namespace

TrainResult train(const RunConfig& config, const TrainHooks& hooks) {
  Trainer trainer(config);
  RunLog log;
  trainer.run_until(config.iters, log, hooks);
  return finish(trainer, std::move(log));
}

TrainResult resume(const Checkpoint& checkpoint, std::int64_t iters,
                   const TrainHooks& hooks) {
  require(iters >= checkpoint.step,
          "resume: target iteration precedes the checkpoint step");
  Checkpoint start = checkpoint;
  start.config.iters = iters;
  Trainer trainer(start);
  RunLog log;
  trainer.run_until(iters, log, hooks);
  return finish(trainer, std::move(log));
}

// ----------------------------------------------------------------- Sweep

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "lambda_afd" || name == "lambda-afd") return SweepAxis::LambdaAfd;
  if (name == "steps") return SweepAxis::Steps;
  fail(ErrorKind::InvalidArgument, "unknown sweep axis '" + name + "'");
}

std::vector<SweepRow> ablation_sweep(const RunConfig& base, SweepAxis axis,
                                     const std::vector<std::string>& values) {
  require(!values.empty(), "sweep: no values given");
  const char* axis_name = axis == SweepAxis::LambdaAfd ? "lambda_afd" : "steps";
  std::vector<SweepRow> rows;
  for (const auto& value : values) {
    RunConfig config = base;
    set_config_field(config, axis_name, value);
    if (!base.output_dir.empty()) {
      config.output_dir = (std::filesystem::path(base.output_dir) /
                           (std::string(axis_name) + "_" + value))
                              .string();
    }
    TrainResult result = train(config);
    rows.push_back({value, result.final_metrics});
  }
  return rows;
}

std::string sweep_to_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::string out = axis == SweepAxis::LambdaAfd ? "lambda_afd" : "steps";
  out += ",modes_covered,hq_fraction,frechet,sliced_w2\n";
  for (const auto& r : rows) {
    out += r.value + "," + metrics_cells(r.metrics) + "\n";
  }
  return out;
}

}  // namespace siddm

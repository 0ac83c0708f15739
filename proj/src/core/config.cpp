#include "siddm/config.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "siddm/error.hpp"

namespace siddm {

using nlohmann::json;

const char* to_string(Objective objective) {
  switch (objective) {
    case Objective::Siddm: return "siddm";
    case Objective::Ddgan: return "ddgan";
    case Objective::Ddpm: return "ddpm";
    case Objective::VanillaGan: return "vanilla_gan";
  }
  return "?";
}

Objective objective_from_string(const std::string& name) {
  if (name == "siddm") return Objective::Siddm;
  if (name == "ddgan") return Objective::Ddgan;
  if (name == "ddpm") return Objective::Ddpm;
  if (name == "vanilla_gan" || name == "vanilla-gan") return Objective::VanillaGan;
  fail(ErrorKind::InvalidArgument, "unknown objective '" + name + "'");
}

namespace {

const char* adv_mode_name(AdvMode mode) {
  return mode == AdvMode::NonSaturating ? "nonsaturating" : "saturating";
}

AdvMode adv_mode_from_string(const std::string& name) {
  if (name == "nonsaturating") return AdvMode::NonSaturating;
  if (name == "saturating") return AdvMode::Saturating;
  fail(ErrorKind::InvalidArgument, "unknown adv_mode '" + name + "'");
}

json to_json_object(const RunConfig& c, bool include_output_dir) {
  json j;
  j["objective"] = to_string(c.objective);
  j["steps"] = c.steps;
  j["lambda_afd"] = c.lambda_afd;
  j["adversarial"] = c.adversarial;
  j["lambda_reg"] = c.lambda_reg;
  j["adv_mode"] = adv_mode_name(c.adv_mode);
  j["latent_dim"] = c.latent_dim;
  j["embed_dim"] = c.embed_dim;
  j["hidden"] = c.hidden;
  j["batch_size"] = c.batch_size;
  j["iters"] = c.iters;
  j["lr_g"] = c.lr_g;
  j["lr_d"] = c.lr_d;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["ema_decay"] = c.ema_decay;
  j["eval_every"] = c.eval_every;
  j["eval_samples"] = c.eval_samples;
  j["eval_raw"] = c.eval_raw;
  j["seed"] = c.seed;
  j["mog"] = {{"grid_k", c.mog.grid_k},
              {"spacing", c.mog.spacing},
              {"sigma", c.mog.sigma}};
  if (include_output_dir) j["output_dir"] = c.output_dir;
  return j;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("config field '") + key + "': " + e.what());
  }
}

RunConfig from_json_object(const json& j) {
  if (!j.is_object()) fail(ErrorKind::Format, "config must be a JSON object");
  static const std::vector<std::string> known = {
      "objective",  "steps",      "lambda_afd", "adversarial",  "lambda_reg",
      "adv_mode",   "latent_dim", "embed_dim",  "hidden",       "batch_size",
      "iters",      "lr_g",       "lr_d",       "adam_beta1",   "adam_beta2",
      "ema_decay",  "eval_every", "eval_samples", "eval_raw",   "seed",
      "mog",        "output_dir"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      fail(ErrorKind::Format, "unknown config field '" + item.key() + "'");
    }
  }
  RunConfig c;
  std::string objective = to_string(c.objective);
  std::string adv_mode = adv_mode_name(c.adv_mode);
  read_field(j, "objective", objective);
  read_field(j, "adv_mode", adv_mode);
  c.objective = objective_from_string(objective);
  c.adv_mode = adv_mode_from_string(adv_mode);
  read_field(j, "steps", c.steps);
  read_field(j, "lambda_afd", c.lambda_afd);
  read_field(j, "adversarial", c.adversarial);
  read_field(j, "lambda_reg", c.lambda_reg);
  read_field(j, "latent_dim", c.latent_dim);
  read_field(j, "embed_dim", c.embed_dim);
  read_field(j, "hidden", c.hidden);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "iters", c.iters);
  read_field(j, "lr_g", c.lr_g);
  read_field(j, "lr_d", c.lr_d);
  read_field(j, "adam_beta1", c.adam_beta1);
  read_field(j, "adam_beta2", c.adam_beta2);
  read_field(j, "ema_decay", c.ema_decay);
  read_field(j, "eval_every", c.eval_every);
  read_field(j, "eval_samples", c.eval_samples);
  read_field(j, "eval_raw", c.eval_raw);
  read_field(j, "seed", c.seed);
  read_field(j, "output_dir", c.output_dir);
  if (j.contains("mog")) {
    const json& m = j.at("mog");
    for (const auto& item : m.items()) {
      if (item.key() != "grid_k" && item.key() != "spacing" &&
          item.key() != "sigma") {
        fail(ErrorKind::Format, "unknown config field 'mog." + item.key() + "'");
      }
    }
    read_field(m, "grid_k", c.mog.grid_k);
    read_field(m, "spacing", c.mog.spacing);
    read_field(m, "sigma", c.mog.sigma);
  }
  return c;
}

}  // namespace

void RunConfig::validate() const {
  require(steps >= 1, "steps must be at least 1");
  require(objective != Objective::VanillaGan || steps == 1,
          "vanilla_gan requires steps = 1");
  require(std::isfinite(lambda_afd) && lambda_afd >= 0.0,
          "lambda_afd must be finite and non-negative (use 'inf' to disable "
          "the adversarial term)");
  require(lambda_reg >= 0.0, "lambda_reg must be non-negative");
  require(lr_g > 0.0 && lr_d > 0.0, "learning rates must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 &&
              adam_beta2 < 1.0,
          "adam betas must lie in [0, 1)");
  require(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must lie in [0, 1)");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(iters >= 0, "iters must be non-negative");
  require(eval_every >= 1, "eval_every must be at least 1");
  require(eval_samples >= 2, "eval_samples must be at least 2");
  require(!hidden.empty(), "hidden must list at least one layer width");
  for (auto w : hidden) require(w >= 1, "hidden widths must be positive");
  require(embed_dim >= 2 && embed_dim % 2 == 0, "embed_dim must be even");
  mog.validate();
}

std::string config_to_json(const RunConfig& config, bool include_output_dir,
                           int indent) {
  return to_json_object(config, include_output_dir).dump(indent);
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("config is not valid JSON: ") + e.what());
  }
  return from_json_object(j);
}

void set_config_field(RunConfig& config, const std::string& raw_key,
                      const std::string& value) {
  std::string key = raw_key;
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "lambda_afd" && (value == "inf" || value == "infinity")) {
    config.adversarial = false;
    config.lambda_afd = 1.0;
    return;
  }
  json j = to_json_object(config, true);
  json parsed;
  static const std::vector<std::string> string_fields = {"objective", "adv_mode",
                                                         "output_dir"};
  const bool is_string =
      std::find(string_fields.begin(), string_fields.end(), key) !=
      string_fields.end();
  if (is_string) {
    parsed = value;
  } else if (key == "hidden" && value.find('[') == std::string::npos) {
    parsed = json::array();
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        parsed.push_back(std::stoull(part));
      } catch (const std::exception&) {
        fail(ErrorKind::InvalidArgument, "hidden: cannot parse '" + value + "'");
      }
    }
  } else {
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      fail(ErrorKind::InvalidArgument,
           "cannot parse value '" + value + "' for '" + raw_key + "'");
    }
  }
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    const std::string outer = key.substr(0, dot);
    const std::string inner = key.substr(dot + 1);
    if (outer != "mog" || !j["mog"].contains(inner)) {
      fail(ErrorKind::InvalidArgument, "unknown config field '" + raw_key + "'");
    }
    j["mog"][inner] = parsed;
  } else {
    if (!j.contains(key)) {
      fail(ErrorKind::InvalidArgument, "unknown config field '" + raw_key + "'");
    }
    j[key] = parsed;
  }
  try {
    config = from_json_object(j);
  } catch (const Error& e) {
    fail(ErrorKind::InvalidArgument, e.what());
  }
  if (key == "lambda_afd") config.adversarial = true;
}

}  // namespace siddm

// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "dpsharp/metrics_io.hpp"

namespace dpsharp {

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "toy2d") return ModelKind::kToy2d;
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp") return ModelKind::kMlp;
  throw ConfigError(fmt::format("unknown model '{}' (valid: toy2d, logistic, mlp)", name));
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kToy2d: return "toy2d";
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kMlp: return "mlp";
  }
  throw ContractViolation("unknown model kind");
}

namespace {

DatasetKind dataset_kind_from_string(const std::string& name) {
  if (name == "synth") return DatasetKind::kSynth;
  if (name == "idx") return DatasetKind::kIdx;
  throw ConfigError(fmt::format("unknown dataset '{}' (valid: synth, idx)", name));
}

std::string to_string(DatasetKind kind) {
  return kind == DatasetKind::kSynth ? "synth" : "idx";
}

SamplingMode sampling_mode_from_string(const std::string& name) {
  if (name == "poisson") return SamplingMode::kPoisson;
  if (name == "full") return SamplingMode::kFull;
  throw ConfigError(fmt::format("unknown sampling '{}' (valid: poisson, full)", name));
}

std::string to_string(SamplingMode mode) {
  return mode == SamplingMode::kPoisson ? "poisson" : "full";
}

CompositionMode accounting_from_string(const std::string& name) {
  if (name == "renyi") return CompositionMode::kRenyi;
  if (name == "general") return CompositionMode::kGeneral;
  if (name == "advanced") return CompositionMode::kAdvanced;
  throw ConfigError(
      fmt::format("unknown accounting '{}' (valid: renyi, general, advanced)", name));
}

std::string to_string(CompositionMode mode) {
  switch (mode) {
    case CompositionMode::kRenyi: return "renyi";
    case CompositionMode::kGeneral: return "general";
    case CompositionMode::kAdvanced: return "advanced";
  }
  throw ContractViolation("unknown composition mode");
}

BudgetMatchMode budget_match_from_string(const std::string& name) {
  if (name == "none") return BudgetMatchMode::kNone;
  if (name == "iterations") return BudgetMatchMode::kIterations;
  if (name == "noise") return BudgetMatchMode::kNoise;
  throw ConfigError(
      fmt::format("unknown budget_match '{}' (valid: none, iterations, noise)", name));
}

std::string to_string(BudgetMatchMode mode) {
  switch (mode) {
    case BudgetMatchMode::kNone: return "none";
    case BudgetMatchMode::kIterations: return "iterations";
    case BudgetMatchMode::kNoise: return "noise";
  }
  throw ContractViolation("unknown budget match mode");
}

BaseUpdateKind base_update_from_string(const std::string& name) {
  if (name == "sgd") return BaseUpdateKind::kSgdMomentum;
  if (name == "adam") return BaseUpdateKind::kAdam;
  throw ConfigError(fmt::format("unknown base_update '{}' (valid: sgd, adam)", name));
}

std::string to_string(BaseUpdateKind kind) {
  return kind == BaseUpdateKind::kSgdMomentum ? "sgd" : "adam";
}

struct KeyEntry {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> print;
};

// One row per key keeps parsing, echoing, and the valid-key list in sync.
const std::vector<KeyEntry>& key_table() {
  auto num = [](double RunConfig::* field, const char* name) {
    return KeyEntry{name,
                    [field, name](RunConfig& c, const std::string& v) {
                      c.*field = parse_double_strict(v, fmt::format("key '{}'", name));
                    },
                    [field](const RunConfig& c) { return format_double(c.*field); }};
  };
  auto integer = [](std::int64_t RunConfig::* field, const char* name) {
    return KeyEntry{name,
                    [field, name](RunConfig& c, const std::string& v) {
                      c.*field = parse_int_strict(v, fmt::format("key '{}'", name));
                    },
                    [field](const RunConfig& c) { return std::to_string(c.*field); }};
  };
  auto small_int = [](int RunConfig::* field, const char* name) {
    return KeyEntry{name,
                    [field, name](RunConfig& c, const std::string& v) {
                      c.*field = static_cast<int>(
                          parse_int_strict(v, fmt::format("key '{}'", name)));
                    },
                    [field](const RunConfig& c) { return std::to_string(c.*field); }};
  };
  auto text = [](std::string RunConfig::* field, const char* name) {
    return KeyEntry{name,
                    [field](RunConfig& c, const std::string& v) { c.*field = v; },
                    [field](const RunConfig& c) { return c.*field; }};
  };

  static const std::vector<KeyEntry> table = {
      {"model", [](RunConfig& c, const std::string& v) { c.model = model_kind_from_string(v); },
       [](const RunConfig& c) { return to_string(c.model); }},
      small_int(&RunConfig::hidden, "hidden"),
      {"dataset", [](RunConfig& c, const std::string& v) { c.dataset = dataset_kind_from_string(v); },
       [](const RunConfig& c) { return to_string(c.dataset); }},
      integer(&RunConfig::synth_n, "synth_n"),
      integer(&RunConfig::synth_dim, "synth_dim"),
      small_int(&RunConfig::synth_classes, "synth_classes"),
      num(&RunConfig::synth_separation, "synth_separation"),
      num(&RunConfig::synth_scale_sigma, "synth_scale_sigma"),
      num(&RunConfig::synth_cluster_fraction, "synth_cluster_fraction"),
      num(&RunConfig::synth_cluster_offset, "synth_cluster_offset"),
      num(&RunConfig::synth_cluster_radius, "synth_cluster_radius"),
      num(&RunConfig::train_fraction, "train_fraction"),
      text(&RunConfig::idx_images, "idx_images"),
      text(&RunConfig::idx_labels, "idx_labels"),
      integer(&RunConfig::idx_max, "idx_max"),
      {"optimizer",
       [](RunConfig& c, const std::string& v) { c.optimizer = optimizer_kind_from_string(v); },
       [](const RunConfig& c) { return to_string(c.optimizer); }},
      num(&RunConfig::learning_rate, "learning_rate"),
      num(&RunConfig::rho, "rho"),
      num(&RunConfig::momentum, "momentum"),
      num(&RunConfig::ascent_momentum, "ascent_momentum"),
      num(&RunConfig::clip_norm, "clip_norm"),
      num(&RunConfig::zero_guard, "zero_guard"),
      {"base_update",
       [](RunConfig& c, const std::string& v) { c.base_update = base_update_from_string(v); },
       [](const RunConfig& c) { return to_string(c.base_update); }},
      num(&RunConfig::epsilon, "epsilon"),
      num(&RunConfig::delta, "delta"),
      num(&RunConfig::noise_multiplier, "noise_multiplier"),
      {"accounting",
       [](RunConfig& c, const std::string& v) { c.accounting = accounting_from_string(v); },
       [](const RunConfig& c) { return to_string(c.accounting); }},
      {"budget_match",
       [](RunConfig& c, const std::string& v) { c.budget_match = budget_match_from_string(v); },
       [](const RunConfig& c) { return to_string(c.budget_match); }},
      num(&RunConfig::max_epsilon, "max_epsilon"),
      small_int(&RunConfig::epochs, "epochs"),
      integer(&RunConfig::batch_size, "batch_size"),
      {"sampling",
       [](RunConfig& c, const std::string& v) { c.sampling = sampling_mode_from_string(v); },
       [](const RunConfig& c) { return to_string(c.sampling); }},
      integer(&RunConfig::microbatch, "microbatch"),
      {"seed",
       [](RunConfig& c, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_int_strict(v, "key 'seed'"));
         c.seed_set = true;
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      integer(&RunConfig::eval_every, "eval_every"),
      integer(&RunConfig::analysis_every, "analysis_every"),
      num(&RunConfig::analysis_rho, "analysis_rho"),
      integer(&RunConfig::hessian_subsample, "hessian_subsample"),
      text(&RunConfig::out_dir, "out_dir"),
  };
  return table;
}

std::string trimmed(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  for (const KeyEntry& entry : key_table()) {
    if (key == entry.name) {
      entry.parse(*this, value);
      return;
    }
  }
  std::string known;
  for (const KeyEntry& entry : key_table()) {
    if (!known.empty()) known += ", ";
    known += entry.name;
  }
  throw ConfigError(fmt::format("unknown config key '{}' (valid keys: {})", key, known));
}

std::vector<std::string> RunConfig::valid_keys() {
  std::vector<std::string> keys;
  for (const KeyEntry& entry : key_table()) keys.emplace_back(entry.name);
  return keys;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const KeyEntry& entry : key_table()) {
    out += fmt::format("{} = {}\n", entry.name, entry.print(*this));
  }
  return out;
}

void RunConfig::validate() const {
  hyper_params().validate();
  if (hidden < 1) throw ConfigError("hidden must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (microbatch < 0) throw ConfigError("microbatch must be nonnegative");
  if (eval_every < 0) throw ConfigError("eval_every must be nonnegative");
  if (analysis_every < 0) throw ConfigError("analysis_every must be nonnegative");
  if (!(analysis_rho > 0.0)) throw ConfigError("analysis_rho must be positive");
  if (hessian_subsample < 1) throw ConfigError("hessian_subsample must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1]");
  }
  if (max_epsilon < 0.0) throw ConfigError("max_epsilon must be nonnegative");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");

  if (dataset == DatasetKind::kSynth) {
    if (synth_n < synth_classes) throw ConfigError("synth_n must cover every class");
    if (synth_classes < 1) throw ConfigError("synth_classes must be positive");
    if (synth_classes > synth_dim) {
      throw ConfigError("synth_classes must not exceed synth_dim (axis-aligned means)");
    }
  } else if (model != ModelKind::kToy2d) {
    if (idx_images.empty() || idx_labels.empty()) {
      throw ConfigError("dataset = idx needs idx_images and idx_labels paths");
    }
  }

  if (is_private(optimizer)) {
    const bool budget_set = epsilon > 0.0;
    const bool sigma_set = noise_multiplier >= 0.0;
    if (budget_set && sigma_set) {
      throw ConfigError("set a target epsilon or an explicit noise_multiplier, not both");
    }
    if (!budget_set && !sigma_set) {
      throw ConfigError("private optimizers need a target epsilon or a noise_multiplier");
    }
  }
  if (epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
  if (budget_match != BudgetMatchMode::kNone && optimizer != OptimizerKind::kDpSam) {
    throw ConfigError("budget_match applies only to optimizer = dpsam");
  }
}

HyperParams RunConfig::hyper_params() const {
  HyperParams hp;
  hp.learning_rate = learning_rate;
  hp.radius = rho;
  hp.base_momentum = momentum;
  hp.ascent_momentum = ascent_momentum < 0.0 ? momentum : ascent_momentum;
  hp.clip_norm = clip_norm;
  hp.noise_multiplier = noise_multiplier > 0.0 ? noise_multiplier : 0.0;
  hp.zero_guard = zero_guard;
  hp.base_update = base_update;
  return hp;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  RunConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string content = trimmed(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(
          fmt::format("{}:{}: expected 'key = value', got '{}'", path, line_no, content));
    }
    const std::string key = trimmed(content.substr(0, eq));
    const std::string value = trimmed(content.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(fmt::format("{}:{}: missing key before '='", path, line_no));
    }
    try {
      config.apply(key, value);
    } catch (const ConfigError& err) {
      throw ConfigError(fmt::format("{}:{}: {}", path, line_no, err.what()));
    }
  }
  return config;
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
  for (const std::string& assignment : assignments) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(
          fmt::format("override '{}' must look like key=value", assignment));
    }
    config.apply(trimmed(assignment.substr(0, eq)), trimmed(assignment.substr(eq + 1)));
  }
}

}  // namespace dpsharp

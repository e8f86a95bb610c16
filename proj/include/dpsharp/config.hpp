// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: flat `key = value` files with `#` comments, every key
// echoed back verbatim into run metadata so a finished run's metadata file
// is itself a loadable config.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsharp/optimizer.hpp"

namespace dpsharp {

enum class ModelKind { kToy2d, kLogistic, kMlp };
enum class DatasetKind { kSynth, kIdx };
enum class SamplingMode { kPoisson, kFull };
enum class BudgetMatchMode { kNone, kIterations, kNoise };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

struct RunConfig {
  // Model.
  ModelKind model = ModelKind::kMlp;
  int hidden = 64;

  // Dataset. The synth_* keys apply when dataset = synth; idx_* when idx.
  DatasetKind dataset = DatasetKind::kSynth;
  std::int64_t synth_n = 5120;
  std::int64_t synth_dim = 20;
  int synth_classes = 2;
  double synth_separation = 4.0;
  double synth_scale_sigma = 0.0;
  double synth_cluster_fraction = 0.0;
  double synth_cluster_offset = 0.3;
  double synth_cluster_radius = 0.3;
  double train_fraction = 0.8;
  std::string idx_images;
  std::string idx_labels;
  std::int64_t idx_max = -1;

  // Optimizer.
  OptimizerKind optimizer = OptimizerKind::kDpSgd;
  double learning_rate = 0.5;
  double rho = 0.0;
  double momentum = 0.9;
  double ascent_momentum = -1.0;  // -1: follow `momentum`
  double clip_norm = 0.1;
  double zero_guard = 1e-12;
  BaseUpdateKind base_update = BaseUpdateKind::kSgdMomentum;

  // Privacy. Exactly one of epsilon (> 0, calibrates sigma) or
  // noise_multiplier (>= 0, used as given) may be set for private runs.
  double epsilon = 0.0;           // 0: unset
  double delta = 1e-5;
  double noise_multiplier = -1.0; // < 0: unset
  CompositionMode accounting = CompositionMode::kRenyi;
  BudgetMatchMode budget_match = BudgetMatchMode::kNone;
  double max_epsilon = 0.0;       // 0: no cap; > 0: halt when exceeded

  // Training.
  int epochs = 10;
  std::int64_t batch_size = 256;
  SamplingMode sampling = SamplingMode::kPoisson;
  std::int64_t microbatch = 0;    // 0: whole batch at once; no accounting effect
  std::uint64_t seed = 0;
  bool seed_set = false;          // not a key; tracks whether seed was given

  // Analysis and output.
  std::int64_t eval_every = 0;      // 0: at each epoch end
  std::int64_t analysis_every = 0;  // 0: off; else sharpness + noise gap cadence
  double analysis_rho = 0.1;        // ascent radius for the sharpness column
  std::int64_t hessian_subsample = 1024;
  std::string out_dir = "run";

  // Assigns one key. Unknown keys raise ConfigError listing the valid keys;
  // unparsable values raise ConfigError naming the key.
  void apply(const std::string& key, const std::string& value);

  // Cross-field invariants (budget XOR sigma, ranges, dataset coherence).
  void validate() const;

  // Every key in declaration order, one `key = value` line each. Doubles use
  // shortest round-trip formatting so serialize/parse is lossless.
  std::string serialize() const;

  HyperParams hyper_params() const;

  static std::vector<std::string> valid_keys();
};

// Parses a config file: `key = value` lines, `#` starts a comment, blank
// lines ignored. Errors carry the line number.
RunConfig load_config(const std::string& path);

// Applies `key=value` assignments (CLI overrides) on top of a config.
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);

}  // namespace dpsharp

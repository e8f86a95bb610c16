// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/train.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include <fmt/format.h>

#include "dpsharp/analysis.hpp"
#include "dpsharp/idx.hpp"
#include "dpsharp/rdp.hpp"
#include "dpsharp/toy2d.hpp"

namespace dpsharp {

namespace {

// Forwards everything to the wrapped model but evaluates per-example rows in
// chunks of `micro` examples. Results are bit-identical to the unchunked
// path (rows are independent); only peak temporary memory changes, so the
// knob has no accounting or accuracy effect.
class MicrobatchedModel : public Model {
 public:
  MicrobatchedModel(const Model& inner, Eigen::Index micro)
      : inner_(inner), micro_(micro) {
    if (micro_ < 1) throw ContractViolation("microbatch size must be positive");
  }

  Eigen::Index parameter_count() const override { return inner_.parameter_count(); }
  int num_classes() const override { return inner_.num_classes(); }
  int feature_dim() const override { return inner_.feature_dim(); }
  std::vector<ParamBlock> parameter_blocks() const override {
    return inner_.parameter_blocks();
  }

  void loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                        Eigen::VectorXd& out) const override {
    out.resize(batch.size());
    Eigen::VectorXd piece;
    for_each_chunk(batch, [&](const ExampleBatch& chunk, Eigen::Index begin) {
      inner_.loss_per_example(w, chunk, piece);
      out.segment(begin, chunk.size()) = piece;
    });
  }

  void grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                        PerExampleGrads& out) const override {
    out.resize(batch.size(), inner_.parameter_count());
    PerExampleGrads piece;
    for_each_chunk(batch, [&](const ExampleBatch& chunk, Eigen::Index begin) {
      inner_.grad_per_example(w, chunk, piece);
      out.middleRows(begin, chunk.size()) = piece;
    });
  }

  double accuracy(const ParamVector& w, const ExampleBatch& batch) const override {
    return inner_.accuracy(w, batch);
  }
  std::vector<int> predict(const ParamVector& w,
                           const ExampleBatch& batch) const override {
    return inner_.predict(w, batch);
  }

 private:
  template <typename Fn>
  void for_each_chunk(const ExampleBatch& batch, Fn&& fn) const {
    for (Eigen::Index begin = 0; begin < batch.size(); begin += micro_) {
      const Eigen::Index len = std::min(micro_, batch.size() - begin);
      ExampleBatch chunk;
      chunk.features = batch.features.middleRows(begin, len);
      chunk.labels.assign(batch.labels.begin() + begin, batch.labels.begin() + begin + len);
      if (!batch.indices.empty()) {
        chunk.indices.assign(batch.indices.begin() + begin,
                             batch.indices.begin() + begin + len);
      }
      fn(chunk, begin);
    }
  }

  const Model& inner_;
  Eigen::Index micro_;
};

int queries_per_step(OptimizerKind kind) {
  return kind == OptimizerKind::kDpSam ? 2 : 1;
}

// Single-query (eps0, delta0) for the general/advanced ledgers: the
// accountant's one-step conversion at delta0 = delta / (2 * total queries),
// leaving half the delta budget for the conversion slack.
PrivacyBudget per_query_budget(double q, double sigma, double delta,
                               std::int64_t total_queries) {
  const double delta0 = delta / (2.0 * static_cast<double>(std::max<std::int64_t>(total_queries, 1)));
  const RdpCurve curve = rdp_subsampled_gaussian(q, sigma);
  return {rdp_to_dp(curve, 1, delta0), delta0};
}

}  // namespace

Dataset build_dataset(const RunConfig& config) {
  if (config.model == ModelKind::kToy2d) {
    // Data-free landscape: two identical dummy rows so both splits exist.
    Dataset data;
    data.features = Eigen::MatrixXd::Zero(2, 1);
    data.labels = {0, 0};
    data.train_count = 1;
    return data;
  }
  switch (config.dataset) {
    case DatasetKind::kSynth: {
      SynthOptions options;
      options.train_fraction = config.train_fraction;
      options.feature_scale_log_sigma = config.synth_scale_sigma;
      options.cluster_fraction = config.synth_cluster_fraction;
      options.cluster_offset = config.synth_cluster_offset;
      options.cluster_radius = config.synth_cluster_radius;
      return synth_gaussian_dataset(config.synth_n, config.synth_dim,
                                    config.synth_classes, config.synth_separation,
                                    config.seed, options);
    }
    case DatasetKind::kIdx:
      return load_idx(config.idx_images, config.idx_labels, config.idx_max,
                      config.train_fraction);
  }
  throw ContractViolation("unknown dataset kind");
}

std::unique_ptr<Model> build_model(const RunConfig& config, const Dataset& data) {
  if (config.model == ModelKind::kToy2d) return std::make_unique<Toy2dModel>();
  int num_classes = 0;
  for (const int label : data.labels) num_classes = std::max(num_classes, label + 1);
  num_classes = std::max(num_classes, 2);
  const int d = static_cast<int>(data.feature_dim());
  if (config.model == ModelKind::kLogistic) {
    return std::make_unique<LogisticModel>(d, num_classes);
  }
  return std::make_unique<MlpModel>(d, config.hidden, num_classes);
}

std::int64_t steps_per_epoch(const RunConfig& config, Eigen::Index train_count) {
  if (config.sampling == SamplingMode::kFull) return 1;
  return (static_cast<std::int64_t>(train_count) + config.batch_size - 1) / config.batch_size;
}

double resolve_sigma(const RunConfig& config, double q, std::int64_t planned_steps) {
  double sigma;
  if (config.noise_multiplier >= 0.0) {
    sigma = config.noise_multiplier;
  } else {
    // budget_match = iterations/noise both calibrate against the single-query
    // baseline plan; only the unmatched two-query run charges 2T up front.
    std::int64_t charge = planned_steps;
    if (config.optimizer == OptimizerKind::kDpSam &&
        config.budget_match == BudgetMatchMode::kNone) {
      charge = 2 * planned_steps;
    }
    sigma = calibrate_sigma({config.epsilon, config.delta}, q, charge);
  }
  if (config.budget_match == BudgetMatchMode::kNoise && sigma > 0.0) {
    sigma *= sam_tradeoff_factors(config.delta).noise_factor;
  }
  return sigma;
}

TrainResult train(const RunConfig& config) {
  config.validate();
  const Dataset data = build_dataset(config);
  const std::unique_ptr<Model> base_model = build_model(config, data);
  const Model* model = base_model.get();
  std::unique_ptr<MicrobatchedModel> chunked;
  if (config.microbatch > 0) {
    chunked = std::make_unique<MicrobatchedModel>(*base_model, config.microbatch);
    model = chunked.get();
  }

  const Eigen::Index n_train = data.train_count;
  if (n_train < 1) throw ConfigError("empty train split");
  const std::int64_t spe = steps_per_epoch(config, n_train);
  const std::int64_t planned = static_cast<std::int64_t>(config.epochs) * spe;
  const double q =
      config.sampling == SamplingMode::kFull
          ? 1.0
          : std::min(1.0, static_cast<double>(config.batch_size) / static_cast<double>(n_train));

  const OptimizerKind kind = config.optimizer;
  std::int64_t run_steps = planned;
  if (kind == OptimizerKind::kDpSam && config.budget_match == BudgetMatchMode::kIterations) {
    run_steps = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(
               std::floor(sam_tradeoff_factors(config.delta).iteration_factor *
                          static_cast<double>(planned))));
  }

  HyperParams hp = config.hyper_params();
  const bool is_dp = is_private(kind);
  double sigma = 0.0;
  if (is_dp) {
    sigma = resolve_sigma(config, q, planned);
    hp.noise_multiplier = sigma;
  }
  hp.validate();

  const std::int64_t expected_queries = run_steps * queries_per_step(kind);
  BudgetLedger ledger(CompositionMode::kGeneral);
  PrivacyBudget per_query{0.0, 0.0};
  if (is_dp && sigma > 0.0) {
    switch (config.accounting) {
      case CompositionMode::kRenyi:
        ledger = BudgetLedger::renyi({hp.clip_norm, sigma, q, expected_queries},
                                     config.delta);
        break;
      case CompositionMode::kGeneral:
        per_query = per_query_budget(q, sigma, config.delta, expected_queries);
        break;
      case CompositionMode::kAdvanced:
        ledger = BudgetLedger::advanced(config.delta / 2.0);
        per_query = per_query_budget(q, sigma, config.delta, expected_queries);
        break;
    }
  } else if (is_dp) {
    // sigma = 0: queries are unprotected; the ledger reports infinite spend.
    per_query = {std::numeric_limits<double>::infinity(), 0.0};
  }
  if (config.max_epsilon > 0.0) ledger.set_cap({config.max_epsilon, 1.0});

  OptimizerState state = OptimizerState::fresh(init_params(*model, config.seed));

  std::unique_ptr<MetricsWriter> writer;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    writer = std::make_unique<MetricsWriter>(config.out_dir + "/metrics.csv");
  }

  TrainResult result;
  result.sigma = sigma;
  result.planned_steps = run_steps;

  const ExampleBatch test_full = data.test_batch();
  std::vector<std::int64_t> all_train(static_cast<std::size_t>(n_train));
  for (Eigen::Index i = 0; i < n_train; ++i) all_train[static_cast<std::size_t>(i)] = i;

  ParamVector prev_seed;
  double epoch_clip_sum = 0.0;
  std::int64_t epoch_clip_count = 0;

  for (std::int64_t t = 1; t <= run_steps; ++t) {
    const int epoch = static_cast<int>((t - 1) / spe) + 1;
    MetricsRow row;
    row.step = t;
    row.epoch = epoch;

    std::vector<std::int64_t> picked;
    if (config.sampling == SamplingMode::kFull) {
      picked = all_train;
    } else {
      RngStream sample(config.seed, StreamPurpose::kSample, t);
      picked = poisson_sample(n_train, q, sample);
    }

    bool stepped = false;
    StepDiagnostics diag;
    ExampleBatch batch;
    ParamVector w_pre;
    if (picked.empty()) {
      result.skipped_steps += 1;
    } else {
      batch = data.batch(picked);
      w_pre = state.w;
      row.train_loss = mean_loss(*model, state.w, batch);
      RngStream noise(config.seed, StreamPurpose::kNoise, t);
      try {
        optimizer_step(kind, state, *model, batch, hp, ledger, per_query, noise, &diag);
        stepped = true;
      } catch (const BudgetExhausted&) {
        result.halted_on_budget = true;
      }
    }
    if (result.halted_on_budget) break;

    if (stepped) {
      row.grad_norm_mean = diag.grad_norm_mean;
      if (is_dp) {
        row.clip_fraction = diag.clip_fraction;
        epoch_clip_sum += diag.clip_fraction;
        epoch_clip_count += 1;
      }
      bool cosine_valid = false;
      if (prev_seed.size() > 0 && diag.ascent_seed.size() > 0) {
        const double cosine = ascent_cosine(prev_seed, diag.ascent_seed, &cosine_valid);
        if (cosine_valid) row.ascent_cosine = cosine;
      }
      prev_seed = diag.ascent_seed;

      if (config.analysis_every > 0 && t % config.analysis_every == 0) {
        bool moved = false;
        const double sharp = estimated_sharpness(*model, w_pre, config.analysis_rho,
                                                 batch, &diag.ascent_seed, &moved);
        if (moved) row.est_sharpness = sharp;
        if (is_dp && sigma > 0.0) {
          row.noise_gap = noise_gap(*model, w_pre, diag.clean_mean, diag.noisy_mean,
                                    hp.learning_rate, batch)
                              .gap;
        }
      }
    }

    if (is_dp) {
      const PrivacyBudget spent = ledger.total();
      row.eps_spent = spent.eps;
      row.delta_spent = spent.delta;
    }

    const bool eval_due = config.eval_every == 0 ? (t % spe == 0)
                                                 : (t % config.eval_every == 0);
    if ((eval_due || t == run_steps) && test_full.size() > 0) {
      row.test_loss = mean_loss(*model, state.w, test_full);
      row.test_acc = model->accuracy(state.w, test_full);
    }

    if (t % spe == 0) {
      result.epoch_end_weights.push_back(state.w);
      result.epoch_clip_fraction.push_back(
          epoch_clip_count > 0 ? epoch_clip_sum / static_cast<double>(epoch_clip_count)
                               : 0.0);
      epoch_clip_sum = 0.0;
      epoch_clip_count = 0;
    }

    result.metrics.push_back(row);
    if (writer != nullptr) writer->write_row(row);
    result.steps_run = t;
  }

  result.final_w = state.w;
  result.spent = ledger.total();
  {
    const ExampleBatch train_full = data.train_batch();
    result.final_train_loss = mean_loss(*model, state.w, train_full);
  }
  if (test_full.size() > 0) {
    result.final_test_loss = mean_loss(*model, state.w, test_full);
    result.final_test_accuracy = model->accuracy(state.w, test_full);
  } else {
    result.final_test_loss = std::numeric_limits<double>::quiet_NaN();
    result.final_test_accuracy = std::numeric_limits<double>::quiet_NaN();
  }

  if (writer != nullptr) {
    writer->finalize();
    write_weights(config.out_dir + "/weights.bin", result.final_w);
    std::string meta;
    meta += fmt::format("# dpsharp {} run metadata; loadable as a config file.\n", kVersion);
    meta += config.serialize();
    meta += fmt::format("# sigma_used = {}\n", format_double(result.sigma));
    meta += fmt::format("# steps_run = {} of {}\n", result.steps_run, result.planned_steps);
    meta += fmt::format("# skipped_steps = {}\n", result.skipped_steps);
    meta += fmt::format("# eps_spent = {}\n", format_double(result.spent.eps));
    meta += fmt::format("# delta_spent = {}\n", format_double(result.spent.delta));
    meta += fmt::format("# halted_on_budget = {}\n", result.halted_on_budget ? 1 : 0);
    atomic_write_text(config.out_dir + "/meta.cfg", meta);
  }

  // Budget exhaustion is reported through the flag rather than an exception
  // so in-process callers keep the partial result; the CLI maps it to its
  // exit code.
  return result;
}

}  // namespace dpsharp

// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// The training loop: dataset and model construction, noise calibration,
// the step loop with its ledger, per-step metrics, and run outputs.
//
// Stream discipline (all streams derive from the run seed):
//   (seed, init,   0)  dataset synthesis
//   (seed, init,   1)  weight initialization
//   (seed, sample, t)  minibatch membership for step t
//   (seed, noise,  t)  gradient noise for step t
//   (seed, analysis, *) diagnostics only
// Analysis work never touches the init/sample/noise streams, so toggling
// diagnostics cannot change a trajectory.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dpsharp/config.hpp"
#include "dpsharp/dataset.hpp"
#include "dpsharp/metrics_io.hpp"
#include "dpsharp/optimizer.hpp"

namespace dpsharp {

struct TrainResult {
  ParamVector final_w;
  std::vector<MetricsRow> metrics;  // one row per step, including skipped steps
  std::vector<ParamVector> epoch_end_weights;
  std::vector<double> epoch_clip_fraction;  // mean over the epoch's queries
  PrivacyBudget spent;
  double sigma = 0.0;               // after calibration, if any
  std::int64_t planned_steps = 0;
  std::int64_t steps_run = 0;
  std::int64_t skipped_steps = 0;   // empty Poisson draws
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  double final_test_accuracy = 0.0; // NaN for models without classes
  bool halted_on_budget = false;
};

// Builds the configured dataset (toy2d runs are data-free and use a single
// dummy example).
Dataset build_dataset(const RunConfig& config);

// Builds the configured model for the dataset's dimensions.
std::unique_ptr<Model> build_model(const RunConfig& config, const Dataset& data);

// Number of optimizer steps per epoch: ceil(train_count / batch_size) under
// Poisson sampling, 1 under full-batch sampling.
std::int64_t steps_per_epoch(const RunConfig& config, Eigen::Index train_count);

// The noise multiplier a run will use: the explicit value, or the calibrated
// one when a target epsilon is set. Calibration charges the dpsgd-equivalent
// plan when budget_match = iterations, and the actual query count otherwise.
double resolve_sigma(const RunConfig& config, double q, std::int64_t planned_steps);

// Runs the full loop. When config.out_dir is nonempty, writes metrics.csv,
// weights.bin, and meta.cfg there (creating the directory); out_dir = ""
// keeps everything in memory. Budget exhaustion (max_epsilon cap) stops the
// run cleanly: partial outputs are written and halted_on_budget is set;
// callers decide the exit status.
TrainResult train(const RunConfig& config);

}  // namespace dpsharp

// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpsharp/model.hpp"
#include "dpsharp/rng.hpp"

namespace dpsharp {

// In-memory dataset with a deterministic leading-rows train split.
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;   // n, in [0, num_classes)
  Eigen::Index train_count = 0;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
  Eigen::Index test_count() const { return size() - train_count; }

  // Gathers the given train-split rows (used by minibatch sampling).
  ExampleBatch batch(std::span<const std::int64_t> indices) const;
  ExampleBatch train_batch() const;
  ExampleBatch test_batch() const;
};

// Optional distortions layered on the Gaussian blobs. The planted cluster
// overwrites a uniformly chosen subset of the train split with points packed
// tightly inside one class's region but labeled as another, giving the
// landscape a sharp direction that a flatness-seeking optimizer can avoid.
struct SynthOptions {
  double train_fraction = 0.8;
  double feature_scale_log_sigma = 0.0;  // per-example lognormal feature scale
  double cluster_fraction = 0.0;         // train rows replaced by the cluster
  double cluster_offset = 0.3;           // position along means[1] -> means[0]
  double cluster_radius = 0.3;
  int cluster_label = 0;
};

// Gaussian class blobs: class c is N(mu_c, I) with mu_c = separation * e_c,
// so every pair of class means is separation * sqrt(2) apart. Labels are
// uniform. Requires num_classes <= d (one axis per class) and n >= classes.
Dataset synth_gaussian_dataset(Eigen::Index n, Eigen::Index d, int num_classes,
                               double class_separation, std::uint64_t seed,
                               const SynthOptions& options = {});

// Poisson subsampling: each train index enters the batch independently with
// probability q. An empty draw is legal; callers skip the step (no budget is
// charged because no query ran).
std::vector<std::int64_t> poisson_sample(Eigen::Index train_count, double q,
                                         RngStream& rng);

}  // namespace dpsharp

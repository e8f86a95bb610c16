// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace dpsharp {

ExampleBatch Dataset::batch(std::span<const std::int64_t> indices) const {
  ExampleBatch out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  out.indices.assign(indices.begin(), indices.end());
  Eigen::Index row = 0;
  for (const std::int64_t idx : indices) {
    if (idx < 0 || idx >= size()) throw ContractViolation("dataset index out of range");
    out.features.row(row++) = features.row(idx);
    out.labels.push_back(labels[static_cast<std::size_t>(idx)]);
  }
  return out;
}

namespace {

ExampleBatch contiguous_batch(const Dataset& data, Eigen::Index begin, Eigen::Index end) {
  ExampleBatch out;
  out.features = data.features.middleRows(begin, end - begin);
  out.labels.assign(data.labels.begin() + begin, data.labels.begin() + end);
  out.indices.resize(static_cast<std::size_t>(end - begin));
  for (Eigen::Index i = begin; i < end; ++i) {
    out.indices[static_cast<std::size_t>(i - begin)] = i;
  }
  return out;
}

}  // namespace

ExampleBatch Dataset::train_batch() const { return contiguous_batch(*this, 0, train_count); }

ExampleBatch Dataset::test_batch() const { return contiguous_batch(*this, train_count, size()); }

Dataset synth_gaussian_dataset(Eigen::Index n, Eigen::Index d, int num_classes,
                               double class_separation, std::uint64_t seed,
                               const SynthOptions& options) {
  if (n < num_classes) throw ContractViolation("need at least one example per class");
  if (num_classes < 1) throw ContractViolation("num_classes must be positive");
  if (num_classes > d) {
    throw ContractViolation("axis-aligned means need num_classes <= feature dim");
  }
  if (!(options.train_fraction > 0.0 && options.train_fraction <= 1.0)) {
    throw ContractViolation("train_fraction must lie in (0, 1]");
  }
  if (class_separation < 0.0) throw ContractViolation("class_separation must be >= 0");

  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(num_classes, d);
  for (int c = 0; c < num_classes; ++c) means(c, c) = class_separation;

  RngStream rng(seed, StreamPurpose::kInit, 0);
  Dataset data;
  data.labels.resize(static_cast<std::size_t>(n));
  for (auto& label : data.labels) {
    label = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(num_classes)));
  }
  data.features.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      data.features(i, j) =
          means(data.labels[static_cast<std::size_t>(i)], j) + rng.next_gaussian();
    }
  }
  if (options.feature_scale_log_sigma > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      data.features.row(i) *=
          std::exp(options.feature_scale_log_sigma * rng.next_gaussian());
    }
  }

  data.train_count = std::min<Eigen::Index>(
      n, static_cast<Eigen::Index>(std::llround(options.train_fraction * static_cast<double>(n))));

  const auto planted =
      static_cast<Eigen::Index>(options.cluster_fraction * static_cast<double>(data.train_count));
  if (planted > 0) {
    if (options.cluster_label >= num_classes || num_classes < 2) {
      throw ContractViolation("planted cluster needs >= 2 classes and a valid label");
    }
    // Uniform subset of the train split via partial Fisher-Yates.
    std::vector<Eigen::Index> pool(static_cast<std::size_t>(data.train_count));
    for (Eigen::Index i = 0; i < data.train_count; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index i = 0; i < planted; ++i) {
      const auto j = i + static_cast<Eigen::Index>(
                             rng.next_below(static_cast<std::uint64_t>(data.train_count - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    const Eigen::RowVectorXd center =
        means.row(1) + options.cluster_offset * (means.row(0) - means.row(1));
    for (Eigen::Index i = 0; i < planted; ++i) {
      const Eigen::Index row = pool[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < d; ++j) {
        data.features(row, j) = center[j] + options.cluster_radius * rng.next_gaussian();
      }
      data.labels[static_cast<std::size_t>(row)] = options.cluster_label;
    }
  }
  return data;
}

std::vector<std::int64_t> poisson_sample(Eigen::Index train_count, double q,
                                         RngStream& rng) {
  if (!(q > 0.0 && q <= 1.0)) throw ContractViolation("sampling rate must lie in (0, 1]");
  std::vector<std::int64_t> picked;
  for (Eigen::Index i = 0; i < train_count; ++i) {
    if (rng.next_unit() < q) picked.push_back(i);
  }
  return picked;
}

}  // namespace dpsharp

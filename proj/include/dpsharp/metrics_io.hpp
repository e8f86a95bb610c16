// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Run outputs: the per-step metrics CSV, the weights file, and atomic text
// writes. All files are written to a temporary sibling and renamed into
// place so readers never observe partial content.

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include "dpsharp/model.hpp"

namespace dpsharp {

// Shortest decimal that parses back to exactly the same double.
std::string format_double(double value);

// Strict full-string numeric parses; `what` names the offending key in the
// ConfigError message.
double parse_double_strict(const std::string& text, const std::string& what);
std::int64_t parse_int_strict(const std::string& text, const std::string& what);

// Writes content to path via temp-file-plus-rename.
void atomic_write_text(const std::string& path, const std::string& content);

// Weights binary format: u64 little-endian length, then f64 little-endian
// values. Written atomically.
void write_weights(const std::string& path, const ParamVector& w);
ParamVector read_weights(const std::string& path);

// One metrics CSV row. Empty optionals emit empty fields; the column set
// never changes:
//   step, epoch, train_loss, test_loss, test_acc, eps_spent, delta_spent,
//   grad_norm_mean, clip_fraction, ascent_cosine, noise_gap, est_sharpness
struct MetricsRow {
  std::int64_t step = 0;
  int epoch = 0;
  std::optional<double> train_loss;
  std::optional<double> test_loss;
  std::optional<double> test_acc;
  std::optional<double> eps_spent;
  std::optional<double> delta_spent;
  std::optional<double> grad_norm_mean;
  std::optional<double> clip_fraction;
  std::optional<double> ascent_cosine;
  std::optional<double> noise_gap;
  std::optional<double> est_sharpness;
};

// Streams rows to <path>.tmp; finalize() renames into place. A writer
// destroyed without finalize() removes the temporary (abandoned run).
class MetricsWriter {
 public:
  explicit MetricsWriter(std::string path);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write_row(const MetricsRow& row);
  void finalize();

  static const char* header();

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream out_;
  bool finalized_ = false;
};

}  // namespace dpsharp

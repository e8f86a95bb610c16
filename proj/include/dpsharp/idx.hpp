// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// IDX binary ingestion (the MNIST container format): big-endian magic and
// dimensions, u8 payload. Images scale to [0, 1]; a cap limits how many
// examples are read so desk-scale runs can use file subsets.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsharp/dataset.hpp"

namespace dpsharp {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // u8 tensor, 3 dims
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // u8 vector, 1 dim

// Reads an images file (magic 0x00000803, dims [n, rows, cols]) into an
// n x (rows * cols) matrix with pixels mapped to [0, 1]. max_items < 0 reads
// everything. Malformed input raises FormatError naming the byte offset.
Eigen::MatrixXd load_idx_images(const std::string& path, Eigen::Index max_items = -1);

// Reads a labels file (magic 0x00000801, dims [n]).
std::vector<int> load_idx_labels(const std::string& path, Eigen::Index max_items = -1);

// Pairs an images file with its labels file. The two single-file readers
// exist because one IDX file carries either pixels or labels, never both.
// train_fraction fixes the leading-rows split of the loaded examples.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 Eigen::Index max_items = -1, double train_fraction = 0.8);

// Fixture writers, exact inverses of the readers (pixels must already be
// multiples of 1/255 for a byte-level round trip).
void write_idx_images(const std::string& path, const Eigen::MatrixXd& images,
                      int rows, int cols);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

}  // namespace dpsharp

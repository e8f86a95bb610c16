// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/idx.hpp"

#include <cstdio>
#include <fstream>

#include <fmt/format.h>

namespace dpsharp {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open idx file '{}'", path));
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(
        fmt::format("'{}' truncated: need 4 bytes at offset {}", path, offset));
  }
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

void check_magic(const std::vector<unsigned char>& bytes, std::uint32_t expected,
                 const std::string& path) {
  const std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != expected) {
    throw FormatError(fmt::format(
        "'{}' has magic 0x{:08x} at offset 0, expected 0x{:08x}", path, magic, expected));
  }
}

void write_be32(std::ofstream& out, std::uint32_t value) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(value >> 24),
                                  static_cast<unsigned char>(value >> 16),
                                  static_cast<unsigned char>(value >> 8),
                                  static_cast<unsigned char>(value)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

}  // namespace

Eigen::MatrixXd load_idx_images(const std::string& path, Eigen::Index max_items) {
  const auto bytes = read_file(path);
  check_magic(bytes, kIdxImagesMagic, path);
  const std::uint32_t n = read_be32(bytes, 4, path);
  const std::uint32_t rows = read_be32(bytes, 8, path);
  const std::uint32_t cols = read_be32(bytes, 12, path);
  Eigen::Index count = static_cast<Eigen::Index>(n);
  if (max_items >= 0) count = std::min<Eigen::Index>(count, max_items);
  const std::size_t pixels_per = static_cast<std::size_t>(rows) * cols;
  const std::size_t need = 16 + pixels_per * static_cast<std::size_t>(count);
  if (bytes.size() < need) {
    throw FormatError(fmt::format("'{}' truncated: need {} bytes, found {} (payload ends at offset {})",
                                  path, need, bytes.size(), bytes.size()));
  }
  Eigen::MatrixXd images(count, static_cast<Eigen::Index>(pixels_per));
  for (Eigen::Index i = 0; i < count; ++i) {
    const std::size_t base = 16 + pixels_per * static_cast<std::size_t>(i);
    for (std::size_t p = 0; p < pixels_per; ++p) {
      images(i, static_cast<Eigen::Index>(p)) = bytes[base + p] / 255.0;
    }
  }
  return images;
}

std::vector<int> load_idx_labels(const std::string& path, Eigen::Index max_items) {
  const auto bytes = read_file(path);
  check_magic(bytes, kIdxLabelsMagic, path);
  const std::uint32_t n = read_be32(bytes, 4, path);
  Eigen::Index count = static_cast<Eigen::Index>(n);
  if (max_items >= 0) count = std::min<Eigen::Index>(count, max_items);
  const std::size_t need = 8 + static_cast<std::size_t>(count);
  if (bytes.size() < need) {
    throw FormatError(fmt::format("'{}' truncated: need {} bytes, found {} (payload ends at offset {})",
                                  path, need, bytes.size(), bytes.size()));
  }
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = bytes[8 + i];
  return labels;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 Eigen::Index max_items, double train_fraction) {
  Dataset data;
  data.features = load_idx_images(images_path, max_items);
  data.labels = load_idx_labels(labels_path, max_items);
  if (static_cast<Eigen::Index>(data.labels.size()) != data.features.rows()) {
    throw FormatError(fmt::format("'{}' has {} images but '{}' has {} labels",
                                  images_path, data.features.rows(), labels_path,
                                  data.labels.size()));
  }
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ContractViolation("train_fraction must lie in (0, 1]");
  }
  data.train_count = static_cast<Eigen::Index>(
      std::llround(train_fraction * static_cast<double>(data.size())));
  return data;
}

void write_idx_images(const std::string& path, const Eigen::MatrixXd& images,
                      int rows, int cols) {
  if (static_cast<Eigen::Index>(rows) * cols != images.cols()) {
    throw ContractViolation("rows * cols must equal the image width");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot write idx file '{}'", path));
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.rows()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < images.rows(); ++i) {
    for (Eigen::Index j = 0; j < images.cols(); ++j) {
      const double v = images(i, j) * 255.0;
      if (v < -0.5 || v > 255.5) throw ContractViolation("pixel outside [0, 1]");
      const auto byte = static_cast<unsigned char>(std::lround(v));
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot write idx file '{}'", path));
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (const int label : labels) {
    if (label < 0 || label > 255) throw ContractViolation("label outside u8 range");
    const auto byte = static_cast<unsigned char>(label);
    out.write(reinterpret_cast<const char*>(&byte), 1);
  }
}

}  // namespace dpsharp

// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/metrics_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <system_error>

#include <fmt/format.h>

namespace dpsharp {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string trimmed(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

}  // namespace

double parse_double_strict(const std::string& text, const std::string& what) {
  const std::string t = trimmed(text);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(fmt::format("invalid number '{}' for {}", text, what));
  }
  return value;
}

std::int64_t parse_int_strict(const std::string& text, const std::string& what) {
  const std::string t = trimmed(text);
  std::int64_t value = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(fmt::format("invalid integer '{}' for {}", text, what));
  }
  return value;
}

namespace {

void rename_into_place(const std::string& tmp, const std::string& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw FormatError(fmt::format("cannot rename '{}' to '{}': {}", tmp, path, ec.message()));
  }
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write '{}'", tmp));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw FormatError(fmt::format("short write to '{}'", tmp));
  }
  rename_into_place(tmp, path);
}

void write_weights(const std::string& path, const ParamVector& w) {
  static_assert(std::endian::native == std::endian::little,
                "weights writer assumes a little-endian host");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write '{}'", tmp));
    const auto count = static_cast<std::uint64_t>(w.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(w.data()),
              static_cast<std::streamsize>(sizeof(double) * w.size()));
    if (!out) throw FormatError(fmt::format("short write to '{}'", tmp));
  }
  rename_into_place(tmp, path);
}

ParamVector read_weights(const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "weights reader assumes a little-endian host");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open weights file '{}'", path));
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in) throw FormatError(fmt::format("'{}' truncated: need 8 bytes at offset 0", path));
  if (count > (1ull << 32)) {
    throw FormatError(fmt::format("'{}' claims implausible length {}", path, count));
  }
  ParamVector w(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(w.data()),
          static_cast<std::streamsize>(sizeof(double) * count));
  if (!in) {
    throw FormatError(fmt::format("'{}' truncated: need {} bytes at offset 8", path,
                                  sizeof(double) * count));
  }
  return w;
}

const char* MetricsWriter::header() {
  return "step,epoch,train_loss,test_loss,test_acc,eps_spent,delta_spent,"
         "grad_norm_mean,clip_fraction,ascent_cosine,noise_gap,est_sharpness";
}

MetricsWriter::MetricsWriter(std::string path)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp"), out_(tmp_path_, std::ios::binary | std::ios::trunc) {
  if (!out_) throw FormatError(fmt::format("cannot write '{}'", tmp_path_));
  out_ << header() << '\n';
}

MetricsWriter::~MetricsWriter() {
  if (!finalized_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_path_, ec);
  }
}

namespace {

void append_field(std::string& line, const std::optional<double>& value) {
  line.push_back(',');
  if (value.has_value() && std::isfinite(*value)) line += format_double(*value);
}

}  // namespace

void MetricsWriter::write_row(const MetricsRow& row) {
  std::string line = fmt::format("{},{}", row.step, row.epoch);
  append_field(line, row.train_loss);
  append_field(line, row.test_loss);
  append_field(line, row.test_acc);
  append_field(line, row.eps_spent);
  append_field(line, row.delta_spent);
  append_field(line, row.grad_norm_mean);
  append_field(line, row.clip_fraction);
  append_field(line, row.ascent_cosine);
  append_field(line, row.noise_gap);
  append_field(line, row.est_sharpness);
  line.push_back('\n');
  out_ << line;
  if (!out_) throw FormatError(fmt::format("short write to '{}'", tmp_path_));
}

void MetricsWriter::finalize() {
  if (finalized_) return;
  out_.flush();
  out_.close();
  rename_into_place(tmp_path_, path_);
  finalized_ = true;
}

}  // namespace dpsharp

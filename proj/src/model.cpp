// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/model.hpp"

#include <cmath>
#include <limits>

namespace dpsharp {

namespace {

// Stable log-sum-exp and softmax over a score vector.
double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd p = (z.array() - m).exp();
  p /= p.sum();
  return p;
}

}  // namespace

void Model::check_batch(const ParamVector& w, const ExampleBatch& batch) const {
  if (w.size() != parameter_count()) {
    throw ContractViolation("parameter vector length " + std::to_string(w.size()) +
                            " does not match model parameter count " +
                            std::to_string(parameter_count()));
  }
  if (batch.size() < 1) {
    throw ContractViolation("batch must contain at least one example");
  }
  if (batch.features.cols() != feature_dim()) {
    throw ContractViolation("batch feature dim " + std::to_string(batch.features.cols()) +
                            " does not match model feature dim " +
                            std::to_string(feature_dim()));
  }
  if (static_cast<Eigen::Index>(batch.labels.size()) != batch.size()) {
    throw ContractViolation("label count does not match batch size");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= num_classes()) {
      throw ContractViolation("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_classes()) + ")");
    }
  }
}

double Model::accuracy(const ParamVector& w, const ExampleBatch& batch) const {
  const std::vector<int> pred = predict(w, batch);
  if (pred.empty()) return std::numeric_limits<double>::quiet_NaN();
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    if (pred[static_cast<std::size_t>(i)] == batch.labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

std::vector<int> Model::predict(const ParamVector&, const ExampleBatch&) const {
  return {};
}

double mean_loss(const Model& model, const ParamVector& w, const ExampleBatch& batch) {
  Eigen::VectorXd losses;
  model.loss_per_example(w, batch, losses);
  // Fixed sequential order keeps the result thread-count independent.
  double acc = 0.0;
  for (Eigen::Index i = 0; i < losses.size(); ++i) acc += losses[i];
  return acc / static_cast<double>(losses.size());
}

ParamVector mean_grad(const Model& model, const ParamVector& w, const ExampleBatch& batch) {
  PerExampleGrads rows;
  model.grad_per_example(w, batch, rows);
  ParamVector g = ParamVector::Zero(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) g += rows.row(i);
  return g / static_cast<double>(rows.rows());
}

HvpOperator::HvpOperator(const Model& model, ParamVector w, const ExampleBatch& batch,
                         double step)
    : model_(model), w_(std::move(w)), batch_(batch), h_(step) {
  if (h_ == 0.0) {
    h_ = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + w_.norm());
  }
  if (h_ <= 0.0) {
    throw ConfigError("finite-difference step must be positive");
  }
}

ParamVector HvpOperator::apply(const ParamVector& v) const {
  const double norm = v.norm();
  if (norm == 0.0) {
    throw ContractViolation("Hessian-vector product direction must be nonzero");
  }
  const ParamVector u = v / norm;
  const ParamVector gp = mean_grad(model_, w_ + h_ * u, batch_);
  const ParamVector gm = mean_grad(model_, w_ - h_ * u, batch_);
  return (gp - gm) * (norm / (2.0 * h_));
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticModel::LogisticModel(int feature_dim, int num_classes) : d_(feature_dim), k_(num_classes) {
  if (d_ < 1 || k_ < 2) {
    throw ConfigError("logistic model needs feature_dim >= 1 and num_classes >= 2");
  }
}

Eigen::Index LogisticModel::parameter_count() const {
  return static_cast<Eigen::Index>(k_) * d_ + k_;
}

std::vector<ParamBlock> LogisticModel::parameter_blocks() const {
  return {{0, static_cast<Eigen::Index>(k_) * d_, "W", d_},
          {static_cast<Eigen::Index>(k_) * d_, k_, "b", 0}};
}

namespace {

// Row-major view of the packed weight matrix.
inline Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
matrix_view(const ParamVector& w, Eigen::Index offset, int rows, int cols) {
  return {w.data() + offset, rows, cols};
}

}  // namespace

void LogisticModel::loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                                     Eigen::VectorXd& out) const {
  check_batch(w, batch);
  const auto W = matrix_view(w, 0, k_, d_);
  const auto b = w.segment(static_cast<Eigen::Index>(k_) * d_, k_);
  out.resize(batch.size());
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd z = W * batch.features.row(i).transpose() + b;
    out[i] = log_sum_exp(z) - z[batch.labels[static_cast<std::size_t>(i)]];
  }
}

void LogisticModel::grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                                     PerExampleGrads& out) const {
  check_batch(w, batch);
  const auto W = matrix_view(w, 0, k_, d_);
  const auto b = w.segment(static_cast<Eigen::Index>(k_) * d_, k_);
  out.resize(batch.size(), parameter_count());
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd x = batch.features.row(i).transpose();
    Eigen::VectorXd p = softmax(W * x + b);
    p[batch.labels[static_cast<std::size_t>(i)]] -= 1.0;  // dL/dz = p - onehot
    // dL/dW = (p - onehot) x^T, packed row-major; dL/db = p - onehot.
    for (int c = 0; c < k_; ++c) {
      out.block(i, static_cast<Eigen::Index>(c) * d_, 1, d_) = p[c] * x.transpose();
    }
    out.block(i, static_cast<Eigen::Index>(k_) * d_, 1, k_) = p.transpose();
  }
  check_finite(out.reshaped(), "per-example gradient");
}

std::vector<int> LogisticModel::predict(const ParamVector& w, const ExampleBatch& batch) const {
  check_batch(w, batch);
  const auto W = matrix_view(w, 0, k_, d_);
  const auto b = w.segment(static_cast<Eigen::Index>(k_) * d_, k_);
  std::vector<int> pred(static_cast<std::size_t>(batch.size()));
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    Eigen::Index best;
    (W * batch.features.row(i).transpose() + b).maxCoeff(&best);
    pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return pred;
}

// ---------------------------------------------------------------------------
// One-hidden-layer tanh MLP

MlpModel::MlpModel(int feature_dim, int hidden_width, int num_classes)
    : d_(feature_dim), h_(hidden_width), k_(num_classes) {
  if (d_ < 1 || h_ < 1 || k_ < 2) {
    throw ConfigError("mlp model needs feature_dim, hidden_width >= 1 and num_classes >= 2");
  }
}

Eigen::Index MlpModel::parameter_count() const {
  return static_cast<Eigen::Index>(h_) * d_ + h_ + static_cast<Eigen::Index>(k_) * h_ + k_;
}

std::vector<ParamBlock> MlpModel::parameter_blocks() const {
  const Eigen::Index w1 = static_cast<Eigen::Index>(h_) * d_;
  const Eigen::Index w2 = static_cast<Eigen::Index>(k_) * h_;
  return {{0, w1, "W1", d_},
          {w1, h_, "b1", 0},
          {w1 + h_, w2, "W2", h_},
          {w1 + h_ + w2, k_, "b2", 0}};
}

void MlpModel::loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                                Eigen::VectorXd& out) const {
  check_batch(w, batch);
  const Eigen::Index o1 = static_cast<Eigen::Index>(h_) * d_;
  const Eigen::Index o2 = o1 + h_;
  const Eigen::Index o3 = o2 + static_cast<Eigen::Index>(k_) * h_;
  const auto W1 = matrix_view(w, 0, h_, d_);
  const auto b1 = w.segment(o1, h_);
  const auto W2 = matrix_view(w, o2, k_, h_);
  const auto b2 = w.segment(o3, k_);
  out.resize(batch.size());
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd a = (W1 * batch.features.row(i).transpose() + b1).array().tanh();
    const Eigen::VectorXd z = W2 * a + b2;
    out[i] = log_sum_exp(z) - z[batch.labels[static_cast<std::size_t>(i)]];
  }
}

void MlpModel::grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                                PerExampleGrads& out) const {
  check_batch(w, batch);
  const Eigen::Index o1 = static_cast<Eigen::Index>(h_) * d_;
  const Eigen::Index o2 = o1 + h_;
  const Eigen::Index o3 = o2 + static_cast<Eigen::Index>(k_) * h_;
  const auto W1 = matrix_view(w, 0, h_, d_);
  const auto b1 = w.segment(o1, h_);
  const auto W2 = matrix_view(w, o2, k_, h_);
  const auto b2 = w.segment(o3, k_);
  out.resize(batch.size(), parameter_count());
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd x = batch.features.row(i).transpose();
    const Eigen::VectorXd a = (W1 * x + b1).array().tanh();
    Eigen::VectorXd dz = softmax(W2 * a + b2);
    dz[batch.labels[static_cast<std::size_t>(i)]] -= 1.0;
    // Backprop through the linear head and the tanh layer.
    const Eigen::VectorXd da = W2.transpose() * dz;
    const Eigen::VectorXd dpre = da.array() * (1.0 - a.array().square());
    for (int r = 0; r < h_; ++r) {
      out.block(i, static_cast<Eigen::Index>(r) * d_, 1, d_) = dpre[r] * x.transpose();
    }
    out.block(i, o1, 1, h_) = dpre.transpose();
    for (int c = 0; c < k_; ++c) {
      out.block(i, o2 + static_cast<Eigen::Index>(c) * h_, 1, h_) = dz[c] * a.transpose();
    }
    out.block(i, o3, 1, k_) = dz.transpose();
  }
  check_finite(out.reshaped(), "per-example gradient");
}

std::vector<int> MlpModel::predict(const ParamVector& w, const ExampleBatch& batch) const {
  check_batch(w, batch);
  const Eigen::Index o1 = static_cast<Eigen::Index>(h_) * d_;
  const Eigen::Index o2 = o1 + h_;
  const Eigen::Index o3 = o2 + static_cast<Eigen::Index>(k_) * h_;
  const auto W1 = matrix_view(w, 0, h_, d_);
  const auto b1 = w.segment(o1, h_);
  const auto W2 = matrix_view(w, o2, k_, h_);
  const auto b2 = w.segment(o3, k_);
  std::vector<int> pred(static_cast<std::size_t>(batch.size()));
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd a = (W1 * batch.features.row(i).transpose() + b1).array().tanh();
    Eigen::Index best;
    (W2 * a + b2).maxCoeff(&best);
    pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return pred;
}

ParamVector init_params(const Model& model, std::uint64_t seed) {
  RngStream stream(seed, StreamPurpose::kInit, 1);
  ParamVector w = ParamVector::Zero(model.parameter_count());
  for (const ParamBlock& block : model.parameter_blocks()) {
    if (block.fan_in == 0) continue;  // biases stay zero
    const double scale = 1.0 / std::sqrt(static_cast<double>(block.fan_in));
    for (Eigen::Index j = 0; j < block.size; ++j) {
      w[block.offset + j] = scale * stream.next_gaussian();
    }
  }
  return w;
}

void check_finite(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(std::string(what) + " has non-finite entry at index " +
                         std::to_string(i));
    }
  }
}

}  // namespace dpsharp

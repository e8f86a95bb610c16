// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form models for optimizer and analysis tests: a diagonal quadratic
// whose gradient and Hessian are known exactly, a constant-slope loss for
// momentum recursions, and a call-counting wrapper for query accounting.

#pragma once

#include <utility>
#include <vector>

#include "dpsharp/model.hpp"

namespace dpsharp::test {

// Per-example loss 0.5 (w - x_i)' diag(a) (w - x_i) with x_i the feature
// row, so grad_i = diag(a)(w - x_i) and the Hessian is diag(a) everywhere.
class DiagQuadraticModel : public Model {
 public:
  explicit DiagQuadraticModel(Eigen::VectorXd curvature)
      : a_(std::move(curvature)) {}

  Eigen::Index parameter_count() const override { return a_.size(); }
  int num_classes() const override { return 2; }
  int feature_dim() const override { return static_cast<int>(a_.size()); }
  std::vector<ParamBlock> parameter_blocks() const override {
    return {{0, a_.size(), "w", 0}};
  }

  void loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                        Eigen::VectorXd& out) const override {
    check_batch(w, batch);
    out.resize(batch.size());
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const Eigen::VectorXd diff = w - batch.features.row(i).transpose();
      out[i] = 0.5 * diff.cwiseProduct(a_).dot(diff);
    }
  }

  void grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                        PerExampleGrads& out) const override {
    check_batch(w, batch);
    out.resize(batch.size(), a_.size());
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      out.row(i) =
          (w - batch.features.row(i).transpose()).cwiseProduct(a_).transpose();
    }
  }

  const Eigen::VectorXd& curvature() const { return a_; }

 private:
  Eigen::VectorXd a_;
};

// Every example has loss slope' w: the gradient is the fixed slope, which
// makes momentum and Adam recursions checkable in closed form.
class ConstantSlopeModel : public Model {
 public:
  explicit ConstantSlopeModel(Eigen::VectorXd slope) : s_(std::move(slope)) {}

  Eigen::Index parameter_count() const override { return s_.size(); }
  int num_classes() const override { return 2; }
  int feature_dim() const override { return 1; }
  std::vector<ParamBlock> parameter_blocks() const override {
    return {{0, s_.size(), "w", 0}};
  }

  void loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                        Eigen::VectorXd& out) const override {
    check_batch(w, batch);
    out = Eigen::VectorXd::Constant(batch.size(), s_.dot(w));
  }

  void grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                        PerExampleGrads& out) const override {
    check_batch(w, batch);
    out.resize(batch.size(), s_.size());
    for (Eigen::Index i = 0; i < batch.size(); ++i) out.row(i) = s_.transpose();
  }

 private:
  Eigen::VectorXd s_;
};

// Forwards to the wrapped model and counts data-touching evaluations; the
// per-step gradient query count is what separates the one- and two-query
// optimizers.
class CountingModel : public Model {
 public:
  explicit CountingModel(const Model& inner) : inner_(inner) {}

  Eigen::Index parameter_count() const override { return inner_.parameter_count(); }
  int num_classes() const override { return inner_.num_classes(); }
  int feature_dim() const override { return inner_.feature_dim(); }
  std::vector<ParamBlock> parameter_blocks() const override {
    return inner_.parameter_blocks();
  }

  void loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                        Eigen::VectorXd& out) const override {
    ++loss_calls_;
    inner_.loss_per_example(w, batch, out);
  }

  void grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                        PerExampleGrads& out) const override {
    ++grad_calls_;
    inner_.grad_per_example(w, batch, out);
  }

  long grad_calls() const { return grad_calls_; }
  long loss_calls() const { return loss_calls_; }
  void reset() const {
    grad_calls_ = 0;
    loss_calls_ = 0;
  }

 private:
  const Model& inner_;
  mutable long grad_calls_ = 0;
  mutable long loss_calls_ = 0;
};

// Batch whose rows are the given features; labels default to zero, which is
// valid for every test model here.
inline ExampleBatch make_batch(const Eigen::MatrixXd& features) {
  ExampleBatch batch;
  batch.features = features;
  batch.labels.assign(static_cast<std::size_t>(features.rows()), 0);
  batch.indices.resize(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    batch.indices[static_cast<std::size_t>(i)] = i;
  }
  return batch;
}

}  // namespace dpsharp::test

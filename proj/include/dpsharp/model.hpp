// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Model interface and the two classifier models (multinomial logistic
// regression, one-hidden-layer tanh MLP). Parameters live in a single flat
// f64 vector; gradients are hand-coded reverse mode and are checked against
// central finite differences in the tests. Per-example quantities are first
// class: the privacy mechanism needs the m x P matrix of individual
// gradients, not just their mean.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpsharp/common.hpp"
#include "dpsharp/rng.hpp"

namespace dpsharp {

// Flat parameter vector w of length P; the sole optimization state.
using ParamVector = Eigen::VectorXd;

// m x P matrix; row i is the gradient of example i's loss at w.
using PerExampleGrads = Eigen::MatrixXd;

// A minibatch view: features, integer class labels, and the original dataset
// positions of each row (unique within a batch).
struct ExampleBatch {
  Eigen::MatrixXd features;       // m x d
  std::vector<int> labels;        // size m, in [0, num_classes)
  std::vector<std::int64_t> indices;  // size m, original positions

  Eigen::Index size() const { return features.rows(); }
};

// Contiguous slice of the flat parameter vector that forms one logical
// layer tensor; used for layer-aware direction normalization and init.
// fan_in > 0 marks a weight matrix (init N(0, 1/sqrt(fan_in))); fan_in == 0
// marks a bias (init zero).
struct ParamBlock {
  Eigen::Index offset;
  Eigen::Index size;
  std::string name;
  Eigen::Index fan_in;
};

class Model {
 public:
  virtual ~Model() = default;

  virtual Eigen::Index parameter_count() const = 0;
  virtual int num_classes() const = 0;
  virtual int feature_dim() const = 0;
  virtual std::vector<ParamBlock> parameter_blocks() const = 0;

  // out[i] = loss of example i at w. out is resized to the batch size.
  virtual void loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                                Eigen::VectorXd& out) const = 0;

  // out.row(i) = gradient of example i's loss at w.
  virtual void grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                                PerExampleGrads& out) const = 0;

  // Classification accuracy on the batch; NaN for models without classes.
  virtual double accuracy(const ParamVector& w, const ExampleBatch& batch) const;

  // argmax class per example; empty for models without classes.
  virtual std::vector<int> predict(const ParamVector& w,
                                   const ExampleBatch& batch) const;

 protected:
  void check_batch(const ParamVector& w, const ExampleBatch& batch) const;
};

// Mean loss over the batch. Summation order is fixed (sequential over rows)
// so results are identical for any thread count.
double mean_loss(const Model& model, const ParamVector& w, const ExampleBatch& batch);

// Gradient of the mean loss: the row mean of grad_per_example, computed in a
// fixed order. Equals d(mean_loss)/dw by linearity.
ParamVector mean_grad(const Model& model, const ParamVector& w, const ExampleBatch& batch);

// Hessian-vector products through central differences of the mean gradient:
//   H v ~ (g(w + h u) - g(w - h u)) * ||v|| / (2 h),  u = v / ||v||.
// The default step h = sqrt(machine eps) * (1 + ||w||).
class HvpOperator {
 public:
  HvpOperator(const Model& model, ParamVector w, const ExampleBatch& batch,
              double step = 0.0);

  ParamVector apply(const ParamVector& v) const;
  Eigen::Index dim() const { return w_.size(); }
  double step() const { return h_; }
  const ParamVector& point() const { return w_; }

 private:
  const Model& model_;
  ParamVector w_;
  const ExampleBatch& batch_;
  double h_;
};

// Softmax cross-entropy linear classifier. Packing: W (k x d, row-major),
// then bias (k).
class LogisticModel : public Model {
 public:
  LogisticModel(int feature_dim, int num_classes);

  Eigen::Index parameter_count() const override;
  int num_classes() const override { return k_; }
  int feature_dim() const override { return d_; }
  std::vector<ParamBlock> parameter_blocks() const override;
  void loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                        Eigen::VectorXd& out) const override;
  void grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                        PerExampleGrads& out) const override;
  std::vector<int> predict(const ParamVector& w,
                           const ExampleBatch& batch) const override;

 private:
  int d_, k_;
};

// One-hidden-layer tanh network with softmax cross-entropy. Packing:
// W1 (h x d, row-major), b1 (h), W2 (k x h, row-major), b2 (k).
class MlpModel : public Model {
 public:
  MlpModel(int feature_dim, int hidden_width, int num_classes);

  Eigen::Index parameter_count() const override;
  int num_classes() const override { return k_; }
  int feature_dim() const override { return d_; }
  int hidden_width() const { return h_; }
  std::vector<ParamBlock> parameter_blocks() const override;
  void loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                        Eigen::VectorXd& out) const override;
  void grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                        PerExampleGrads& out) const override;
  std::vector<int> predict(const ParamVector& w,
                           const ExampleBatch& batch) const override;

 private:
  int d_, h_, k_;
};

// Weight init: N(0, 1/sqrt(fan_in)) per weight matrix, biases zero, drawn
// from the (seed, init) stream in packing order.
ParamVector init_params(const Model& model, std::uint64_t seed);

// Throws NumericError naming the first non-finite entry, if any.
void check_finite(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what);

}  // namespace dpsharp

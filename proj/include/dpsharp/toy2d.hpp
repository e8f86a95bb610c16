// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic 2D mixture landscape with one flat and one sharp basin:
//
//   L(w) = (F1(w) phi1 + F2(w) phi2) / (phi1 + phi2),  phi_i = exp(-||w - c_i||)
//   F1 = sigmoid(r1/5 - 5/r1)            at r1 = ||w - c1||
//   F2 = sigmoid((5 r)/5 - 5/(5 r))      at r = r2 (corrected) or r = r1 (as printed)
//
// with centers c1 = (2.5, 2.5) (flat) and c2 = (7.5, 7.5) (sharp). The
// singular 1/r terms are evaluated with an additive 1e-8 guard. The printed
// form of F2 reuses r1 in both places, which makes the loss at c2 nonzero and
// destroys the flat/sharp curvature contrast, so the corrected form (F2
// driven by r2) is the default; the printed form stays available for
// comparison. Gradient and Hessian are closed-form; both centers are cone
// points (the radial terms are nonsmooth there), so curvature queries are
// meaningful only away from the exact centers.

#pragma once

#include <Eigen/Dense>

#include "dpsharp/model.hpp"

namespace dpsharp {

enum class Toy2dVariant { kCorrected, kAsPrinted };

class Toy2dModel : public Model {
 public:
  static constexpr double kEpsGuard = 1e-8;

  explicit Toy2dModel(Toy2dVariant variant = Toy2dVariant::kCorrected);

  static Eigen::Vector2d flat_center() { return {2.5, 2.5}; }
  static Eigen::Vector2d sharp_center() { return {7.5, 7.5}; }

  double loss(const Eigen::Vector2d& w) const;
  Eigen::Vector2d grad(const Eigen::Vector2d& w) const;
  Eigen::Matrix2d hessian(const Eigen::Vector2d& w) const;

  // Largest eigenvalue of the 2x2 Hessian, closed form.
  double lambda_max(const Eigen::Vector2d& w) const;

  Toy2dVariant variant() const { return variant_; }

  // Model interface: the landscape is data-free, so every "example" sees the
  // same loss; feature values are ignored and the single valid label is 0.
  Eigen::Index parameter_count() const override { return 2; }
  int num_classes() const override { return 1; }
  int feature_dim() const override { return 1; }
  std::vector<ParamBlock> parameter_blocks() const override;
  void loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                        Eigen::VectorXd& out) const override;
  void grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                        PerExampleGrads& out) const override;

 private:
  Toy2dVariant variant_;
};

// A minimal single-example batch for data-free landscape models.
ExampleBatch toy2d_batch();

// Free-function forms of the landscape evaluation.
double toy2d_loss(const Eigen::Vector2d& w,
                  Toy2dVariant variant = Toy2dVariant::kCorrected);
Eigen::Vector2d toy2d_grad(const Eigen::Vector2d& w,
                           Toy2dVariant variant = Toy2dVariant::kCorrected);

}  // namespace dpsharp

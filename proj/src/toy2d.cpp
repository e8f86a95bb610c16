// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/toy2d.hpp"

#include <cmath>

namespace dpsharp {

namespace {

constexpr double kGuard = Toy2dModel::kEpsGuard;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Sigmoid arguments A(r) and their first two derivatives in r.
// Flat basin: A1(r) = r/5 - 5/(r + g).
double a1(double r) { return r / 5.0 - 5.0 / (r + kGuard); }
double a1p(double r) { return 0.2 + 5.0 / ((r + kGuard) * (r + kGuard)); }
double a1pp(double r) { const double t = r + kGuard; return -10.0 / (t * t * t); }
// Sharp basin: A2(r) = (5 r)/5 - 5/(5 r + g), kept in the printed shape.
double a2(double r) { return r - 5.0 / (5.0 * r + kGuard); }
double a2p(double r) { const double t = 5.0 * r + kGuard; return 1.0 + 25.0 / (t * t); }
double a2pp(double r) { const double t = 5.0 * r + kGuard; return -250.0 / (t * t * t); }

struct SigmoidTerm {
  double f, fp, fpp;  // F(A(r)) and radial derivatives
};

SigmoidTerm eval_term(double r, bool sharp) {
  const double arg = sharp ? a2(r) : a1(r);
  const double dp = sharp ? a2p(r) : a1p(r);
  const double dpp = sharp ? a2pp(r) : a1pp(r);
  const double f = sigmoid(arg);
  const double s = f * (1.0 - f);  // sigmoid'
  return {f, s * dp, s * (1.0 - 2.0 * f) * dp * dp + s * dpp};
}

// Landscape value plus first and second partials with respect to (r1, r2).
struct RadialExpansion {
  double value;
  double l1, l2;          // dL/dr1, dL/dr2
  double l11, l12, l22;   // second partials
};

RadialExpansion radial(double r1, double r2, Toy2dVariant variant) {
  const double phi1 = std::exp(-r1);
  const double phi2 = std::exp(-r2);
  const SigmoidTerm f1 = eval_term(r1, /*sharp=*/false);
  const SigmoidTerm f2 =
      eval_term(variant == Toy2dVariant::kCorrected ? r2 : r1, /*sharp=*/true);

  const double den = phi1 + phi2;
  const double num = f1.f * phi1 + f2.f * phi2;

  // Partials of num and den; d(phi_i)/dr_i = -phi_i, cross terms vanish.
  double n1 = f1.fp * phi1 - f1.f * phi1;
  double n2 = -f2.f * phi2;
  double n11 = f1.fpp * phi1 - 2.0 * f1.fp * phi1 + f1.f * phi1;
  double n12 = 0.0;
  double n22 = f2.f * phi2;
  if (variant == Toy2dVariant::kCorrected) {
    n2 += f2.fp * phi2;
    n22 += f2.fpp * phi2 - 2.0 * f2.fp * phi2;
  } else {
    // Printed form: F2 is a function of r1, so its derivative lands on r1.
    n1 += f2.fp * phi2;
    n11 += f2.fpp * phi2;
    n12 = -f2.fp * phi2;
  }
  const double d1 = -phi1, d2 = -phi2;
  const double d11 = phi1, d22 = phi2;  // d12 = 0

  const double inv = 1.0 / den;
  const double inv2 = inv * inv;
  RadialExpansion out;
  out.value = num * inv;
  out.l1 = (n1 * den - num * d1) * inv2;
  out.l2 = (n2 * den - num * d2) * inv2;
  // d/db [ na/den - num*da/den^2 ]
  out.l11 = n11 * inv - (2.0 * n1 * d1 + num * d11) * inv2 + 2.0 * num * d1 * d1 * inv * inv2;
  out.l22 = n22 * inv - (2.0 * n2 * d2 + num * d22) * inv2 + 2.0 * num * d2 * d2 * inv * inv2;
  out.l12 = n12 * inv - (n1 * d2 + n2 * d1) * inv2 + 2.0 * num * d1 * d2 * inv * inv2;
  return out;
}

}  // namespace

Toy2dModel::Toy2dModel(Toy2dVariant variant) : variant_(variant) {}

double Toy2dModel::loss(const Eigen::Vector2d& w) const {
  const double r1 = (w - flat_center()).norm();
  const double r2 = (w - sharp_center()).norm();
  return radial(r1, r2, variant_).value;
}

Eigen::Vector2d Toy2dModel::grad(const Eigen::Vector2d& w) const {
  const Eigen::Vector2d dvec1 = w - flat_center();
  const Eigen::Vector2d dvec2 = w - sharp_center();
  const double r1 = dvec1.norm();
  const double r2 = dvec2.norm();
  const RadialExpansion e = radial(r1, r2, variant_);
  // Chain rule through r_i = ||w - c_i||; at a center that term's direction
  // is the zero vector, so the guarded division leaves it at zero.
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  if (r1 > 0.0) g += e.l1 * dvec1 / std::max(r1, kGuard);
  if (r2 > 0.0) g += e.l2 * dvec2 / std::max(r2, kGuard);
  return g;
}

Eigen::Matrix2d Toy2dModel::hessian(const Eigen::Vector2d& w) const {
  const Eigen::Vector2d dvec1 = w - flat_center();
  const Eigen::Vector2d dvec2 = w - sharp_center();
  const double r1 = std::max(dvec1.norm(), kGuard);
  const double r2 = std::max(dvec2.norm(), kGuard);
  const RadialExpansion e = radial(dvec1.norm(), dvec2.norm(), variant_);
  const Eigen::Vector2d u1 = dvec1 / r1;
  const Eigen::Vector2d u2 = dvec2 / r2;
  const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  // H = sum_a dL/dra * Hess(ra) + sum_ab d2L/dradrb * grad(ra) grad(rb)^T,
  // Hess(r) = (I - u u^T)/r for the Euclidean norm.
  Eigen::Matrix2d h = e.l1 * (id - u1 * u1.transpose()) / r1 +
                      e.l2 * (id - u2 * u2.transpose()) / r2 +
                      e.l11 * (u1 * u1.transpose()) + e.l22 * (u2 * u2.transpose()) +
                      e.l12 * (u1 * u2.transpose() + u2 * u1.transpose());
  return 0.5 * (h + h.transpose());
}

double Toy2dModel::lambda_max(const Eigen::Vector2d& w) const {
  const Eigen::Matrix2d h = hessian(w);
  const double half_trace = 0.5 * (h(0, 0) + h(1, 1));
  const double half_gap = 0.5 * (h(0, 0) - h(1, 1));
  return half_trace + std::sqrt(half_gap * half_gap + h(0, 1) * h(0, 1));
}

std::vector<ParamBlock> Toy2dModel::parameter_blocks() const {
  return {{0, 2, "w", 0}};
}

void Toy2dModel::loss_per_example(const ParamVector& w, const ExampleBatch& batch,
                                  Eigen::VectorXd& out) const {
  check_batch(w, batch);
  const double value = loss(Eigen::Vector2d(w[0], w[1]));
  out = Eigen::VectorXd::Constant(batch.size(), value);
}

void Toy2dModel::grad_per_example(const ParamVector& w, const ExampleBatch& batch,
                                  PerExampleGrads& out) const {
  check_batch(w, batch);
  const Eigen::Vector2d g = grad(Eigen::Vector2d(w[0], w[1]));
  out.resize(batch.size(), 2);
  for (Eigen::Index i = 0; i < batch.size(); ++i) out.row(i) = g.transpose();
}

ExampleBatch toy2d_batch() {
  ExampleBatch batch;
  batch.features = Eigen::MatrixXd::Zero(1, 1);
  batch.labels = {0};
  batch.indices = {0};
  return batch;
}

double toy2d_loss(const Eigen::Vector2d& w, Toy2dVariant variant) {
  return Toy2dModel(variant).loss(w);
}

Eigen::Vector2d toy2d_grad(const Eigen::Vector2d& w, Toy2dVariant variant) {
  return Toy2dModel(variant).grad(w);
}

}  // namespace dpsharp

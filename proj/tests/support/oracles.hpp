// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent oracles for the test suite. Everything here recomputes a
// library quantity from scratch (finite differences of the loss, dense
// eigensolves, log-space quadrature) and deliberately shares no code with
// the implementation under test. Dense matrix solvers are allowed in this
// file only.

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "dpsharp/analysis.hpp"
#include "dpsharp/model.hpp"

namespace dpsharp::test {

// Central-difference gradient of the mean loss, coordinate by coordinate.
inline ParamVector fd_gradient(const Model& model, const ParamVector& w,
                               const ExampleBatch& batch) {
  ParamVector g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(w[i]));
    ParamVector wp = w;
    ParamVector wm = w;
    wp[i] += h;
    wm[i] -= h;
    g[i] = (mean_loss(model, wp, batch) - mean_loss(model, wm, batch)) / (2.0 * h);
  }
  return g;
}

// Dense Hessian of the mean loss by four-point second differences of the
// loss alone, so it is independent of both the analytic gradients and the
// operator-product path. Symmetrized.
inline Eigen::MatrixXd fd_hessian(const Model& model, const ParamVector& w,
                                  const ExampleBatch& batch, double h = 5e-4) {
  const Eigen::Index p = w.size();
  Eigen::MatrixXd hess(p, p);
  const auto at = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
    ParamVector x = w;
    x[i] += di;
    x[j] += dj;
    return mean_loss(model, x, batch);
  };
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      const double v = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) +
                        at(i, -h, j, -h)) /
                       (4.0 * h * h);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return hess;
}

// Top-k eigenvalues of a symmetric matrix, descending, via a dense solve.
inline std::vector<double> dense_top_eigs(const Eigen::MatrixXd& a, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  const Eigen::VectorXd all = solver.eigenvalues();  // ascending
  std::vector<double> top;
  for (int i = 0; i < k; ++i) top.push_back(all[all.size() - 1 - i]);
  return top;
}

// Explicit symmetric matrix behind the operator interface.
class MatrixOperator : public LinearOperator {
 public:
  explicit MatrixOperator(Eigen::MatrixXd a) : a_(std::move(a)) {}
  Eigen::Index dim() const override { return a_.rows(); }
  ParamVector apply(const ParamVector& v) const override { return a_ * v; }
  const Eigen::MatrixXd& matrix() const { return a_; }

 private:
  Eigen::MatrixXd a_;
};

// log E_{z ~ N(0, sigma^2)} [ ((1-q) + q e^{(2z-1)/(2 sigma^2)})^alpha ] by
// composite Simpson quadrature carried in log space. This is the moment the
// accountant's series expansions compute; the integration range covers the
// Gaussian mass and the exponential tilt at order alpha.
inline double quadrature_log_a(double q, double sigma, double alpha) {
  const int n = 20001;  // odd, so Simpson applies directly
  const double lo = -40.0 * sigma - 2.0;
  const double hi = 2.0 * alpha * sigma * sigma + 40.0 * sigma + 2.0;
  const double dz = (hi - lo) / (n - 1);
  const double log_norm = -0.5 * std::log(2.0 * M_PI * sigma * sigma);
  std::vector<double> li(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double z = lo + dz * i;
    const double t = (2.0 * z - 1.0) / (2.0 * sigma * sigma);
    // log((1-q) + q e^t), stable for either sign of t.
    const double a = std::log1p(-q);
    const double b = std::log(q) + t;
    const double log_ratio =
        std::max(a, b) + std::log1p(std::exp(std::min(a, b) - std::max(a, b)));
    li[i] = log_norm - z * z / (2.0 * sigma * sigma) + alpha * log_ratio;
    peak = std::max(peak, li[i]);
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double weight = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += weight * std::exp(li[i] - peak);
  }
  return peak + std::log(acc * dz / 3.0);
}

// Direct evaluation of the k-fold composition bound, written independently
// of the library (expm1 instead of exp - 1, different association).
inline void scripted_advanced_composition(std::int64_t k, double eps, double delta,
                                          double delta_prime, double* eps_out,
                                          double* delta_out) {
  const double kd = static_cast<double>(k);
  *eps_out = eps * std::sqrt(2.0 * kd * std::log(1.0 / delta_prime)) +
             eps * std::expm1(eps) * kd;
  *delta_out = delta_prime + kd * delta;
}

// Pearson correlation, restated for CSV-level checks.
inline double pearson_ref(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dpsharp::test

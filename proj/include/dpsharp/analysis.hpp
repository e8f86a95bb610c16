// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Sharpness and landscape diagnostics. Curvature is accessed exclusively
// through operator-vector products (dense Hessians appear only in test
// oracles); the spectral estimates use shifted power iteration so the
// largest *algebraic* eigenvalue is found even when a negative eigenvalue
// dominates in magnitude. All operations here are read-only with respect to
// training state.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpsharp/model.hpp"
#include "dpsharp/rng.hpp"

namespace dpsharp {

// Abstract symmetric operator; the subject of all spectral estimates.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Eigen::Index dim() const = 0;
  virtual ParamVector apply(const ParamVector& v) const = 0;
};

// Adapts HvpOperator to the spectral interface.
class HvpLinearOperator : public LinearOperator {
 public:
  explicit HvpLinearOperator(const HvpOperator& op) : op_(op) {}
  Eigen::Index dim() const override { return op_.dim(); }
  ParamVector apply(const ParamVector& v) const override { return op_.apply(v); }

 private:
  const HvpOperator& op_;
};

struct PowerIterationOptions {
  double tol = 1e-8;
  int max_iters = 1000;
};

struct SpectrumReport {
  std::vector<double> eigenvalues;  // descending
  std::vector<int> iterations;
  std::vector<double> residuals;
  bool converged = true;

  // lambda_1 / lambda_5; requires at least five eigenvalues.
  double top_to_fifth_ratio() const;
};

// Largest algebraic eigenvalue via power iteration on a positively shifted
// copy of the operator. Returns the Rayleigh quotient; if the residual
// ||Av - lambda v|| never falls below tol * |lambda| the result carries the
// last residual and converged = false.
double lambda_max(const LinearOperator& op, const PowerIterationOptions& opts,
                  RngStream& rng, double* residual = nullptr, int* iterations = nullptr,
                  bool* converged = nullptr);

// Top-k eigenvalues by repeated power iteration with orthogonalization
// against the already-converged directions.
SpectrumReport top_k_eigs(const LinearOperator& op, int k,
                          const PowerIterationOptions& opts, RngStream& rng);

// Loss increase at the ascent-perturbed point: l(w + rho * d) - l(w) with d
// the normalized mean gradient, or a caller-supplied direction. A zero
// gradient yields 0 with *moved = false.
double estimated_sharpness(const Model& model, const ParamVector& w, double rho,
                           const ExampleBatch& batch,
                           const ParamVector* direction = nullptr,
                           bool* moved = nullptr);

// One step's noise amplification: how far the descent gradient moved because
// the update used the noisy mean g instead of the clean mean g_bar.
//   gap   = || grad(w - eta g_bar) - grad(w - eta g) ||
//   bound = eta * max ||H||_2 * ||g - g_bar||,
// the segment maximum approximated at 5 evenly spaced points (so the bound
// can be undershot slightly; bound_holds flags violations).
struct NoiseGapResult {
  double gap = 0.0;
  double bound = 0.0;
  double segment_lambda_max = 0.0;
  bool bound_holds = true;
};
NoiseGapResult noise_gap(const Model& model, const ParamVector& w,
                         const ParamVector& g_bar, const ParamVector& g_noisy,
                         double eta, const ExampleBatch& batch);

// Histogram of per-example gradient norms with a decade of fine bins below 1
// (steps of 0.1), unit bins up to 10, and an overflow bin; plus the fraction
// of rows the clip at C would rescale.
struct ClipStats {
  std::vector<double> edges;         // size bins + 1, last edge = +inf
  std::vector<std::int64_t> counts;  // size bins
  double clip_fraction = 0.0;
};
ClipStats clip_stats(const PerExampleGrads& grads, double clip_norm);

// Cosine of two successive ascent directions; 0 (with *valid = false) when
// either is zero.
double ascent_cosine(const ParamVector& prev, const ParamVector& cur,
                     bool* valid = nullptr);

// Loss values on a 2D slice spanned by two random directions. Directions are
// Gaussian draws rescaled so each layer block (or the whole vector, for
// models without layers) matches the weight norm of the block it perturbs.
// steps must be odd and >= 3 so the unperturbed point sits on the grid.
struct LandscapeGrid {
  ParamVector d1, d2;
  std::vector<double> a_values, b_values;
  Eigen::MatrixXd losses;  // losses(i, j) at w + a_i d1 + b_j d2
};
LandscapeGrid surface_grid(const Model& model, const ParamVector& w,
                           const ExampleBatch& batch, double extent, int steps,
                           RngStream& rng);

// Loss/accuracy along the segment w(alpha) = (1 - alpha) w + alpha w'.
struct InterpolationPoint {
  double alpha;
  double train_loss, train_accuracy;
  double test_loss, test_accuracy;
};
std::vector<InterpolationPoint> interpolate(const Model& model, const ParamVector& w,
                                            const ParamVector& w_prime,
                                            std::span<const double> alphas,
                                            const ExampleBatch& train_batch,
                                            const ExampleBatch& test_batch);

// 50 log-spaced bins over the positive part of the observed range; values
// <= 0 are counted separately (desk-scale Hessians can have negative tails).
struct LogHistogram {
  std::vector<double> edges;
  std::vector<std::int64_t> counts;
  std::int64_t nonpositive = 0;
};
LogHistogram log_spaced_histogram(std::span<const double> values, int bins = 50);

}  // namespace dpsharp

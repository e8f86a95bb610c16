// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace dpsharp {

namespace {

ParamVector random_unit(Eigen::Index dim, RngStream& rng) {
  ParamVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.next_gaussian();
  const double norm = v.norm();
  if (norm == 0.0) return ParamVector::Unit(dim, 0);
  return v / norm;
}

void orthogonalize(ParamVector& v, const std::vector<ParamVector>& basis) {
  for (const ParamVector& b : basis) v -= b.dot(v) * b;
}

struct EigResult {
  double value = 0.0;
  ParamVector vector;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Power iteration on op + shift*I restricted to the complement of `deflated`,
// reporting the Rayleigh quotient and residual of the *unshifted* operator.
EigResult shifted_power_iteration(const LinearOperator& op, double shift,
                                  const std::vector<ParamVector>& deflated,
                                  const PowerIterationOptions& opts, RngStream& rng) {
  EigResult out;
  ParamVector v = random_unit(op.dim(), rng);
  orthogonalize(v, deflated);
  if (v.norm() < 1e-12) v = random_unit(op.dim(), rng);  // unlucky start
  v.normalize();
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    const ParamVector av = op.apply(v);
    const double rho = v.dot(av);
    const double residual = (av - rho * v).norm();
    out.value = rho;
    out.vector = v;
    out.residual = residual;
    out.iterations = iter;
    if (residual <= opts.tol * std::max(std::abs(rho), 1e-30)) {
      out.converged = true;
      return out;
    }
    ParamVector next = av + shift * v;
    orthogonalize(next, deflated);
    const double norm = next.norm();
    if (norm < 1e-300) {
      // Operator annihilates the complement: eigenvalue -shift exactly, and
      // any surviving direction is an eigenvector.
      out.value = 0.0;
      out.residual = 0.0;
      out.converged = true;
      return out;
    }
    v = next / norm;
  }
  return out;
}

// Cheap overestimate of the spectral radius, used as the positivity shift.
double spectral_radius_bound(const LinearOperator& op, RngStream& rng) {
  ParamVector v = random_unit(op.dim(), rng);
  double radius = 0.0;
  for (int iter = 0; iter < 30; ++iter) {
    const ParamVector av = op.apply(v);
    const double norm = av.norm();
    radius = std::max(radius, norm);
    if (norm < 1e-300) break;
    v = av / norm;
  }
  return 1.5 * radius + 1e-6;
}

}  // namespace

double SpectrumReport::top_to_fifth_ratio() const {
  if (eigenvalues.size() < 5) {
    throw ContractViolation("eigenvalue ratio needs at least five eigenvalues");
  }
  return eigenvalues[0] / eigenvalues[4];
}

double lambda_max(const LinearOperator& op, const PowerIterationOptions& opts,
                  RngStream& rng, double* residual, int* iterations, bool* converged) {
  if (!(opts.tol > 0.0)) throw ContractViolation("power-iteration tol must be positive");
  const double shift = spectral_radius_bound(op, rng);
  const EigResult r = shifted_power_iteration(op, shift, {}, opts, rng);
  if (residual != nullptr) *residual = r.residual;
  if (iterations != nullptr) *iterations = r.iterations;
  if (converged != nullptr) *converged = r.converged;
  return r.value;
}

SpectrumReport top_k_eigs(const LinearOperator& op, int k,
                          const PowerIterationOptions& opts, RngStream& rng) {
  if (k < 1 || k > op.dim()) {
    throw ContractViolation("eigenvalue count must lie in [1, dim]");
  }
  const double shift = spectral_radius_bound(op, rng);
  SpectrumReport report;
  std::vector<ParamVector> basis;
  for (int i = 0; i < k; ++i) {
    const EigResult r = shifted_power_iteration(op, shift, basis, opts, rng);
    report.eigenvalues.push_back(r.value);
    report.iterations.push_back(r.iterations);
    report.residuals.push_back(r.residual);
    report.converged = report.converged && r.converged;
    if (r.vector.size() == 0) break;
    basis.push_back(r.vector);
  }
  return report;
}

double estimated_sharpness(const Model& model, const ParamVector& w, double rho,
                           const ExampleBatch& batch, const ParamVector* direction,
                           bool* moved) {
  if (!(rho > 0.0)) throw ContractViolation("ascent radius must be positive");
  ParamVector d;
  if (direction != nullptr) {
    d = *direction;
  } else {
    d = mean_grad(model, w, batch);
  }
  const double norm = d.norm();
  if (norm == 0.0) {
    if (moved != nullptr) *moved = false;
    return 0.0;
  }
  if (moved != nullptr) *moved = true;
  const double base = mean_loss(model, w, batch);
  const double up = mean_loss(model, w + (rho / norm) * d, batch);
  return up - base;
}

NoiseGapResult noise_gap(const Model& model, const ParamVector& w,
                         const ParamVector& g_bar, const ParamVector& g_noisy,
                         double eta, const ExampleBatch& batch) {
  NoiseGapResult out;
  const ParamVector p_clean = w - eta * g_bar;
  const ParamVector p_noisy = w - eta * g_noisy;
  out.gap = (mean_grad(model, p_clean, batch) - mean_grad(model, p_noisy, batch)).norm();

  const double mu_norm = (g_noisy - g_bar).norm();
  if (mu_norm == 0.0) {
    out.bound = 0.0;
    out.bound_holds = out.gap <= 1e-12;
    return out;
  }
  // Mean-value bound with the segment curvature sampled at 5 points; the
  // true maximum can fall between samples, hence the explicit holds flag.
  PowerIterationOptions opts;
  opts.tol = 1e-6;
  opts.max_iters = 200;
  RngStream rng(0, StreamPurpose::kAnalysis, 0);
  double max_lambda = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double t = static_cast<double>(i) / 4.0;
    const ParamVector p = (1.0 - t) * p_clean + t * p_noisy;
    const HvpOperator hvp(model, p, batch);
    const HvpLinearOperator lin(hvp);
    max_lambda = std::max(max_lambda, lambda_max(lin, opts, rng));
  }
  out.segment_lambda_max = max_lambda;
  out.bound = eta * max_lambda * mu_norm;
  out.bound_holds = out.gap <= out.bound * (1.0 + 1e-9) + 1e-12;
  return out;
}

ClipStats clip_stats(const PerExampleGrads& grads, double clip_norm) {
  ClipStats stats;
  for (int i = 0; i <= 10; ++i) stats.edges.push_back(0.1 * i);
  for (int i = 2; i <= 10; ++i) stats.edges.push_back(static_cast<double>(i));
  stats.edges.push_back(std::numeric_limits<double>::infinity());
  stats.counts.assign(stats.edges.size() - 1, 0);
  Eigen::Index over = 0;
  for (Eigen::Index i = 0; i < grads.rows(); ++i) {
    const double norm = grads.row(i).norm();
    if (norm > clip_norm) ++over;
    const auto it = std::upper_bound(stats.edges.begin(), stats.edges.end(), norm);
    const auto bin = std::min<std::ptrdiff_t>(it - stats.edges.begin() - 1,
                                              static_cast<std::ptrdiff_t>(stats.counts.size()) - 1);
    stats.counts[static_cast<std::size_t>(std::max<std::ptrdiff_t>(bin, 0))] += 1;
  }
  stats.clip_fraction =
      grads.rows() == 0 ? 0.0 : static_cast<double>(over) / static_cast<double>(grads.rows());
  return stats;
}

double ascent_cosine(const ParamVector& prev, const ParamVector& cur, bool* valid) {
  const double np = prev.norm();
  const double nc = cur.norm();
  if (np == 0.0 || nc == 0.0) {
    if (valid != nullptr) *valid = false;
    return 0.0;
  }
  if (valid != nullptr) *valid = true;
  return std::clamp(prev.dot(cur) / (np * nc), -1.0, 1.0);
}

LandscapeGrid surface_grid(const Model& model, const ParamVector& w,
                           const ExampleBatch& batch, double extent, int steps,
                           RngStream& rng) {
  if (steps < 3 || steps % 2 == 0) {
    throw ContractViolation("grid steps must be odd and at least 3");
  }
  const auto draw_direction = [&]() {
    ParamVector d(w.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = rng.next_gaussian();
    // Match each block's perturbation scale to the weights it perturbs; a
    // zero block (fresh biases) falls back to unit scale.
    for (const ParamBlock& block : model.parameter_blocks()) {
      auto seg = d.segment(block.offset, block.size);
      const double dn = seg.norm();
      if (dn == 0.0) continue;
      const double wn = w.segment(block.offset, block.size).norm();
      seg *= (wn > 0.0 ? wn : 1.0) / dn;
    }
    return d;
  };
  LandscapeGrid grid;
  grid.d1 = draw_direction();
  grid.d2 = draw_direction();
  grid.a_values.resize(static_cast<std::size_t>(steps));
  grid.b_values.resize(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double t = -extent + 2.0 * extent * static_cast<double>(i) / (steps - 1);
    grid.a_values[static_cast<std::size_t>(i)] = t;
    grid.b_values[static_cast<std::size_t>(i)] = t;
  }
  grid.a_values[static_cast<std::size_t>(steps / 2)] = 0.0;  // exact origin
  grid.b_values[static_cast<std::size_t>(steps / 2)] = 0.0;
  grid.losses.resize(steps, steps);
  for (int i = 0; i < steps; ++i) {
    for (int j = 0; j < steps; ++j) {
      const ParamVector point = w + grid.a_values[static_cast<std::size_t>(i)] * grid.d1 +
                                grid.b_values[static_cast<std::size_t>(j)] * grid.d2;
      grid.losses(i, j) = mean_loss(model, point, batch);
    }
  }
  return grid;
}

std::vector<InterpolationPoint> interpolate(const Model& model, const ParamVector& w,
                                            const ParamVector& w_prime,
                                            std::span<const double> alphas,
                                            const ExampleBatch& train_batch,
                                            const ExampleBatch& test_batch) {
  if (w.size() != w_prime.size()) {
    throw ContractViolation("interpolation endpoints must have equal length");
  }
  std::vector<InterpolationPoint> points;
  points.reserve(alphas.size());
  for (const double alpha : alphas) {
    const ParamVector wa = (1.0 - alpha) * w + alpha * w_prime;
    InterpolationPoint p;
    p.alpha = alpha;
    p.train_loss = mean_loss(model, wa, train_batch);
    p.train_accuracy = model.accuracy(wa, train_batch);
    p.test_loss = mean_loss(model, wa, test_batch);
    p.test_accuracy = model.accuracy(wa, test_batch);
    points.push_back(p);
  }
  return points;
}

LogHistogram log_spaced_histogram(std::span<const double> values, int bins) {
  if (bins < 1) throw ContractViolation("histogram needs at least one bin");
  LogHistogram hist;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const double v : values) {
    if (v <= 0.0) {
      ++hist.nonpositive;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > 0.0)) return hist;  // nothing positive to bin
  if (lo == hi) hi = lo * (1.0 + 1e-9);
  const double log_lo = std::log(lo);
  const double log_hi = std::log(hi);
  hist.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) {
    hist.edges[static_cast<std::size_t>(i)] =
        std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) / bins);
  }
  hist.edges.front() = lo;
  hist.edges.back() = hi;
  hist.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const double v : values) {
    if (v <= 0.0) continue;
    const auto it = std::upper_bound(hist.edges.begin(), hist.edges.end(), v);
    auto bin = it - hist.edges.begin() - 1;
    bin = std::clamp<std::ptrdiff_t>(bin, 0, bins - 1);
    hist.counts[static_cast<std::size_t>(bin)] += 1;
  }
  return hist;
}

}  // namespace dpsharp

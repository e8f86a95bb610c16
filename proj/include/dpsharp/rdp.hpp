// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Renyi-divergence accountant for the Poisson-subsampled Gaussian mechanism.
// Composition over T steps is additive per order; the (eps, delta) conversion
// takes the minimum over a fixed order grid. The per-order divergence uses
// the standard series: a binomial sum at integer orders and a two-part
// log-erfc series at fractional orders, all in log space.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpsharp/privacy.hpp"

namespace dpsharp {

// Dense at low orders to serve both high- and low-noise regimes.
std::span<const double> default_rdp_orders();

struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> values;  // divergence of ONE mechanism invocation
};

// Renyi divergence of a single Poisson-subsampled Gaussian query at each
// order. q = 1 reduces to the plain Gaussian mechanism (alpha / (2 sigma^2));
// q = 0 is divergence zero.
RdpCurve rdp_subsampled_gaussian(double q, double sigma,
                                 std::span<const double> orders = default_rdp_orders());

// eps = min over orders of [T * rdp(alpha) + ln(1/delta) / (alpha - 1)].
// Returns the minimizing order through best_order if non-null.
double rdp_to_dp(const RdpCurve& curve, std::int64_t total_steps, double delta,
                 double* best_order = nullptr);

// Smallest noise multiplier (bisection over [0.1, 100], relative tolerance
// 1e-3) whose accounted eps at (q, T, delta) is at most the target. Throws
// CalibrationInfeasible when even sigma = 100 misses the target.
double calibrate_sigma(PrivacyBudget target, double q, std::int64_t total_steps);

namespace rdp_detail {
// Exposed for the quadrature cross-checks in the tests.
double log_add(double a, double b);
double log_sub(double a, double b);
double log_erfc(double x);
double rdp_one_order(double q, double sigma, double alpha);
}  // namespace rdp_detail

}  // namespace dpsharp

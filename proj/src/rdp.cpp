// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/rdp.hpp"

#include <cmath>
#include <limits>

#include "dpsharp/common.hpp"

namespace dpsharp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

constexpr double kDefaultOrders[] = {1.25, 1.5,  1.75, 2.0,  2.5,  3.0,
                                     4.0,  5.0,  6.0,  8.0,  10.0, 12.0,
                                     16.0, 20.0, 32.0, 64.0, 128.0, 256.0};

bool is_integer(double x) { return x == std::floor(x); }

// Integer order: binomial expansion of the subsampled-Gaussian moment.
double log_a_int(double q, double sigma, double alpha) {
  const long ia = static_cast<long>(alpha);
  const double lq = std::log(q);
  const double l1q = std::log1p(-q);
  double acc = kNegInf;
  for (long k = 0; k <= ia; ++k) {
    const double lb = std::lgamma(ia + 1.0) - std::lgamma(k + 1.0) -
                      std::lgamma(ia - k + 1.0);
    const double t = lb + k * lq + (ia - k) * l1q +
                     (static_cast<double>(k) * k - k) / (2.0 * sigma * sigma);
    acc = rdp_detail::log_add(acc, t);
  }
  return acc;
}

// Fractional order: two-sum series split at z0, the crossing point of the
// mixture densities, with erfc tail weights. The exponential parts of the
// terms cancel identically, so the tail decays only like i^-(alpha + 2);
// at large sigma the -30 cutoff can take tens of thousands of terms, which
// is why the binomial factor is maintained incrementally.
double log_a_frac(double q, double sigma, double alpha) {
  double log_a0 = kNegInf;
  double log_a1 = kNegInf;
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  const double sq2s = std::sqrt(2.0) * sigma;
  const double log_half = std::log(0.5);
  double lb = 0.0;     // log |binom(alpha, i)|
  double sign = 1.0;   // sign of binom(alpha, i)
  for (long i = 0;; ++i) {
    if (i > 0) {
      const double factor = alpha - static_cast<double>(i - 1);
      if (factor < 0.0) sign = -sign;
      lb += std::log(std::abs(factor)) - std::log(static_cast<double>(i));
    }
    const double j = alpha - static_cast<double>(i);
    const double log_t0 = lb + i * std::log(q) + j * std::log1p(-q);
    const double log_t1 = lb + j * std::log(q) + i * std::log1p(-q);
    const double log_e0 = log_half + rdp_detail::log_erfc((i - z0) / sq2s);
    const double log_e1 = log_half + rdp_detail::log_erfc((z0 - j) / sq2s);
    const double log_s0 =
        log_t0 + (static_cast<double>(i) * i - i) / (2.0 * sigma * sigma) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;
    if (sign > 0.0) {
      log_a0 = rdp_detail::log_add(log_a0, log_s0);
      log_a1 = rdp_detail::log_add(log_a1, log_s1);
    } else {
      log_a0 = rdp_detail::log_sub(log_a0, log_s0);
      log_a1 = rdp_detail::log_sub(log_a1, log_s1);
    }
    if (std::max(log_s0, log_s1) < -30.0 && static_cast<double>(i) > alpha) break;
    if (i > 500000) throw NumericError("subsampled-Gaussian series did not converge");
  }
  return rdp_detail::log_add(log_a0, log_a1);
}

}  // namespace

namespace rdp_detail {

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  const double n = std::min(a, b);
  return m + std::log1p(std::exp(n - m));
}

double log_sub(double a, double b) {
  // requires a >= b
  if (b == kNegInf) return a;
  if (a == b) return kNegInf;
  return a + std::log1p(-std::exp(b - a));
}

double log_erfc(double x) {
  if (x > 26.0) {
    // Asymptotic expansion; std::erfc underflows past ~27.2.
    const double x2 = x * x;
    return -0.5 * std::log(M_PI) - std::log(x) - x2 - 0.5 / x2 +
           0.625 / (x2 * x2) - (37.0 / 24.0) / (x2 * x2 * x2) +
           (353.0 / 64.0) / (x2 * x2 * x2 * x2);
  }
  return std::log(std::erfc(x));
}

double rdp_one_order(double q, double sigma, double alpha) {
  if (q == 0.0) return 0.0;
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);
  const double log_a =
      is_integer(alpha) ? log_a_int(q, sigma, alpha) : log_a_frac(q, sigma, alpha);
  return std::max(log_a / (alpha - 1.0), 0.0);
}

}  // namespace rdp_detail

std::span<const double> default_rdp_orders() { return kDefaultOrders; }

RdpCurve rdp_subsampled_gaussian(double q, double sigma, std::span<const double> orders) {
  if (sigma <= 0.0) {
    throw ConfigError("noise multiplier must be positive; sigma = 0 gives unbounded eps");
  }
  if (q < 0.0 || q > 1.0) {
    throw ContractViolation("sampling rate must lie in [0, 1]");
  }
  RdpCurve curve;
  curve.orders.assign(orders.begin(), orders.end());
  curve.values.reserve(curve.orders.size());
  for (const double alpha : curve.orders) {
    if (alpha <= 1.0) throw ContractViolation("Renyi orders must exceed 1");
    curve.values.push_back(rdp_detail::rdp_one_order(q, sigma, alpha));
  }
  return curve;
}

double rdp_to_dp(const RdpCurve& curve, std::int64_t total_steps, double delta,
                 double* best_order) {
  if (curve.orders.empty()) throw ContractViolation("empty RDP curve");
  if (total_steps < 1) throw ContractViolation("step count must be positive");
  if (delta <= 0.0 || delta >= 1.0) throw ContractViolation("delta must lie in (0, 1)");
  const double log_inv_delta = std::log(1.0 / delta);
  double best = std::numeric_limits<double>::infinity();
  double best_a = curve.orders.front();
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double eps = static_cast<double>(total_steps) * curve.values[i] +
                       log_inv_delta / (curve.orders[i] - 1.0);
    if (eps < best) {
      best = eps;
      best_a = curve.orders[i];
    }
  }
  if (best_order != nullptr) *best_order = best_a;
  return best;
}

double calibrate_sigma(PrivacyBudget target, double q, std::int64_t total_steps) {
  if (target.eps <= 0.0) throw ContractViolation("target eps must be positive");
  const double delta = target.delta;
  const auto accounted = [&](double sigma) {
    return rdp_to_dp(rdp_subsampled_gaussian(q, sigma), total_steps, delta);
  };
  double lo = 0.1;
  double hi = 100.0;
  if (accounted(hi) > target.eps) {
    throw CalibrationInfeasible("no sigma in [0.1, 100] meets eps " +
                                std::to_string(target.eps));
  }
  if (accounted(lo) <= target.eps) return lo;
  while ((hi - lo) / hi > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    if (accounted(mid) <= target.eps) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;  // feasible endpoint
}

}  // namespace dpsharp

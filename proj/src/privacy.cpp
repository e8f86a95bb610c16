// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/privacy.hpp"

#include <cmath>

#include "dpsharp/rdp.hpp"

namespace dpsharp {

ParamVector clip(const ParamVector& g, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ContractViolation("clip norm must be positive");
  const double norm = g.norm();
  if (norm <= clip_norm) return g;
  return g * (clip_norm / norm);
}

double clip_rows(PerExampleGrads& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ContractViolation("clip norm must be positive");
  Eigen::Index clipped = 0;
  for (Eigen::Index i = 0; i < grads.rows(); ++i) {
    const double norm = grads.row(i).norm();
    if (norm > clip_norm) {
      grads.row(i) *= clip_norm / norm;
      ++clipped;
    }
  }
  return grads.rows() == 0 ? 0.0
                           : static_cast<double>(clipped) / static_cast<double>(grads.rows());
}

ParamVector privatize_mean(const PerExampleGrads& grads, double clip_norm,
                           double sigma, RngStream& noise, double* clip_fraction) {
  if (grads.rows() == 0) throw ContractViolation("cannot privatize an empty batch");
  if (sigma < 0.0) throw ContractViolation("noise multiplier must be nonnegative");
  PerExampleGrads clipped = grads;
  const double fraction = clip_rows(clipped, clip_norm);
  if (clip_fraction != nullptr) *clip_fraction = fraction;
  ParamVector mean = ParamVector::Zero(clipped.cols());
  for (Eigen::Index i = 0; i < clipped.rows(); ++i) mean += clipped.row(i);
  mean /= static_cast<double>(clipped.rows());
  if (sigma == 0.0) return mean;  // bit-exact clipped mean
  const double std_dev = clip_norm * sigma;
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    mean[j] += std_dev * noise.next_gaussian();
  }
  return mean;
}

PrivacyBudget general_compose(std::span<const PrivacyBudget> budgets) {
  if (budgets.empty()) throw ContractViolation("cannot compose an empty budget list");
  PrivacyBudget total;
  for (const PrivacyBudget& b : budgets) {
    total.eps += b.eps;
    total.delta += b.delta;
  }
  return total;
}

PrivacyBudget advanced_compose(std::int64_t k, double eps, double delta,
                               double delta_prime) {
  if (k <= 0) throw ContractViolation("composition count must be positive");
  if (!(delta_prime > 0.0)) throw ContractViolation("delta' must be positive");
  const double kd = static_cast<double>(k);
  const double eps_out = std::sqrt(2.0 * kd * std::log(1.0 / delta_prime)) * eps +
                         kd * eps * (std::exp(eps) - 1.0);
  return {eps_out, kd * delta + delta_prime};
}

TradeoffFactors sam_tradeoff_factors(double delta) {
  if (!(delta > 0.0) || !(delta < 0.5)) {
    throw ContractViolation("delta must lie in (0, 0.5)");
  }
  const double ratio = std::log(delta) / std::log(2.0 * delta);
  return {2.0 * std::sqrt(ratio), 0.25 / ratio};
}

BudgetLedger::BudgetLedger(CompositionMode mode) : mode_(mode) {}

BudgetLedger BudgetLedger::renyi(const NoisePlan& plan, double delta) {
  BudgetLedger ledger(CompositionMode::kRenyi);
  ledger.plan_ = plan;
  ledger.conversion_delta_ = delta;
  return ledger;
}

BudgetLedger BudgetLedger::advanced(double delta_prime) {
  BudgetLedger ledger(CompositionMode::kAdvanced);
  ledger.delta_prime_ = delta_prime;
  return ledger;
}

void BudgetLedger::record(std::int64_t step, std::int64_t n_queries,
                          PrivacyBudget per_query) {
  if (step < last_step_) throw ContractViolation("ledger steps must be nondecreasing");
  if (n_queries < 1) throw ContractViolation("query count must be positive");
  last_step_ = step;
  bool grouped = false;
  for (Group& g : groups_) {
    if (g.per_query.eps == per_query.eps && g.per_query.delta == per_query.delta) {
      g.count += n_queries;
      grouped = true;
      break;
    }
  }
  if (!grouped) groups_.push_back({per_query, n_queries});
  total_queries_ += n_queries;
  if (cap_.has_value()) {
    const PrivacyBudget t = total();
    if (t.eps > cap_->eps || t.delta > cap_->delta) {
      throw BudgetExhausted("privacy budget exhausted at step " + std::to_string(step) +
                            ": spent (" + std::to_string(t.eps) + ", " +
                            std::to_string(t.delta) + ") exceeds cap (" +
                            std::to_string(cap_->eps) + ", " +
                            std::to_string(cap_->delta) + ")");
    }
  }
}

void BudgetLedger::record_postprocessing(std::int64_t step) {
  if (step < last_step_) throw ContractViolation("ledger steps must be nondecreasing");
  last_step_ = step;
  ++postprocessing_events_;  // data-independent reuse: zero budget
}

PrivacyBudget BudgetLedger::total() const {
  if (total_queries_ == 0) return {0.0, 0.0};
  switch (mode_) {
    case CompositionMode::kGeneral: {
      // count * per-query, grouped by distinct budget, so that a trace with
      // exactly twice the queries totals exactly twice the budget.
      PrivacyBudget t;
      for (const Group& g : groups_) {
        t.eps += static_cast<double>(g.count) * g.per_query.eps;
        t.delta += static_cast<double>(g.count) * g.per_query.delta;
      }
      return t;
    }
    case CompositionMode::kAdvanced: {
      if (groups_.size() != 1) {
        throw ContractViolation(
            "advanced composition requires homogeneous per-query budgets");
      }
      return advanced_compose(groups_.front().count, groups_.front().per_query.eps,
                              groups_.front().per_query.delta, delta_prime_);
    }
    case CompositionMode::kRenyi: {
      if (!plan_.has_value()) {
        throw ContractViolation("renyi ledger mode needs a NoisePlan");
      }
      if (rdp_curve_cache_.empty()) {
        const RdpCurve curve = rdp_subsampled_gaussian(plan_->sampling_rate,
                                                       plan_->noise_multiplier);
        rdp_curve_cache_ = curve.values;
      }
      RdpCurve curve;
      curve.orders.assign(default_rdp_orders().begin(), default_rdp_orders().end());
      curve.values = rdp_curve_cache_;
      const double eps = rdp_to_dp(curve, total_queries_, conversion_delta_);
      return {eps, conversion_delta_};
    }
  }
  throw ContractViolation("unknown composition mode");
}

}  // namespace dpsharp

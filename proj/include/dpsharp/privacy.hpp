// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Clipping, the Gaussian mechanism, privacy composition, and the query
// ledger. The mechanism contract: per-example gradients are clipped to L2
// norm C, averaged, and the mean receives N(0, C^2 sigma^2 I) noise. Note the
// noise standard deviation is C*sigma on the mean itself (not divided by the
// batch size); with per-batch sensitivity 2C/m this is a conservative
// calibration, and every consumer in this codebase assumes it.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpsharp/model.hpp"
#include "dpsharp/rng.hpp"

namespace dpsharp {

struct PrivacyBudget {
  double eps = 0.0;
  double delta = 0.0;
};

// Mechanism parameters binding one training run to its accounting.
struct NoisePlan {
  double clip_norm = 1.0;        // C > 0
  double noise_multiplier = 0.0; // sigma >= 0
  double sampling_rate = 1.0;    // q in (0, 1]
  std::int64_t total_steps = 1;  // T >= 1
};

// clip(g, C) = g * min(1, C / ||g||): norm capped at C, direction kept,
// identity when already inside the ball.
ParamVector clip(const ParamVector& g, double clip_norm);

// Clip each row in place; returns the fraction of rows that were rescaled.
double clip_rows(PerExampleGrads& grads, double clip_norm);

// Mean of clipped rows plus per-coordinate Gaussian noise of std C*sigma,
// drawn sequentially from `noise`. sigma = 0 returns the clipped mean
// exactly. If clip_fraction is non-null it receives the clipped-row fraction.
ParamVector privatize_mean(const PerExampleGrads& grads, double clip_norm,
                           double sigma, RngStream& noise,
                           double* clip_fraction = nullptr);

// Adaptive sequential composition: budgets add coordinatewise.
PrivacyBudget general_compose(std::span<const PrivacyBudget> budgets);

// k-fold composition of an (eps, delta) mechanism at slack delta_prime:
//   eps' = sqrt(2 k ln(1/delta')) eps + k eps (e^eps - 1),
//   delta' = k delta + delta_prime.
PrivacyBudget advanced_compose(std::int64_t k, double eps, double delta,
                               double delta_prime);

// Noise/iteration trade-off for running a two-query-per-step optimizer at an
// equal total budget: either multiply sigma by 2 sqrt(log d / log 2d) or
// multiply the step count by (log 2d / log d)/4. At delta = 1e-5 these are
// about 2.06 and 0.24.
struct TradeoffFactors {
  double noise_factor;
  double iteration_factor;
};
TradeoffFactors sam_tradeoff_factors(double delta);

enum class CompositionMode { kGeneral, kAdvanced, kRenyi };

// Append-only record of data queries and post-processing events for one
// training run. Query entries carry a per-query (eps, delta); post-processing
// entries are free. Totals depend on the composition mode:
//   general  - exact products: (query count) x (per-query budget), grouped by
//              distinct budget so homogeneous traces compose bit-exactly.
//   advanced - requires homogeneous per-query budgets and a delta' slack.
//   renyi    - per-query budgets are ignored; the total is the accountant's
//              conversion of the attached NoisePlan at T = query count.
class BudgetLedger {
 public:
  explicit BudgetLedger(CompositionMode mode);

  // Renyi mode needs the mechanism parameters and target delta up front.
  static BudgetLedger renyi(const NoisePlan& plan, double delta);
  // Advanced mode needs the composition slack delta'.
  static BudgetLedger advanced(double delta_prime);

  // Marks fixed-size (non-Poisson) sampling: totals still computed, but
  // flagged approximate because the subsampling analysis assumes Poisson.
  void mark_accounting_approximate() { approximate_ = true; }
  bool accounting_approximate() const { return approximate_; }

  // Optional hard cap; exceeding it throws BudgetExhausted from record().
  void set_cap(PrivacyBudget cap) { cap_ = cap; }

  void record(std::int64_t step, std::int64_t n_queries, PrivacyBudget per_query);
  void record_postprocessing(std::int64_t step);

  PrivacyBudget total() const;
  std::int64_t query_count() const { return total_queries_; }
  std::int64_t postprocessing_count() const { return postprocessing_events_; }
  CompositionMode mode() const { return mode_; }

 private:
  struct Group {
    PrivacyBudget per_query;
    std::int64_t count = 0;
  };

  CompositionMode mode_;
  std::vector<Group> groups_;
  std::int64_t total_queries_ = 0;
  std::int64_t postprocessing_events_ = 0;
  std::int64_t last_step_ = -1;
  bool approximate_ = false;
  std::optional<PrivacyBudget> cap_;
  std::optional<NoisePlan> plan_;        // renyi mode
  double conversion_delta_ = 0.0;        // renyi mode
  double delta_prime_ = 0.0;             // advanced mode
  mutable std::vector<double> rdp_curve_cache_;  // per-order, one composition
};

}  // namespace dpsharp

// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Step rules. The private optimizers share one skeleton: per-example
// gradients at a (possibly perturbed) point, clip, average, noise, base
// update. They differ in where the ascent perturbation comes from:
//
//   dpsgd          no perturbation                       1 query / step
//   dpsam          fresh privatized gradient at w        2 queries / step
//   dpsat          previous step's privatized gradient   1 query + 1 post-processing
//   dpsat_momentum geometric sum of previous gradients   1 query + 1 post-processing
//
// Reusing the previous privatized gradient is data-independent given that
// gradient, which is why dpsat's perturbation costs no budget. The first
// dpsat step has a zero stored gradient and so is identical to dpsgd under
// a shared noise stream.

#pragma once

#include <cstdint>
#include <string>

#include "dpsharp/model.hpp"
#include "dpsharp/privacy.hpp"
#include "dpsharp/rng.hpp"

namespace dpsharp {

enum class BaseUpdateKind { kSgdMomentum, kAdam };

struct HyperParams {
  double learning_rate = 0.5;    // eta > 0
  double radius = 0.0;           // rho >= 0, ascent step size
  double base_momentum = 0.9;    // beta in [0, 1)
  double ascent_momentum = 0.9;  // gamma in [0, 1), dpsat_momentum only
  double clip_norm = 0.1;        // C > 0
  double noise_multiplier = 0.0; // sigma >= 0
  double zero_guard = 1e-12;     // tau > 0, protects ascent normalization
  BaseUpdateKind base_update = BaseUpdateKind::kSgdMomentum;

  void validate() const;
};

struct OptimizerState {
  ParamVector w;
  ParamVector velocity;           // momentum buffer / Adam first moment
  ParamVector second_moment;      // Adam only
  ParamVector prev_private_grad;  // g^p_{t-1}; zero before the first step
  ParamVector ascent_accumulator; // dpsat_momentum running sum
  std::int64_t step = 0;

  static OptimizerState fresh(ParamVector w0);
};

// Optional per-step readouts for metrics and analysis. The clean mean is the
// clipped average before noise. ascent_seed is the vector whose successive
// values define the ascent-direction cosine series: the released gradient
// for dpsgd/dpsat (it seeds the next perturbation), the first query for
// dpsam, and the exact mean gradient for the non-private rules.
struct StepDiagnostics {
  double grad_norm_mean = 0.0;
  double clip_fraction = 0.0;
  int gradient_evaluations = 0;
  ParamVector clean_mean;
  ParamVector noisy_mean;
  ParamVector ascent_seed;
};

// Shared base-optimizer update applied to the (privatized) gradient.
// sgd_momentum: velocity <- beta * velocity + g, returns velocity.
// adam: bias-corrected first/second moments (beta2 = 0.999, eps = 1e-8) with
// beta1 = base_momentum; step count taken from state.step.
ParamVector base_update(const ParamVector& g, OptimizerState& state,
                        const HyperParams& hp, BaseUpdateKind kind);

void dpsgd_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
                const HyperParams& hp, BudgetLedger& ledger, PrivacyBudget per_query,
                RngStream& noise, StepDiagnostics* diag = nullptr);

void dpsam_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
                const HyperParams& hp, BudgetLedger& ledger, PrivacyBudget per_query,
                RngStream& noise, StepDiagnostics* diag = nullptr);

void dpsat_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
                const HyperParams& hp, BudgetLedger& ledger, PrivacyBudget per_query,
                RngStream& noise, StepDiagnostics* diag = nullptr);

void dpsat_momentum_step(OptimizerState& state, const Model& model,
                         const ExampleBatch& batch, const HyperParams& hp,
                         BudgetLedger& ledger, PrivacyBudget per_query,
                         RngStream& noise, StepDiagnostics* diag = nullptr);

// Non-private baselines: exact mean gradients, no clipping, noise, or ledger.
void sgd_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
              const HyperParams& hp, StepDiagnostics* diag = nullptr);

void sam_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
              const HyperParams& hp, StepDiagnostics* diag = nullptr);

enum class OptimizerKind { kSgd, kSam, kDpSgd, kDpSam, kDpSat, kDpSatMomentum };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);
bool is_private(OptimizerKind kind);

// Uniform dispatcher used by the training loop. Non-private kinds ignore the
// ledger arguments and the noise stream.
void optimizer_step(OptimizerKind kind, OptimizerState& state, const Model& model,
                    const ExampleBatch& batch, const HyperParams& hp,
                    BudgetLedger& ledger, PrivacyBudget per_query, RngStream& noise,
                    StepDiagnostics* diag = nullptr);

}  // namespace dpsharp

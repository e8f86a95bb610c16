// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/optimizer.hpp"

#include <cmath>

namespace dpsharp {

namespace {

constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Clipped row mean in the same fixed summation order privatize_mean uses.
ParamVector clipped_mean_of(const PerExampleGrads& rows, double clip_norm) {
  PerExampleGrads clipped = rows;
  clip_rows(clipped, clip_norm);
  ParamVector mean = ParamVector::Zero(clipped.cols());
  for (Eigen::Index i = 0; i < clipped.rows(); ++i) mean += clipped.row(i);
  return mean / static_cast<double>(clipped.rows());
}

// Per-example gradients at w + offset, with pre-clip norm statistics.
PerExampleGrads grads_at(const Model& model, const ParamVector& w,
                         const ParamVector& offset, const ExampleBatch& batch,
                         StepDiagnostics* diag) {
  PerExampleGrads rows;
  if (offset.size() == 0) {
    model.grad_per_example(w, batch, rows);
  } else {
    model.grad_per_example(w + offset, batch, rows);
  }
  if (diag != nullptr) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) acc += rows.row(i).norm();
    diag->grad_norm_mean = acc / static_cast<double>(rows.rows());
    diag->gradient_evaluations += 1;
  }
  return rows;
}

// Clip + average + noise, recording one ledger query and the diagnostics.
ParamVector private_mean_query(const PerExampleGrads& rows, const HyperParams& hp,
                               BudgetLedger& ledger, PrivacyBudget per_query,
                               std::int64_t step, RngStream& noise,
                               StepDiagnostics* diag) {
  ledger.record(step, 1, per_query);
  double fraction = 0.0;
  ParamVector g = privatize_mean(rows, hp.clip_norm, hp.noise_multiplier, noise, &fraction);
  if (diag != nullptr) {
    diag->clip_fraction = fraction;
    diag->noisy_mean = g;
  }
  return g;
}

void apply_update(OptimizerState& state, const ParamVector& g, const HyperParams& hp) {
  state.w -= hp.learning_rate * base_update(g, state, hp, hp.base_update);
  check_finite(state.w, "parameter vector");
}

}  // namespace

void HyperParams::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (radius < 0.0) throw ConfigError("radius must be nonnegative");
  if (base_momentum < 0.0 || base_momentum >= 1.0)
    throw ConfigError("base_momentum must lie in [0, 1)");
  if (ascent_momentum < 0.0 || ascent_momentum >= 1.0)
    throw ConfigError("ascent_momentum must lie in [0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (noise_multiplier < 0.0) throw ConfigError("noise_multiplier must be nonnegative");
  if (!(zero_guard > 0.0)) throw ConfigError("zero_guard must be positive");
}

OptimizerState OptimizerState::fresh(ParamVector w0) {
  OptimizerState s;
  const Eigen::Index p = w0.size();
  s.w = std::move(w0);
  s.velocity = ParamVector::Zero(p);
  s.second_moment = ParamVector::Zero(p);
  s.prev_private_grad = ParamVector::Zero(p);
  s.ascent_accumulator = ParamVector::Zero(p);
  return s;
}

ParamVector base_update(const ParamVector& g, OptimizerState& state,
                        const HyperParams& hp, BaseUpdateKind kind) {
  switch (kind) {
    case BaseUpdateKind::kSgdMomentum:
      state.velocity = hp.base_momentum * state.velocity + g;
      return state.velocity;
    case BaseUpdateKind::kAdam: {
      const double b1 = hp.base_momentum;
      state.velocity = b1 * state.velocity + (1.0 - b1) * g;
      state.second_moment =
          kAdamBeta2 * state.second_moment.array() + (1.0 - kAdamBeta2) * g.array().square();
      const double t = static_cast<double>(state.step);
      const Eigen::ArrayXd m_hat = state.velocity.array() / (1.0 - std::pow(b1, t));
      const Eigen::ArrayXd v_hat = state.second_moment.array() / (1.0 - std::pow(kAdamBeta2, t));
      return (m_hat / (v_hat.sqrt() + kAdamEps)).matrix();
    }
  }
  throw ContractViolation("unknown base update kind");
}

void dpsgd_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
                const HyperParams& hp, BudgetLedger& ledger, PrivacyBudget per_query,
                RngStream& noise, StepDiagnostics* diag) {
  state.step += 1;
  const PerExampleGrads rows = grads_at(model, state.w, {}, batch, diag);
  if (diag != nullptr) diag->clean_mean = clipped_mean_of(rows, hp.clip_norm);
  const ParamVector g =
      private_mean_query(rows, hp, ledger, per_query, state.step, noise, diag);
  if (diag != nullptr) diag->ascent_seed = g;
  state.prev_private_grad = g;
  apply_update(state, g, hp);
}

void dpsam_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
                const HyperParams& hp, BudgetLedger& ledger, PrivacyBudget per_query,
                RngStream& noise, StepDiagnostics* diag) {
  state.step += 1;
  // First query: gradient at w for the ascent direction.
  const PerExampleGrads rows0 = grads_at(model, state.w, {}, batch, diag);
  const ParamVector g0 =
      private_mean_query(rows0, hp, ledger, per_query, state.step, noise, nullptr);
  if (diag != nullptr) diag->ascent_seed = g0;
  // Ascent uses the noisy norm as written; zero gradient skips the climb.
  ParamVector offset;
  const double norm = g0.norm();
  if (hp.radius > 0.0 && norm > 0.0) offset = (hp.radius / norm) * g0;
  // Second query: gradient at the perturbed point drives the descent.
  const PerExampleGrads rows1 = grads_at(model, state.w, offset, batch, diag);
  if (diag != nullptr) diag->clean_mean = clipped_mean_of(rows1, hp.clip_norm);
  const ParamVector g1 =
      private_mean_query(rows1, hp, ledger, per_query, state.step, noise, diag);
  state.prev_private_grad = g1;
  apply_update(state, g1, hp);
}

namespace {

// Shared tail of the two dpsat variants once the ascent offset is fixed.
void dpsat_tail(OptimizerState& state, const Model& model, const ExampleBatch& batch,
                const HyperParams& hp, BudgetLedger& ledger, PrivacyBudget per_query,
                RngStream& noise, const ParamVector& direction, StepDiagnostics* diag) {
  // The stored gradient is already private, so steering by it is free.
  ledger.record_postprocessing(state.step);
  ParamVector offset;
  const double norm = direction.size() == 0 ? 0.0 : direction.norm();
  if (hp.radius > 0.0 && norm > 0.0) {
    offset = (hp.radius / (norm + hp.zero_guard)) * direction;
  }
  const PerExampleGrads rows = grads_at(model, state.w, offset, batch, diag);
  if (diag != nullptr) diag->clean_mean = clipped_mean_of(rows, hp.clip_norm);
  const ParamVector g =
      private_mean_query(rows, hp, ledger, per_query, state.step, noise, diag);
  if (diag != nullptr) diag->ascent_seed = g;
  state.prev_private_grad = g;
  apply_update(state, g, hp);
}

}  // namespace

void dpsat_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
                const HyperParams& hp, BudgetLedger& ledger, PrivacyBudget per_query,
                RngStream& noise, StepDiagnostics* diag) {
  state.step += 1;
  dpsat_tail(state, model, batch, hp, ledger, per_query, noise,
             state.prev_private_grad, diag);
}

void dpsat_momentum_step(OptimizerState& state, const Model& model,
                         const ExampleBatch& batch, const HyperParams& hp,
                         BudgetLedger& ledger, PrivacyBudget per_query,
                         RngStream& noise, StepDiagnostics* diag) {
  state.step += 1;
  state.ascent_accumulator =
      hp.ascent_momentum * state.ascent_accumulator + state.prev_private_grad;
  dpsat_tail(state, model, batch, hp, ledger, per_query, noise,
             state.ascent_accumulator, diag);
}

void sgd_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
              const HyperParams& hp, StepDiagnostics* diag) {
  state.step += 1;
  const PerExampleGrads rows = grads_at(model, state.w, {}, batch, diag);
  ParamVector g = ParamVector::Zero(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) g += rows.row(i);
  g /= static_cast<double>(rows.rows());
  if (diag != nullptr) {
    diag->clean_mean = g;
    diag->noisy_mean = g;
    diag->ascent_seed = g;
  }
  apply_update(state, g, hp);
}

void sam_step(OptimizerState& state, const Model& model, const ExampleBatch& batch,
              const HyperParams& hp, StepDiagnostics* diag) {
  state.step += 1;
  const ParamVector g0 = mean_grad(model, state.w, batch);
  if (diag != nullptr) {
    diag->gradient_evaluations += 1;
    diag->ascent_seed = g0;
  }
  ParamVector offset;
  const double norm = g0.norm();
  if (hp.radius > 0.0 && norm > 0.0) offset = (hp.radius / norm) * g0;
  const PerExampleGrads rows = grads_at(model, state.w, offset, batch, diag);
  ParamVector g = ParamVector::Zero(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) g += rows.row(i);
  g /= static_cast<double>(rows.rows());
  if (diag != nullptr) {
    diag->clean_mean = g;
    diag->noisy_mean = g;
  }
  apply_update(state, g, hp);
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "sam") return OptimizerKind::kSam;
  if (name == "dpsgd") return OptimizerKind::kDpSgd;
  if (name == "dpsam") return OptimizerKind::kDpSam;
  if (name == "dpsat") return OptimizerKind::kDpSat;
  if (name == "dpsat_momentum") return OptimizerKind::kDpSatMomentum;
  throw ConfigError("unknown optimizer '" + name +
                    "' (valid: sgd, sam, dpsgd, dpsam, dpsat, dpsat_momentum)");
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kSam: return "sam";
    case OptimizerKind::kDpSgd: return "dpsgd";
    case OptimizerKind::kDpSam: return "dpsam";
    case OptimizerKind::kDpSat: return "dpsat";
    case OptimizerKind::kDpSatMomentum: return "dpsat_momentum";
  }
  throw ContractViolation("unknown optimizer kind");
}

bool is_private(OptimizerKind kind) {
  return kind != OptimizerKind::kSgd && kind != OptimizerKind::kSam;
}

void optimizer_step(OptimizerKind kind, OptimizerState& state, const Model& model,
                    const ExampleBatch& batch, const HyperParams& hp,
                    BudgetLedger& ledger, PrivacyBudget per_query, RngStream& noise,
                    StepDiagnostics* diag) {
  switch (kind) {
    case OptimizerKind::kSgd: return sgd_step(state, model, batch, hp, diag);
    case OptimizerKind::kSam: return sam_step(state, model, batch, hp, diag);
    case OptimizerKind::kDpSgd:
      return dpsgd_step(state, model, batch, hp, ledger, per_query, noise, diag);
    case OptimizerKind::kDpSam:
      return dpsam_step(state, model, batch, hp, ledger, per_query, noise, diag);
    case OptimizerKind::kDpSat:
      return dpsat_step(state, model, batch, hp, ledger, per_query, noise, diag);
    case OptimizerKind::kDpSatMomentum:
      return dpsat_momentum_step(state, model, batch, hp, ledger, per_query, noise, diag);
  }
  throw ContractViolation("unknown optimizer kind");
}

}  // namespace dpsharp

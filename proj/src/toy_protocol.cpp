// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/toy_protocol.hpp"

#include <cmath>
#include <limits>

#include "dpsharp/privacy.hpp"
#include "dpsharp/rng.hpp"

namespace dpsharp {

namespace {

struct BasinState {
  Eigen::Vector2d w;
  std::vector<double> lambdas;
  std::vector<double> deltas;
};

// Advances one basin by one noisy clipped-descent step and records the
// pre-step curvature, loss, and realized gradient displacement.
void advance(const Toy2dModel& model, BasinState& basin, double eta, double clip_norm,
             const Eigen::Vector2d& noise, double* lambda_out, double* delta_out,
             double* loss_out) {
  const Eigen::Vector2d w = basin.w;
  const double lambda = model.lambda_max(w);
  const double loss = model.loss(w);

  ParamVector g_raw = model.grad(w);
  const ParamVector g_bar = clip(g_raw, clip_norm);
  const Eigen::Vector2d g_noisy = Eigen::Vector2d(g_bar) + noise;

  const Eigen::Vector2d pulled_clean = w - eta * Eigen::Vector2d(g_bar);
  const Eigen::Vector2d pulled_noisy = w - eta * g_noisy;
  const double delta = (model.grad(pulled_clean) - model.grad(pulled_noisy)).norm();

  basin.w = pulled_noisy;
  basin.lambdas.push_back(lambda);
  basin.deltas.push_back(delta);
  *lambda_out = lambda;
  *delta_out = delta;
  *loss_out = loss;
}

double mean_of(const std::vector<double>& xs) {
  double acc = 0.0;
  for (const double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

}  // namespace

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw ContractViolation("pearson needs two equal-length series");
  }
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

ToyRunResult run_toy_protocol(std::uint64_t seed, const ToyProtocolParams& params) {
  if (params.steps < 2) throw ContractViolation("toy protocol needs at least 2 steps");
  if (!(params.clip_norm > 0.0)) throw ContractViolation("clip_norm must be positive");
  if (params.noise_multiplier < 0.0) {
    throw ContractViolation("noise_multiplier must be nonnegative");
  }

  const Toy2dModel model(params.variant);
  const Eigen::Vector2d u = Eigen::Vector2d(1.0, 1.0).normalized();
  BasinState flat{Toy2dModel::flat_center() - params.start_radius * u, {}, {}};
  BasinState sharp{Toy2dModel::sharp_center() + params.start_radius * u, {}, {}};

  const double noise_std = params.clip_norm * params.noise_multiplier;
  ToyRunResult result;
  result.records.reserve(static_cast<std::size_t>(params.steps));
  for (std::int64_t t = 1; t <= params.steps; ++t) {
    // One draw per step, replayed in both basins.
    RngStream stream(seed, StreamPurpose::kNoise, t);
    Eigen::Vector2d noise;
    noise[0] = noise_std * stream.next_gaussian();
    noise[1] = noise_std * stream.next_gaussian();

    ToyStepRecord record;
    record.step = t;
    advance(model, flat, params.learning_rate, params.clip_norm, noise,
            &record.lambda_flat, &record.delta_flat, &record.loss_flat);
    advance(model, sharp, params.learning_rate, params.clip_norm, noise,
            &record.lambda_sharp, &record.delta_sharp, &record.loss_sharp);
    result.records.push_back(record);
  }

  result.corr_flat = pearson(flat.lambdas, flat.deltas);
  result.corr_sharp = pearson(sharp.lambdas, sharp.deltas);
  result.mean_delta_flat = mean_of(flat.deltas);
  result.mean_delta_sharp = mean_of(sharp.deltas);
  return result;
}

}  // namespace dpsharp

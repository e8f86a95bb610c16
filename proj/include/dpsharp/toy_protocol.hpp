// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Matched-noise descent on the two-basin landscape. One noise sequence is
// drawn per seed and replayed in both basins, so the only difference between
// the two trajectories is local curvature; recording per-step lambda_max
// alongside the realized noise amplification Delta makes the curvature /
// amplification link directly measurable.

#pragma once

#include <cstdint>
#include <vector>

#include "dpsharp/toy2d.hpp"

namespace dpsharp {

struct ToyProtocolParams {
  std::int64_t steps = 250;
  double learning_rate = 0.6;
  double clip_norm = 0.05;
  double noise_multiplier = 0.4;  // noise std = clip_norm * this
  double start_radius = 2.0;      // distance from each center along (1,1)/sqrt2
  Toy2dVariant variant = Toy2dVariant::kCorrected;
};

// One step's readouts for both basins. lambda and loss are evaluated at the
// pre-step point; delta is || grad(w - eta g_bar) - grad(w - eta g_noisy) ||,
// the gradient displacement caused by that step's noise.
struct ToyStepRecord {
  std::int64_t step = 0;
  double lambda_flat = 0.0;
  double delta_flat = 0.0;
  double loss_flat = 0.0;
  double lambda_sharp = 0.0;
  double delta_sharp = 0.0;
  double loss_sharp = 0.0;
};

struct ToyRunResult {
  std::vector<ToyStepRecord> records;
  double corr_flat = 0.0;   // Pearson(lambda, delta) in the flat basin
  double corr_sharp = 0.0;
  double mean_delta_flat = 0.0;
  double mean_delta_sharp = 0.0;
};

// Runs both basins under the shared per-seed noise sequence. The flat
// trajectory starts at flat_center - r * u and the sharp one at
// sharp_center + r * u with u = (1,1)/sqrt(2), both pointing away from the
// saddle between the basins.
ToyRunResult run_toy_protocol(std::uint64_t seed, const ToyProtocolParams& params = {});

// Pearson correlation; NaN if either series is constant.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace dpsharp

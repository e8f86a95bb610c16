// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/toy_protocol.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"

using namespace dpsharp;

TEST_CASE("the matched-noise run is deterministic per seed") {
  ToyProtocolParams params;
  params.steps = 40;
  const ToyRunResult a = run_toy_protocol(11, params);
  const ToyRunResult b = run_toy_protocol(11, params);
  const ToyRunResult c = run_toy_protocol(12, params);
  REQUIRE(a.records.size() == 40);
  REQUIRE(b.records.size() == 40);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].delta_flat == b.records[i].delta_flat);
    CHECK(a.records[i].lambda_sharp == b.records[i].lambda_sharp);
    CHECK(a.records[i].loss_flat == b.records[i].loss_flat);
  }
  bool any_difference = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    any_difference = any_difference || a.records[i].delta_flat != c.records[i].delta_flat;
  }
  CHECK(any_difference);
}

TEST_CASE("summary statistics restate the recorded series") {
  ToyProtocolParams params;
  params.steps = 60;
  const ToyRunResult result = run_toy_protocol(3, params);

  std::vector<double> lambda_flat, delta_flat, lambda_sharp, delta_sharp;
  double sum_flat = 0.0;
  double sum_sharp = 0.0;
  for (const ToyStepRecord& r : result.records) {
    lambda_flat.push_back(r.lambda_flat);
    delta_flat.push_back(r.delta_flat);
    lambda_sharp.push_back(r.lambda_sharp);
    delta_sharp.push_back(r.delta_sharp);
    sum_flat += r.delta_flat;
    sum_sharp += r.delta_sharp;
    CHECK(r.delta_flat >= 0.0);
    CHECK(r.delta_sharp >= 0.0);
    CHECK(std::isfinite(r.loss_flat));
    CHECK(std::isfinite(r.loss_sharp));
  }
  const double n = static_cast<double>(result.records.size());
  CHECK(result.mean_delta_flat == doctest::Approx(sum_flat / n).epsilon(1e-12));
  CHECK(result.mean_delta_sharp == doctest::Approx(sum_sharp / n).epsilon(1e-12));
  CHECK(result.corr_flat ==
        doctest::Approx(test::pearson_ref(lambda_flat, delta_flat)).epsilon(1e-10));
  CHECK(result.corr_sharp ==
        doctest::Approx(test::pearson_ref(lambda_sharp, delta_sharp)).epsilon(1e-10));
}

TEST_CASE("pearson matches its definition and flags constant series") {
  const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> up = {2.0, 4.0, 6.0, 8.0};
  const std::vector<double> down = {5.0, 4.0, 3.0, 2.0};
  CHECK(pearson(xs, up) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(xs, down) == doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<double> mixed = {0.3, -1.2, 2.2, 0.4};
  CHECK(pearson(xs, mixed) ==
        doctest::Approx(test::pearson_ref(xs, mixed)).epsilon(1e-12));
  const std::vector<double> flat = {1.0, 1.0, 1.0, 1.0};
  CHECK(std::isnan(pearson(xs, flat)));
}

TEST_CASE("the sharp basin amplifies the shared noise") {
  // The defining comparison of the protocol, at its default settings: both
  // basins see the same noise sequence, and the high-curvature basin turns
  // it into larger gradient displacements.
  const ToyRunResult result = run_toy_protocol(7);
  CHECK(result.mean_delta_flat < result.mean_delta_sharp);
  CHECK(result.corr_flat > 0.0);
  CHECK(result.corr_sharp > 0.0);
}

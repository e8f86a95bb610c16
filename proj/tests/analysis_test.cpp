// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/analysis.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "support/test_models.hpp"

using namespace dpsharp;
using dpsharp::test::DiagQuadraticModel;
using dpsharp::test::MatrixOperator;
using dpsharp::test::dense_top_eigs;
using dpsharp::test::make_batch;

namespace {

Eigen::MatrixXd random_symmetric(Eigen::Index n, RngStream& rng, double scale) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = scale * rng.next_gaussian();
  }
  return 0.5 * (m + m.transpose());
}

}  // namespace

TEST_CASE("power iteration finds the dominant eigenvalue of a diagonal") {
  Eigen::MatrixXd m = Eigen::Vector2d(3.0, 1.0).asDiagonal();
  const MatrixOperator op(m);
  RngStream rng(1, StreamPurpose::kAnalysis, 0);
  bool converged = false;
  const double lam = lambda_max(op, {}, rng, nullptr, nullptr, &converged);
  CHECK(converged);
  CHECK(lam == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("the estimate is algebraic, not largest in magnitude") {
  // A magnitude-dominant negative eigenvalue must not win: the shift keeps
  // the iteration anchored to the top of the spectrum.
  Eigen::MatrixXd m = Eigen::Vector2d(-10.0, 2.0).asDiagonal();
  const MatrixOperator op(m);
  RngStream rng(2, StreamPurpose::kAnalysis, 0);
  const double lam = lambda_max(op, {}, rng);
  CHECK(lam == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("leading eigenvalues agree with a dense solver on random matrices") {
  RngStream rng(3, StreamPurpose::kAnalysis, 0);
  PowerIterationOptions opts;
  opts.tol = 1e-10;
  opts.max_iters = 20000;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 5 + rng.next_below(46);  // 5..50
    const Eigen::MatrixXd m = random_symmetric(n, rng, 2.0);
    const MatrixOperator op(m);
    const int k = 5;
    RngStream iter_rng(4, StreamPurpose::kAnalysis, static_cast<std::uint64_t>(trial));
    const SpectrumReport report = top_k_eigs(op, k, opts, iter_rng);
    const std::vector<double> expected = dense_top_eigs(m, k);
    REQUIRE(report.eigenvalues.size() == static_cast<std::size_t>(k));
    const double scale = std::abs(expected.front()) + 1e-12;
    for (int i = 0; i < k; ++i) {
      CHECK(std::abs(report.eigenvalues[static_cast<std::size_t>(i)] - expected[static_cast<std::size_t>(i)]) /
                scale <
            1e-6);
    }
  }
}

TEST_CASE("a repeated eigenvalue is reported twice") {
  Eigen::MatrixXd m = Eigen::Vector3d(2.0, 2.0, 1.0).asDiagonal();
  const MatrixOperator op(m);
  RngStream rng(5, StreamPurpose::kAnalysis, 0);
  PowerIterationOptions opts;
  opts.tol = 1e-10;
  opts.max_iters = 20000;
  const SpectrumReport report = top_k_eigs(op, 3, opts, rng);
  CHECK(report.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(report.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(report.eigenvalues[2] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(report.eigenvalues[0] >= report.eigenvalues[1]);
  CHECK(report.eigenvalues[1] >= report.eigenvalues[2]);
}

TEST_CASE("spectrum inputs are validated") {
  Eigen::MatrixXd m = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  const MatrixOperator op(m);
  RngStream rng(6, StreamPurpose::kAnalysis, 0);
  CHECK_THROWS_AS(top_k_eigs(op, 0, {}, rng), ContractViolation);
  CHECK_THROWS_AS(top_k_eigs(op, 3, {}, rng), ContractViolation);
  PowerIterationOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(lambda_max(op, bad, rng), ContractViolation);
  SpectrumReport short_report;
  short_report.eigenvalues = {3.0, 2.0};
  CHECK_THROWS_AS(short_report.top_to_fifth_ratio(), ContractViolation);
  SpectrumReport full;
  full.eigenvalues = {10.0, 8.0, 6.0, 4.0, 2.0};
  CHECK(full.top_to_fifth_ratio() == doctest::Approx(5.0));
}

TEST_CASE("perturbed-loss sharpness matches the closed form on a quadratic") {
  Eigen::VectorXd a(3);
  a << 2.0, 0.5, 1.0;
  const DiagQuadraticModel model(a);
  Eigen::MatrixXd x(1, 3);
  x << 0.1, -0.4, 0.7;
  const ExampleBatch batch = make_batch(x);
  Eigen::VectorXd w(3);
  w << 1.0, 0.2, -0.3;

  const double rho = 0.25;
  const Eigen::VectorXd diff = w - x.row(0).transpose();
  const Eigen::VectorXd g = diff.cwiseProduct(a);
  const Eigen::VectorXd d = g / g.norm();
  const double expected =
      rho * d.dot(g) + 0.5 * rho * rho * d.cwiseProduct(a).dot(d);

  bool moved = false;
  const double got = estimated_sharpness(model, w, rho, batch, nullptr, &moved);
  CHECK(moved);
  CHECK(got == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("a zero gradient reports no movement") {
  const DiagQuadraticModel model(Eigen::VectorXd::Constant(2, 1.0));
  Eigen::MatrixXd x(1, 2);
  x << 0.3, -0.8;
  const ExampleBatch batch = make_batch(x);
  const Eigen::VectorXd w = x.row(0).transpose();  // sits at the minimum
  bool moved = true;
  CHECK(estimated_sharpness(model, w, 0.1, batch, nullptr, &moved) == 0.0);
  CHECK_FALSE(moved);
  CHECK_THROWS_AS(estimated_sharpness(model, w, 0.0, batch), ContractViolation);
}

TEST_CASE("a caller-supplied ascent direction overrides the gradient") {
  Eigen::VectorXd a(2);
  a << 1.0, 4.0;
  const DiagQuadraticModel model(a);
  Eigen::MatrixXd x(1, 2);
  x << 0.0, 0.0;
  const ExampleBatch batch = make_batch(x);
  Eigen::VectorXd w(2);
  w << 0.5, 0.0;
  Eigen::VectorXd dir(2);
  dir << 0.0, 2.0;  // normalized internally
  const double rho = 0.1;
  // Along e2 from (0.5, 0): 0.5 a2 rho^2.
  const double expected = 0.5 * a[1] * rho * rho;
  CHECK(estimated_sharpness(model, w, rho, batch, &dir) ==
        doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("the noise gap equals its closed form on a constant-Hessian model") {
  Eigen::VectorXd a(3);
  a << 1.5, 0.25, 0.75;
  const DiagQuadraticModel model(a);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  const ExampleBatch batch = make_batch(x);
  Eigen::VectorXd w(3);
  w << 0.4, -0.2, 0.9;
  Eigen::VectorXd g_bar(3), g_noisy(3);
  g_bar << 0.3, 0.1, -0.2;
  g_noisy << 0.5, -0.1, -0.3;
  const double eta = 0.2;

  const NoiseGapResult r = noise_gap(model, w, g_bar, g_noisy, eta, batch);
  // grad(p) = a (p - xbar), so the gap is ||a * eta * (g_noisy - g_bar)||.
  const Eigen::VectorXd mu = g_noisy - g_bar;
  const double expected_gap = (eta * mu).cwiseProduct(a).norm();
  CHECK(r.gap == doctest::Approx(expected_gap).epsilon(1e-9));
  CHECK(r.segment_lambda_max == doctest::Approx(a.maxCoeff()).epsilon(1e-5));
  CHECK(r.bound == doctest::Approx(eta * r.segment_lambda_max * mu.norm()).epsilon(1e-12));
  CHECK(r.gap <= r.bound * (1.0 + 1e-9) + 1e-12);
  CHECK(r.bound_holds);
}

TEST_CASE("identical clean and noisy gradients give a zero gap") {
  const DiagQuadraticModel model(Eigen::VectorXd::Constant(2, 1.0));
  const ExampleBatch batch = make_batch(Eigen::MatrixXd::Random(3, 2));
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(2, 0.4);
  const NoiseGapResult r = noise_gap(model, w, g, g, 0.3, batch);
  CHECK(r.gap == 0.0);
  CHECK(r.bound == 0.0);
  CHECK(r.bound_holds);
}

TEST_CASE("clip statistics report the rescaled fraction and bin layout") {
  PerExampleGrads grads = PerExampleGrads::Zero(3, 4);
  grads(0, 0) = 0.05;
  grads(1, 0) = 0.15;
  grads(2, 0) = 0.25;
  const ClipStats stats = clip_stats(grads, 0.1);
  CHECK(stats.clip_fraction == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  REQUIRE(stats.edges.size() == 21);
  REQUIRE(stats.counts.size() == 20);
  CHECK(stats.edges.front() == 0.0);
  CHECK(std::isinf(stats.edges.back()));
  // Fine decade below 1, unit bins to 10, then overflow.
  CHECK(stats.edges[1] == doctest::Approx(0.1));
  CHECK(stats.edges[10] == doctest::Approx(1.0));
  CHECK(stats.edges[11] == doctest::Approx(2.0));
  CHECK(stats.counts[0] == 1);  // 0.05
  CHECK(stats.counts[1] == 1);  // 0.15
  CHECK(stats.counts[2] == 1);  // 0.25
}

TEST_CASE("norms land in the documented bins") {
  const auto bin_of = [](double norm) {
    PerExampleGrads grads = PerExampleGrads::Zero(1, 2);
    grads(0, 0) = norm;
    const ClipStats stats = clip_stats(grads, 1.0);
    for (std::size_t i = 0; i < stats.counts.size(); ++i) {
      if (stats.counts[i] == 1) return static_cast<int>(i);
    }
    return -1;
  };
  CHECK(bin_of(0.0) == 0);
  CHECK(bin_of(0.55) == 5);
  CHECK(bin_of(9.5) == 18);
  CHECK(bin_of(25.0) == 19);  // overflow bin
  const ClipStats empty = clip_stats(PerExampleGrads(0, 3), 0.5);
  CHECK(empty.clip_fraction == 0.0);
}

TEST_CASE("successive-direction cosine handles the degenerate cases") {
  Eigen::VectorXd u(3), v(3);
  u << 1.0, 0.0, 0.0;
  v << 2.0, 0.0, 0.0;
  bool valid = false;
  CHECK(ascent_cosine(u, v, &valid) == doctest::Approx(1.0));
  CHECK(valid);
  CHECK(ascent_cosine(u, -v) == doctest::Approx(-1.0));
  Eigen::VectorXd ortho(3);
  ortho << 0.0, 3.0, 0.0;
  CHECK(ascent_cosine(u, ortho) == doctest::Approx(0.0));
  CHECK(ascent_cosine(Eigen::VectorXd::Zero(3), v, &valid) == 0.0);
  CHECK_FALSE(valid);
}

TEST_CASE("the loss surface grid pins the unperturbed point exactly") {
  const DiagQuadraticModel model(Eigen::VectorXd::Constant(4, 1.0));
  const ExampleBatch batch = make_batch(Eigen::MatrixXd::Random(6, 4));
  Eigen::VectorXd w(4);
  w << 0.3, -0.6, 0.1, 0.8;
  RngStream rng(7, StreamPurpose::kAnalysis, 0);
  const LandscapeGrid grid = surface_grid(model, w, batch, 0.5, 5, rng);
  REQUIRE(grid.a_values.size() == 5);
  CHECK(grid.a_values[2] == 0.0);
  CHECK(grid.b_values[2] == 0.0);
  CHECK(grid.a_values.front() == doctest::Approx(-0.5));
  CHECK(grid.a_values.back() == doctest::Approx(0.5));
  CHECK(grid.losses(2, 2) == mean_loss(model, w, batch));

  RngStream rng2(7, StreamPurpose::kAnalysis, 0);
  CHECK_THROWS_AS(surface_grid(model, w, batch, 0.5, 4, rng2), ContractViolation);
  CHECK_THROWS_AS(surface_grid(model, w, batch, 0.5, 1, rng2), ContractViolation);
}

TEST_CASE("grid directions match the weight norm of each block") {
  // Two blocks of different scale: the direction must adopt each block's
  // weight norm rather than one global scale.
  class TwoBlockModel : public DiagQuadraticModel {
   public:
    TwoBlockModel() : DiagQuadraticModel(Eigen::VectorXd::Constant(6, 1.0)) {}
    std::vector<ParamBlock> parameter_blocks() const override {
      return {{0, 3, "first", 0}, {3, 3, "second", 0}};
    }
  };
  const TwoBlockModel model;
  const ExampleBatch batch = make_batch(Eigen::MatrixXd::Random(2, 6));
  Eigen::VectorXd w(6);
  w << 10.0, 0.0, 0.0, 0.01, 0.0, 0.0;
  RngStream rng(8, StreamPurpose::kAnalysis, 0);
  const LandscapeGrid grid = surface_grid(model, w, batch, 0.1, 3, rng);
  CHECK(grid.d1.segment(0, 3).norm() == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(grid.d1.segment(3, 3).norm() == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(grid.d2.segment(0, 3).norm() == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("interpolation endpoints reproduce the endpoint losses") {
  const DiagQuadraticModel model(Eigen::VectorXd::Constant(3, 1.0));
  const ExampleBatch train = make_batch(Eigen::MatrixXd::Random(5, 3));
  const ExampleBatch test = make_batch(Eigen::MatrixXd::Random(4, 3));
  Eigen::VectorXd w(3), w_prime(3);
  w << 0.1, 0.2, 0.3;
  w_prime << -0.5, 0.7, 0.0;
  const std::vector<double> alphas = {0.0, 0.25, 1.0};
  const auto points = interpolate(model, w, w_prime, alphas, train, test);
  REQUIRE(points.size() == 3);
  CHECK(points[0].alpha == 0.0);
  CHECK(points[0].train_loss == mean_loss(model, w, train));
  CHECK(points[0].test_loss == mean_loss(model, w, test));
  CHECK(points[2].train_loss == mean_loss(model, w_prime, train));
  const Eigen::VectorXd mid = 0.75 * w + 0.25 * w_prime;
  CHECK(points[1].train_loss == doctest::Approx(mean_loss(model, mid, train)).epsilon(1e-12));

  CHECK_THROWS_AS(
      interpolate(model, w, Eigen::VectorXd::Zero(4), alphas, train, test),
      ContractViolation);
}

TEST_CASE("log-spaced histograms separate the nonpositive tail") {
  const std::vector<double> values = {-1.0, 0.0, 0.001, 0.01, 0.1, 1.0, 10.0};
  const LogHistogram hist = log_spaced_histogram(values, 10);
  CHECK(hist.nonpositive == 2);
  REQUIRE(hist.edges.size() == 11);
  CHECK(hist.edges.front() == doctest::Approx(0.001));
  CHECK(hist.edges.back() == doctest::Approx(10.0));
  std::int64_t total = 0;
  for (const auto c : hist.counts) total += c;
  CHECK(total == 5);
  for (std::size_t i = 1; i < hist.edges.size(); ++i) {
    CHECK(hist.edges[i] > hist.edges[i - 1]);
  }

  const std::vector<double> flat = {2.5};
  const LogHistogram single = log_spaced_histogram(flat, 4);
  std::int64_t single_total = 0;
  for (const auto c : single.counts) single_total += c;
  CHECK(single_total == 1);

  const std::vector<double> none = {-3.0, 0.0};
  const LogHistogram empty = log_spaced_histogram(none, 4);
  CHECK(empty.nonpositive == 2);
  CHECK(empty.edges.empty());

  CHECK_THROWS_AS(log_spaced_histogram(values, 0), ContractViolation);
}

// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Release gate. Twelve checks cover the clipping law, ledger arithmetic, the
// accountant against closed forms, the spectral and gradient diagnostics
// against dense and finite-difference oracles, the optimizer equivalences,
// the toy-landscape protocol, and the end-to-end accuracy/sharpness trends.
// Each check prints one PASS/FAIL line with its runtime; the process exit
// code is the number of failures, so the binary serves both as a ctest entry
// and as a standalone smoke command. Checks that ship with an explicit time
// budget fail when they exceed it.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dpsharp/analysis.hpp"
#include "dpsharp/config.hpp"
#include "dpsharp/dataset.hpp"
#include "dpsharp/metrics_io.hpp"
#include "dpsharp/model.hpp"
#include "dpsharp/optimizer.hpp"
#include "dpsharp/privacy.hpp"
#include "dpsharp/rdp.hpp"
#include "dpsharp/rng.hpp"
#include "dpsharp/toy2d.hpp"
#include "dpsharp/train.hpp"
#include "support/oracles.hpp"
#include "support/test_models.hpp"

namespace fs = std::filesystem;

namespace {

using namespace dpsharp;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Shared plumbing: scratch space, CLI invocation, small numeric helpers.

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path("acceptance_scratch") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  static int invocation = 0;
  const fs::path capture = fs::path("acceptance_scratch") /
                           fmt::format("capture_{}.txt", invocation++);
  fs::create_directories(capture.parent_path());
  const std::string command = std::string(DPSHARP_CLI_PATH) + " " + args + " > " +
                              capture.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = slurp(capture);
  return result;
}

bool bit_equal(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

ExampleBatch random_batch(RngStream& rng, Eigen::Index rows, int dim, int classes) {
  ExampleBatch batch;
  batch.features.resize(rows, dim);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) batch.features(i, j) = rng.next_gaussian();
  batch.labels.resize(static_cast<std::size_t>(rows));
  for (auto& label : batch.labels)
    label = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
  batch.indices.resize(static_cast<std::size_t>(rows));
  std::iota(batch.indices.begin(), batch.indices.end(), 0);
  return batch;
}

// ---------------------------------------------------------------------------
// 1. Clipping: norm cap, direction preservation, removed mass.

bool check_clipping(std::string& detail) {
  RngStream rng(101, StreamPurpose::kAnalysis, 0);
  const std::array<double, 3> clips = {0.1, 1.0, 10.0};
  double worst_cap = -kInf;
  double worst_dir = 0.0;
  double worst_mass = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.next_below(40));
    const double scale = std::min(std::exp(1.5 * rng.next_gaussian()), 20.0);
    Eigen::VectorXd g(dim);
    for (Eigen::Index j = 0; j < dim; ++j) g[j] = scale * rng.next_gaussian();
    const double g_norm = g.norm();
    for (const double c : clips) {
      const ParamVector clipped = clip(g, c);
      worst_cap = std::max(worst_cap, clipped.norm() - c);
      if (g_norm > 0.0 && clipped.norm() > 0.0) {
        worst_dir = std::max(
            worst_dir, (g / g_norm - clipped / clipped.norm()).norm());
      }
      const double removed = (g - clipped).norm();
      worst_mass = std::max(worst_mass,
                            std::abs(removed - std::max(0.0, g_norm - c)));
    }
  }
  detail = fmt::format("cap overshoot {:.1e}, direction drift {:.1e}, mass error {:.1e}",
                       worst_cap, worst_dir, worst_mass);
  return worst_cap <= 1e-12 && worst_dir <= 1e-12 && worst_mass <= 1e-12;
}

// ---------------------------------------------------------------------------
// 2. Ledger totals after 100 steps: the two-query rule costs exactly double,
// the stored-gradient rule costs exactly the plain rate.

bool check_ledger_totals(std::string& detail) {
  const test::DiagQuadraticModel model((Eigen::VectorXd(4) << 1.0, 2.5, 0.7, 1.8).finished());
  RngStream data_rng(202, StreamPurpose::kInit, 0);
  const ExampleBatch batch = random_batch(data_rng, 6, 4, 2);
  ParamVector w0(4);
  for (Eigen::Index j = 0; j < 4; ++j) w0[j] = data_rng.next_gaussian();

  HyperParams hp;
  hp.learning_rate = 0.2;
  hp.radius = 0.3;
  hp.base_momentum = 0.9;
  hp.clip_norm = 0.5;
  hp.noise_multiplier = 0.8;
  const PrivacyBudget per_query{0.0123, 3.7e-9};

  BudgetLedger sgd_ledger(CompositionMode::kGeneral);
  BudgetLedger sam_ledger(CompositionMode::kGeneral);
  BudgetLedger sat_ledger(CompositionMode::kGeneral);
  OptimizerState sgd_state = OptimizerState::fresh(w0);
  OptimizerState sam_state = OptimizerState::fresh(w0);
  OptimizerState sat_state = OptimizerState::fresh(w0);
  for (std::int64_t t = 1; t <= 100; ++t) {
    RngStream n1(202, StreamPurpose::kNoise, static_cast<std::uint64_t>(t));
    RngStream n2(202, StreamPurpose::kNoise, static_cast<std::uint64_t>(t));
    RngStream n3(202, StreamPurpose::kNoise, static_cast<std::uint64_t>(t));
    dpsgd_step(sgd_state, model, batch, hp, sgd_ledger, per_query, n1);
    dpsam_step(sam_state, model, batch, hp, sam_ledger, per_query, n2);
    dpsat_step(sat_state, model, batch, hp, sat_ledger, per_query, n3);
  }
  const PrivacyBudget sgd_total = sgd_ledger.total();
  const PrivacyBudget sam_total = sam_ledger.total();
  const PrivacyBudget sat_total = sat_ledger.total();
  const bool counts_ok = sgd_ledger.query_count() == 100 &&
                         sam_ledger.query_count() == 200 &&
                         sat_ledger.query_count() == 100 &&
                         sat_ledger.postprocessing_count() == 100;
  const bool doubling_ok = sam_total.eps == 2.0 * sgd_total.eps &&
                           sam_total.delta == 2.0 * sgd_total.delta;
  const bool parity_ok = sat_total.eps == sgd_total.eps &&
                         sat_total.delta == sgd_total.delta;
  detail = fmt::format("eps {:.4f} / {:.4f} / {:.4f}, queries 100/200/100",
                       sgd_total.eps, sam_total.eps, sat_total.eps);
  return counts_ok && doubling_ok && parity_ok;
}

// ---------------------------------------------------------------------------
// 3. Equal-budget trade-off factors at delta = 1e-5.

bool check_tradeoff_factors(std::string& detail) {
  const TradeoffFactors factors = sam_tradeoff_factors(1e-5);
  detail = fmt::format("noise {:.4f} (target 2.06), iterations {:.4f} (target 0.24)",
                       factors.noise_factor, factors.iteration_factor);
  return std::abs(factors.noise_factor - 2.06) <= 0.01 &&
         std::abs(factors.iteration_factor - 0.24) <= 0.01;
}

// ---------------------------------------------------------------------------
// 4. Accountant vs the closed-form Gaussian bound, plus grid monotonicity.
// At q = 1 the optimal-order epsilon has the closed form
// 1/(2 sigma^2) + sqrt(2 ln(1/delta))/sigma; the fixed order grid can only
// sit above it, and must stay within 5%.

bool check_accountant(std::string& detail) {
  const double delta = 1e-5;
  double worst_rel = 0.0;
  for (const double sigma : {0.5, 1.0, 2.0, 4.0}) {
    const RdpCurve curve = rdp_subsampled_gaussian(1.0, sigma);
    const double grid_eps = rdp_to_dp(curve, 1, delta);
    const double analytic =
        1.0 / (2.0 * sigma * sigma) + std::sqrt(2.0 * std::log(1.0 / delta)) / sigma;
    worst_rel = std::max(worst_rel, std::abs(grid_eps - analytic) / analytic);
  }
  const bool closed_form_ok = worst_rel <= 0.05;

  const std::array<std::int64_t, 5> steps = {1, 10, 100, 1000, 5000};
  const std::array<double, 5> rates = {0.01, 0.05, 0.1, 0.3, 0.6};
  const std::array<double, 5> sigmas = {0.6, 1.0, 2.0, 4.0, 8.0};
  double eps[5][5][5];
  for (int qi = 0; qi < 5; ++qi) {
    for (int si = 0; si < 5; ++si) {
      const RdpCurve curve = rdp_subsampled_gaussian(rates[qi], sigmas[si]);
      for (int ti = 0; ti < 5; ++ti) {
        eps[ti][qi][si] = rdp_to_dp(curve, steps[ti], delta);
      }
    }
  }
  const auto leq = [](double a, double b) {
    return a <= b + 1e-9 * std::max(1.0, std::abs(b));
  };
  bool monotone = true;
  for (int ti = 0; ti < 5; ++ti) {
    for (int qi = 0; qi < 5; ++qi) {
      for (int si = 0; si < 5; ++si) {
        if (ti > 0 && !leq(eps[ti - 1][qi][si], eps[ti][qi][si])) monotone = false;
        if (qi > 0 && !leq(eps[ti][qi - 1][si], eps[ti][qi][si])) monotone = false;
        if (si > 0 && !leq(eps[ti][qi][si], eps[ti][qi][si - 1])) monotone = false;
      }
    }
  }
  detail = fmt::format("closed-form gap {:.2f}% (cap 5%), grid monotone: {}",
                       100.0 * worst_rel, monotone ? "yes" : "no");
  return closed_form_ok && monotone;
}

// ---------------------------------------------------------------------------
// 5. k-fold composition against an independently scripted evaluation.

bool check_advanced_composition(std::string& detail) {
  RngStream rng(505, StreamPurpose::kAnalysis, 0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::int64_t k = 1 + static_cast<std::int64_t>(rng.next_below(1000));
    const double eps = 1e-3 + 0.499 * rng.next_unit();
    const double delta = std::pow(10.0, -9.0 + 6.0 * rng.next_unit());
    const double delta_prime = std::pow(10.0, -9.0 + 6.0 * rng.next_unit());
    const PrivacyBudget lib = advanced_compose(k, eps, delta, delta_prime);
    double eps_ref = 0.0;
    double delta_ref = 0.0;
    test::scripted_advanced_composition(k, eps, delta, delta_prime, &eps_ref, &delta_ref);
    worst = std::max(worst, std::abs(lib.eps - eps_ref));
    worst = std::max(worst, std::abs(lib.delta - delta_ref));
  }
  detail = fmt::format("largest deviation {:.2e} over 20 tuples (cap 1e-10)", worst);
  return worst <= 1e-10;
}

// ---------------------------------------------------------------------------
// 6. Power iteration vs a dense eigensolver on random symmetric matrices.

bool check_spectral(std::string& detail) {
  RngStream rng(606, StreamPurpose::kAnalysis, 0);
  PowerIterationOptions opts;
  opts.tol = 1e-10;
  opts.max_iters = 50000;
  double worst_rel = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.next_below(46));
    Eigen::MatrixXd raw(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) raw(r, c) = rng.next_gaussian();
    const Eigen::MatrixXd sym = 0.5 * (raw + raw.transpose());
    const test::MatrixOperator op(sym);
    const std::vector<double> reference = test::dense_top_eigs(sym, 5);
    const double scale = std::max(std::abs(reference[0]), 1e-12);

    const double top = lambda_max(op, opts, rng);
    worst_rel = std::max(worst_rel, std::abs(top - reference[0]) / scale);
    const SpectrumReport report = top_k_eigs(op, 5, opts, rng);
    for (int j = 0; j < 5; ++j) {
      worst_rel = std::max(
          worst_rel, std::abs(report.eigenvalues[static_cast<std::size_t>(j)] -
                              reference[static_cast<std::size_t>(j)]) / scale);
    }
  }
  detail = fmt::format("worst relative error {:.2e} over 20 matrices (cap 1e-6)", worst_rel);
  return worst_rel <= 1e-6;
}

// ---------------------------------------------------------------------------
// 7. Analytic gradients vs central finite differences for every model.

bool check_gradients(std::string& detail) {
  RngStream rng(707, StreamPurpose::kAnalysis, 0);
  double worst = 0.0;

  const auto check_model = [&](const Model& model, int classes) {
    const Eigen::Index p = model.parameter_count();
    for (int i = 0; i < 100; ++i) {
      const ExampleBatch batch = random_batch(rng, 4, model.feature_dim(), classes);
      ParamVector w(p);
      for (Eigen::Index j = 0; j < p; ++j) w[j] = 0.5 * rng.next_gaussian();
      const ParamVector analytic = mean_grad(model, w, batch);
      const ParamVector fd = test::fd_gradient(model, w, batch);
      worst = std::max(worst, (analytic - fd).norm() / std::max(fd.norm(), 1e-10));
    }
  };
  check_model(LogisticModel(6, 3), 3);
  check_model(MlpModel(5, 7, 3), 3);

  // The 2D landscape has cone points at the two basin centers; sample the
  // square but stay off the tips, where no derivative exists to check.
  const Toy2dModel landscape(Toy2dVariant::kCorrected);
  const ExampleBatch point = toy2d_batch();
  for (int i = 0; i < 100; ++i) {
    ParamVector w(2);
    do {
      w[0] = 10.0 * rng.next_unit();
      w[1] = 10.0 * rng.next_unit();
    } while ((w - ParamVector(Toy2dModel::flat_center())).norm() < 0.1 ||
             (w - ParamVector(Toy2dModel::sharp_center())).norm() < 0.1);
    const ParamVector analytic = mean_grad(landscape, w, point);
    const ParamVector fd = test::fd_gradient(landscape, w, point);
    worst = std::max(worst, (analytic - fd).norm() / std::max(fd.norm(), 1e-10));
  }
  detail = fmt::format("worst relative error {:.2e} over 300 points (cap 1e-5)", worst);
  return worst <= 1e-5;
}

// ---------------------------------------------------------------------------
// 8. The toy-landscape protocol through the real CLI: in each basin the loss
// increase under matched noise correlates with curvature, and the flat basin
// drifts less than the sharp one, for every seed.

bool check_toy_basins(std::string& detail) {
  const fs::path dir = scratch("toy");
  const std::string expected_header =
      "step,lambda_flat,delta_flat,loss_flat,lambda_sharp,delta_sharp,loss_sharp";
  double worst_corr = 1.0;
  double smallest_gap = kInf;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const fs::path csv = dir / fmt::format("toy_{}.csv", seed);
    const CommandResult run =
        run_cli(fmt::format("toy --seed {} --out {}", seed, csv.string()));
    if (run.exit_code != 0) {
      detail = fmt::format("seed {}: toy exited {}", seed, run.exit_code);
      return false;
    }
    std::ifstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != expected_header) {
      detail = fmt::format("seed {}: unexpected CSV header", seed);
      return false;
    }
    std::vector<double> lambda_flat, delta_flat, lambda_sharp, delta_sharp;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> fields = split_line(line, ',');
      if (fields.size() != 7) {
        detail = fmt::format("seed {}: malformed CSV row", seed);
        return false;
      }
      lambda_flat.push_back(std::stod(fields[1]));
      delta_flat.push_back(std::stod(fields[2]));
      lambda_sharp.push_back(std::stod(fields[4]));
      delta_sharp.push_back(std::stod(fields[5]));
    }
    if (lambda_flat.size() < 10) {
      detail = fmt::format("seed {}: only {} rows", seed, lambda_flat.size());
      return false;
    }
    const double corr_flat = test::pearson_ref(lambda_flat, delta_flat);
    const double corr_sharp = test::pearson_ref(lambda_sharp, delta_sharp);
    const double gap = mean_of(delta_sharp) - mean_of(delta_flat);
    worst_corr = std::min({worst_corr, corr_flat, corr_sharp});
    smallest_gap = std::min(smallest_gap, gap);
    if (!(corr_flat > 0.5 && corr_sharp > 0.5 && gap > 0.0)) {
      detail = fmt::format("seed {}: corr {:.3f}/{:.3f}, drift gap {:.5f}",
                           seed, corr_flat, corr_sharp, gap);
      return false;
    }
  }
  detail = fmt::format("5/5 seeds; worst corr {:.3f}, smallest drift gap {:.4f}",
                       worst_corr, smallest_gap);
  return true;
}

// ---------------------------------------------------------------------------
// 9. Stored-gradient degenerations: first step and the rho = 0 limit match
// the plain private rule bit for bit, and the step costs one gradient pass
// where the two-query rule costs two.

bool check_degenerations(std::string& detail) {
  const test::DiagQuadraticModel model((Eigen::VectorXd(3) << 1.3, 0.7, 2.1).finished());
  RngStream data_rng(909, StreamPurpose::kInit, 0);
  const ExampleBatch batch = random_batch(data_rng, 5, 3, 2);
  ParamVector w0(3);
  for (Eigen::Index j = 0; j < 3; ++j) w0[j] = data_rng.next_gaussian();
  const PrivacyBudget per_query{0.01, 1e-8};

  HyperParams hp;
  hp.learning_rate = 0.3;
  hp.radius = 0.4;
  hp.base_momentum = 0.9;
  hp.clip_norm = 0.5;
  hp.noise_multiplier = 0.8;

  // (a) First step: the stored gradient is still zero, so no perturbation.
  OptimizerState first_sgd = OptimizerState::fresh(w0);
  OptimizerState first_sat = OptimizerState::fresh(w0);
  BudgetLedger first_ledger_a(CompositionMode::kGeneral);
  BudgetLedger first_ledger_b(CompositionMode::kGeneral);
  {
    RngStream na(21, StreamPurpose::kNoise, 1);
    RngStream nb(21, StreamPurpose::kNoise, 1);
    dpsgd_step(first_sgd, model, batch, hp, first_ledger_a, per_query, na);
    dpsat_step(first_sat, model, batch, hp, first_ledger_b, per_query, nb);
  }
  const bool first_ok = bit_equal(first_sgd.w, first_sat.w) &&
                        bit_equal(first_sgd.velocity, first_sat.velocity);

  // (b) rho = 0: the perturbation vanishes on every step.
  HyperParams flat = hp;
  flat.radius = 0.0;
  OptimizerState run_sgd = OptimizerState::fresh(w0);
  OptimizerState run_sat = OptimizerState::fresh(w0);
  BudgetLedger run_ledger_a(CompositionMode::kGeneral);
  BudgetLedger run_ledger_b(CompositionMode::kGeneral);
  bool rho_zero_ok = true;
  for (std::int64_t t = 1; t <= 100; ++t) {
    RngStream na(22, StreamPurpose::kNoise, static_cast<std::uint64_t>(t));
    RngStream nb(22, StreamPurpose::kNoise, static_cast<std::uint64_t>(t));
    dpsgd_step(run_sgd, model, batch, flat, run_ledger_a, per_query, na);
    dpsat_step(run_sat, model, batch, flat, run_ledger_b, per_query, nb);
    if (!bit_equal(run_sgd.w, run_sat.w)) rho_zero_ok = false;
  }

  // (c) Gradient passes per step: one for the stored-gradient rule, two for
  // the fresh-perturbation rule.
  const test::CountingModel counted(model);
  BudgetLedger count_ledger(CompositionMode::kGeneral);
  OptimizerState count_state = OptimizerState::fresh(w0);
  counted.reset();
  for (std::int64_t t = 1; t <= 50; ++t) {
    RngStream noise(23, StreamPurpose::kNoise, static_cast<std::uint64_t>(t));
    dpsat_step(count_state, counted, batch, hp, count_ledger, per_query, noise);
  }
  const long sat_calls = counted.grad_calls();
  counted.reset();
  count_state = OptimizerState::fresh(w0);
  BudgetLedger count_ledger_b(CompositionMode::kGeneral);
  for (std::int64_t t = 1; t <= 50; ++t) {
    RngStream noise(23, StreamPurpose::kNoise, static_cast<std::uint64_t>(t));
    dpsam_step(count_state, counted, batch, hp, count_ledger_b, per_query, noise);
  }
  const long sam_calls = counted.grad_calls();
  const bool cost_ok = sat_calls == 50 && sam_calls == 100;

  detail = fmt::format("first step {}, rho=0 trace {}, passes/step 1 vs 2 ({}/{} over 50)",
                       first_ok ? "bit-equal" : "DIFFERS",
                       rho_zero_ok ? "bit-equal" : "DIFFERS", sat_calls, sam_calls);
  return first_ok && rho_zero_ok && cost_ok;
}

// ---------------------------------------------------------------------------
// 10 and 11. The trend suite: five seeds, two budgets, plain vs
// stored-gradient training on blobs with a planted sharp cluster. Criterion
// 10 checks accuracy, end-of-training curvature, and ascent-direction drift
// vs clipping; criterion 11 reuses the same runs for clip-fraction decay.

struct TrendRun {
  std::uint64_t seed = 0;
  OptimizerKind kind = OptimizerKind::kDpSgd;
  double eps_target = 0.0;
  double final_acc = 0.0;
  std::vector<double> epoch_clip;
  double lambda_mean = kNaN;
};

std::vector<TrendRun> g_trend;

RunConfig trend_config(OptimizerKind kind, double eps, std::uint64_t seed) {
  RunConfig config;
  config.model = ModelKind::kMlp;
  config.hidden = 4;
  config.dataset = DatasetKind::kSynth;
  config.synth_n = 5120;
  config.synth_dim = 2;
  config.synth_classes = 2;
  config.synth_separation = 4.0;
  config.synth_scale_sigma = 1.0;
  config.synth_cluster_fraction = 0.08;
  config.synth_cluster_offset = 0.3;
  config.synth_cluster_radius = 0.3;
  config.train_fraction = 0.8;
  config.optimizer = kind;
  config.learning_rate = 0.08;
  config.momentum = 0.0;
  config.rho = kind == OptimizerKind::kDpSat ? 0.2 : 0.0;
  config.clip_norm = 0.1;
  config.epsilon = eps;
  config.noise_multiplier = -1.0;
  config.delta = 1e-5;
  config.accounting = CompositionMode::kRenyi;
  config.epochs = 20;
  config.batch_size = 8;
  config.sampling = SamplingMode::kPoisson;
  config.seed = seed;
  config.seed_set = true;
  config.out_dir = "";
  return config;
}

// Mean largest Hessian eigenvalue over the last ten epoch-end checkpoints,
// measured on a fixed train subsample.
double late_training_curvature(const RunConfig& config,
                               const std::vector<ParamVector>& checkpoints) {
  const Dataset data = build_dataset(config);
  const auto model = build_model(config, data);
  const Eigen::Index rows =
      std::min<Eigen::Index>(config.hessian_subsample, data.train_count);
  std::vector<std::int64_t> indices(static_cast<std::size_t>(rows));
  std::iota(indices.begin(), indices.end(), 0);
  const ExampleBatch batch = data.batch(indices);
  PowerIterationOptions opts;
  opts.tol = 1e-6;
  opts.max_iters = 3000;
  double sum = 0.0;
  int count = 0;
  const std::size_t first = checkpoints.size() > 10 ? checkpoints.size() - 10 : 0;
  for (std::size_t i = first; i < checkpoints.size(); ++i) {
    const HvpOperator hvp(*model, checkpoints[i], batch);
    const HvpLinearOperator op(hvp);
    RngStream rng(config.seed, StreamPurpose::kAnalysis, 900 + i);
    sum += lambda_max(op, opts, rng);
    ++count;
  }
  return sum / count;
}

const TrendRun* find_trend_run(OptimizerKind kind, double eps, std::uint64_t seed) {
  for (const TrendRun& run : g_trend) {
    if (run.kind == kind && run.eps_target == eps && run.seed == seed) return &run;
  }
  return nullptr;
}

double mean_ascent_cosine(const TrainResult& result) {
  double sum = 0.0;
  int count = 0;
  for (const MetricsRow& row : result.metrics) {
    if (row.ascent_cosine) {
      sum += *row.ascent_cosine;
      ++count;
    }
  }
  return count > 0 ? sum / count : kNaN;
}

bool check_trend_suite(std::string& detail) {
  g_trend.clear();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const double eps : {1.0, 3.0}) {
      for (const OptimizerKind kind : {OptimizerKind::kDpSgd, OptimizerKind::kDpSat}) {
        const RunConfig config = trend_config(kind, eps, seed);
        const TrainResult result = train(config);
        TrendRun run;
        run.seed = seed;
        run.kind = kind;
        run.eps_target = eps;
        run.final_acc = result.final_test_accuracy;
        run.epoch_clip = result.epoch_clip_fraction;
        if (eps == 3.0) {
          run.lambda_mean = late_training_curvature(config, result.epoch_end_weights);
        }
        g_trend.push_back(std::move(run));
      }
    }
  }

  const auto mean_acc = [](OptimizerKind kind, double eps) {
    double sum = 0.0;
    int count = 0;
    for (const TrendRun& run : g_trend) {
      if (run.kind == kind && run.eps_target == eps) {
        sum += run.final_acc;
        ++count;
      }
    }
    return sum / count;
  };
  const double acc_sgd_1 = mean_acc(OptimizerKind::kDpSgd, 1.0);
  const double acc_sat_1 = mean_acc(OptimizerKind::kDpSat, 1.0);
  const double acc_sgd_3 = mean_acc(OptimizerKind::kDpSgd, 3.0);
  const double acc_sat_3 = mean_acc(OptimizerKind::kDpSat, 3.0);
  const bool acc_ok =
      acc_sat_1 >= acc_sgd_1 - 0.005 && acc_sat_3 >= acc_sgd_3 - 0.005;

  int flatter_seeds = 0;
  double lambda_sgd_sum = 0.0;
  double lambda_sat_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TrendRun* sgd = find_trend_run(OptimizerKind::kDpSgd, 3.0, seed);
    const TrendRun* sat = find_trend_run(OptimizerKind::kDpSat, 3.0, seed);
    lambda_sgd_sum += sgd->lambda_mean;
    lambda_sat_sum += sat->lambda_mean;
    if (sat->lambda_mean <= sgd->lambda_mean) ++flatter_seeds;
  }
  const bool lambda_ok = flatter_seeds >= 4;

  // Ascent-direction drift vs clipping: noiseless stored-gradient arms, two
  // epochs each; tighter clipping should homogenize successive released
  // gradients and raise the mean cosine.
  const std::array<double, 4> arm_clips = {1e30, 1.0, 0.5, 0.1};
  std::array<double, 4> arm_cosines{};
  for (std::size_t i = 0; i < arm_clips.size(); ++i) {
    RunConfig config = trend_config(OptimizerKind::kDpSat, 3.0, 1);
    config.rho = 0.0;
    config.epsilon = 0.0;
    config.noise_multiplier = 0.0;
    config.clip_norm = arm_clips[i];
    config.epochs = 2;
    arm_cosines[i] = mean_ascent_cosine(train(config));
  }
  const bool cosine_ok = arm_cosines[0] < arm_cosines[1] &&
                         arm_cosines[1] < arm_cosines[2] &&
                         arm_cosines[2] < arm_cosines[3];

  detail = fmt::format(
      "acc e1 {:.3f}/{:.3f} e3 {:.3f}/{:.3f} (stored/plain), curvature {:.2f}/{:.2f} "
      "flatter {}/5, cosine {:.3f}<{:.3f}<{:.3f}<{:.3f}: {}",
      acc_sat_1, acc_sgd_1, acc_sat_3, acc_sgd_3, lambda_sat_sum / 5.0,
      lambda_sgd_sum / 5.0, flatter_seeds, arm_cosines[0], arm_cosines[1],
      arm_cosines[2], arm_cosines[3], cosine_ok ? "yes" : "no");
  return acc_ok && lambda_ok && cosine_ok;
}

bool check_clip_decay(std::string& detail) {
  if (g_trend.empty()) {
    detail = "trend runs unavailable (previous check did not complete)";
    return false;
  }
  int decaying_seeds = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    bool all_decay = true;
    for (const TrendRun& run : g_trend) {
      if (run.seed != seed) continue;
      if (run.epoch_clip.size() < 2 ||
          !(run.epoch_clip.front() > run.epoch_clip.back())) {
        all_decay = false;
      }
    }
    if (all_decay) ++decaying_seeds;
  }
  const TrendRun* sample = find_trend_run(OptimizerKind::kDpSat, 3.0, 1);
  detail = fmt::format("{}/5 seeds decay on every arm; e.g. {:.3f} -> {:.3f}",
                       decaying_seeds, sample->epoch_clip.front(),
                       sample->epoch_clip.back());
  return decaying_seeds >= 4;
}

// ---------------------------------------------------------------------------
// 12. Training twice with one config and seed produces byte-identical
// outputs, through the real CLI.

bool check_rerun_identical(std::string& detail) {
  const fs::path dir = scratch("rerun");
  const fs::path cfg = dir / "train.cfg";
  {
    std::ofstream out(cfg);
    out << "model = mlp\n"
           "hidden = 4\n"
           "dataset = synth\n"
           "synth_n = 64\n"
           "synth_dim = 3\n"
           "synth_classes = 2\n"
           "synth_separation = 4\n"
           "optimizer = dpsgd\n"
           "learning_rate = 0.1\n"
           "momentum = 0.9\n"
           "clip_norm = 0.1\n"
           "noise_multiplier = 1\n"
           "delta = 1e-5\n"
           "epochs = 2\n"
           "batch_size = 16\n";
  }
  const fs::path out_a = dir / "a";
  const fs::path out_b = dir / "b";
  const CommandResult first = run_cli(fmt::format(
      "train --config {} --seed 77 --set out_dir={}", cfg.string(), out_a.string()));
  const CommandResult second = run_cli(fmt::format(
      "train --config {} --seed 77 --set out_dir={}", cfg.string(), out_b.string()));
  if (first.exit_code != 0 || second.exit_code != 0) {
    detail = fmt::format("train exited {} then {}", first.exit_code, second.exit_code);
    return false;
  }
  const std::string metrics_a = slurp(out_a / "metrics.csv");
  const std::string metrics_b = slurp(out_b / "metrics.csv");
  const std::string weights_a = slurp(out_a / "weights.bin");
  const std::string weights_b = slurp(out_b / "weights.bin");
  const bool ok = !metrics_a.empty() && metrics_a == metrics_b &&
                  !weights_a.empty() && weights_a == weights_b;
  detail = fmt::format("metrics {} bytes, weights {} bytes, reruns {}",
                       metrics_a.size(), weights_a.size(),
                       ok ? "identical" : "DIFFER");
  return ok;
}

// ---------------------------------------------------------------------------

struct Criterion {
  const char* name;
  double time_limit;  // seconds; 0 means no explicit budget
  std::function<bool(std::string&)> run;
};

}  // namespace

int main() {
  fs::remove_all("acceptance_scratch");
  fs::create_directories("acceptance_scratch");

  const std::vector<Criterion> criteria = {
      {"clipping: cap, direction, removed mass", 1.0, check_clipping},
      {"ledger: two-query doubling, reuse parity", 1.0, check_ledger_totals},
      {"equal-budget trade-off factors", 0.0, check_tradeoff_factors},
      {"accountant vs analytic Gaussian bound", 10.0, check_accountant},
      {"k-fold composition vs scripted formula", 0.0, check_advanced_composition},
      {"power iteration vs dense eigensolver", 5.0, check_spectral},
      {"analytic gradients vs finite differences", 0.0, check_gradients},
      {"toy landscape: flatter basin, smaller drift", 30.0, check_toy_basins},
      {"stored-gradient reuse degenerations", 0.0, check_degenerations},
      {"trend suite: accuracy, curvature, drift", 600.0, check_trend_suite},
      {"clip fraction decays from epoch 1 to final", 0.0, check_clip_decay},
      {"train CLI reruns are byte-identical", 0.0, check_rerun_identical},
  };

  int failures = 0;
  fmt::print("dpsharp acceptance: {} checks\n", criteria.size());
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& err) {
      detail = fmt::format("exception: {}", err.what());
      ok = false;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && criteria[i].time_limit > 0.0 && seconds > criteria[i].time_limit) {
      ok = false;
      detail += fmt::format(" [exceeded the {:.0f}s budget]", criteria[i].time_limit);
    }
    fmt::print("{:>2}. {}  {:<44} {:>8.2f}s  {}\n", i + 1, ok ? "PASS" : "FAIL",
               criteria[i].name, seconds, detail);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  fmt::print("{} of {} checks passed\n", criteria.size() - failures, criteria.size());
  return failures;
}

// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Every subcommand resolves its settings as
// defaults -> --config file -> individual flags, and all failures map to
// the documented exit codes: 0 success, 2 configuration or input error,
// 3 privacy budget exhausted, 4 numeric failure.

#include <atomic>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "dpsharp/analysis.hpp"
#include "dpsharp/metrics_io.hpp"
#include "dpsharp/rdp.hpp"
#include "dpsharp/toy_protocol.hpp"
#include "dpsharp/train.hpp"

namespace {

using namespace dpsharp;

// Shared --config/--set/--seed plumbing for subcommands that run or rebuild
// a training configuration.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "config file (key = value lines)");
    cmd.add_option("--set", overrides, "override, repeatable: --set key=value");
    cmd.add_option("--seed", seed, "run seed");
  }

  RunConfig resolve(bool require_seed) const {
    RunConfig config;
    if (!config_path.empty()) config = load_config(config_path);
    apply_overrides(config, overrides);
    if (seed.has_value()) {
      config.seed = *seed;
      config.seed_set = true;
    }
    if (require_seed && !config.seed_set) {
      throw ConfigError("a seed is required: pass --seed or a config with a seed key");
    }
    return config;
  }
};

int worker_count() {
  const char* env = std::getenv("DP_SHARP_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

// Loads weights and checks the length against the model.
ParamVector weights_for(const Model& model, const std::string& path) {
  ParamVector w = read_weights(path);
  if (w.size() != model.parameter_count()) {
    throw ConfigError(fmt::format("weights file '{}' has {} parameters, model needs {}",
                                  path, w.size(), model.parameter_count()));
  }
  return w;
}

// Leading train rows used for curvature estimates; documented fixed choice.
ExampleBatch hessian_batch(const Dataset& data, std::int64_t cap) {
  std::vector<std::int64_t> rows;
  const Eigen::Index count = std::min<Eigen::Index>(data.train_count, cap);
  for (Eigen::Index i = 0; i < count; ++i) rows.push_back(i);
  return data.batch(rows);
}

void write_text_or_print(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    fmt::print("{}", content);
  } else {
    atomic_write_text(out_path, content);
  }
}

int cmd_calibrate(double eps, double delta, double q, std::int64_t steps) {
  const double sigma = calibrate_sigma({eps, delta}, q, steps);
  fmt::print("{},{},{},{},{},renyi\n", format_double(eps), format_double(delta),
             format_double(q), steps, format_double(sigma));
  return 0;
}

int cmd_train(const ConfigArgs& args) {
  const RunConfig config = args.resolve(/*require_seed=*/true);
  const TrainResult result = train(config);
  fmt::print("steps={} skipped={} train_loss={} test_loss={} test_acc={} eps={} delta={} sigma={}\n",
             result.steps_run, result.skipped_steps,
             format_double(result.final_train_loss), format_double(result.final_test_loss),
             format_double(result.final_test_accuracy), format_double(result.spent.eps),
             format_double(result.spent.delta), format_double(result.sigma));
  if (result.halted_on_budget) {
    fmt::print(stderr, "error: privacy budget cap reached after {} steps\n",
               result.steps_run);
    return 3;
  }
  return 0;
}

int cmd_toy(std::uint64_t seed, const ToyProtocolParams& params, const std::string& out) {
  const ToyRunResult result = run_toy_protocol(seed, params);
  std::string csv =
      "step,lambda_flat,delta_flat,loss_flat,lambda_sharp,delta_sharp,loss_sharp\n";
  for (const ToyStepRecord& r : result.records) {
    csv += fmt::format("{},{},{},{},{},{},{}\n", r.step, format_double(r.lambda_flat),
                       format_double(r.delta_flat), format_double(r.loss_flat),
                       format_double(r.lambda_sharp), format_double(r.delta_sharp),
                       format_double(r.loss_sharp));
  }
  write_text_or_print(out, csv);
  fmt::print("corr_flat={} corr_sharp={} mean_delta_flat={} mean_delta_sharp={}\n",
             format_double(result.corr_flat), format_double(result.corr_sharp),
             format_double(result.mean_delta_flat), format_double(result.mean_delta_sharp));
  return 0;
}

int cmd_spectrum(const ConfigArgs& args, const std::string& weights_path, int k,
                 double tol, const std::string& out) {
  const RunConfig config = args.resolve(/*require_seed=*/true);
  const Dataset data = build_dataset(config);
  const auto model = build_model(config, data);
  const ParamVector w = weights_for(*model, weights_path);
  const ExampleBatch batch = hessian_batch(data, config.hessian_subsample);
  const HvpOperator hvp(*model, w, batch);
  const HvpLinearOperator op(hvp);
  PowerIterationOptions opts;
  opts.tol = tol;
  RngStream rng(config.seed, StreamPurpose::kAnalysis, 0);
  const SpectrumReport report = top_k_eigs(op, k, opts, rng);
  std::string csv = "rank,eigenvalue,residual,iterations,converged\n";
  for (std::size_t i = 0; i < report.eigenvalues.size(); ++i) {
    csv += fmt::format("{},{},{},{},{}\n", i + 1, format_double(report.eigenvalues[i]),
                       format_double(report.residuals[i]), report.iterations[i],
                       report.converged ? 1 : 0);
  }
  write_text_or_print(out, csv);
  return 0;
}

int cmd_surface(const ConfigArgs& args, const std::string& weights_path, double extent,
                int grid_steps, const std::string& out) {
  const RunConfig config = args.resolve(/*require_seed=*/true);
  const Dataset data = build_dataset(config);
  const auto model = build_model(config, data);
  const ParamVector w = weights_for(*model, weights_path);
  const ExampleBatch batch =
      config.model == ModelKind::kToy2d ? toy2d_batch() : data.train_batch();
  RngStream rng(config.seed, StreamPurpose::kAnalysis, 0);
  const LandscapeGrid grid = surface_grid(*model, w, batch, extent, grid_steps, rng);
  std::string csv = "a,b,loss\n";
  for (std::size_t i = 0; i < grid.a_values.size(); ++i) {
    for (std::size_t j = 0; j < grid.b_values.size(); ++j) {
      csv += fmt::format("{},{},{}\n", format_double(grid.a_values[i]),
                         format_double(grid.b_values[j]),
                         format_double(grid.losses(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(j))));
    }
  }
  write_text_or_print(out, csv);
  return 0;
}

int cmd_interpolate(const ConfigArgs& args, const std::string& weights_a,
                    const std::string& weights_b, double alpha_min, double alpha_max,
                    int points, const std::string& out) {
  if (points < 2) throw ConfigError("interpolation needs at least 2 points");
  const RunConfig config = args.resolve(/*require_seed=*/true);
  const Dataset data = build_dataset(config);
  const auto model = build_model(config, data);
  const ParamVector wa = weights_for(*model, weights_a);
  const ParamVector wb = weights_for(*model, weights_b);
  std::vector<double> alphas(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    alphas[static_cast<std::size_t>(i)] =
        alpha_min + (alpha_max - alpha_min) * static_cast<double>(i) / (points - 1);
  }
  const auto curve =
      interpolate(*model, wa, wb, alphas, data.train_batch(), data.test_batch());
  std::string csv = "alpha,train_loss,train_acc,test_loss,test_acc\n";
  for (const InterpolationPoint& p : curve) {
    csv += fmt::format("{},{},{},{},{}\n", format_double(p.alpha),
                       format_double(p.train_loss), format_double(p.train_accuracy),
                       format_double(p.test_loss), format_double(p.test_accuracy));
  }
  write_text_or_print(out, csv);
  return 0;
}

// Ascent-direction cosine sweep: short noise-free drift runs, one per
// (clip norm, batch size) pair, reporting the mean cosine of successive
// released gradients. "inf" disables clipping via an astronomically large C.
int cmd_cosine(const ConfigArgs& args, const std::vector<std::string>& clip_list,
               const std::vector<std::int64_t>& batch_list, const std::string& out) {
  std::string csv = "clip_norm,batch_size,mean_ascent_cosine,steps\n";
  for (const std::int64_t batch : batch_list) {
    for (const std::string& clip_text : clip_list) {
      RunConfig config = args.resolve(/*require_seed=*/true);
      config.out_dir.clear();
      // The sweep protocol pins everything that is not being swept: dpsat
      // descent on released gradients, no ascent offset, no noise, and no
      // momentum smoothing, so the cosine isolates clipping and batch size.
      config.optimizer = OptimizerKind::kDpSat;
      config.rho = 0.0;
      config.epsilon = 0.0;
      config.noise_multiplier = 0.0;
      config.momentum = 0.0;
      config.batch_size = batch;
      config.clip_norm =
          (clip_text == "inf") ? 1e30 : parse_double_strict(clip_text, "--clip value");
      const TrainResult result = train(config);
      double acc = 0.0;
      std::int64_t count = 0;
      for (const MetricsRow& row : result.metrics) {
        if (row.ascent_cosine.has_value()) {
          acc += *row.ascent_cosine;
          count += 1;
        }
      }
      csv += fmt::format("{},{},{},{}\n", clip_text, batch,
                         count > 0 ? format_double(acc / static_cast<double>(count)) : "",
                         count);
    }
  }
  write_text_or_print(out, csv);
  return 0;
}

// Independent per-seed runs, DP_SHARP_THREADS workers. Each run writes into
// <out_base>/seed_<seed>/ and failures surface after all workers finish.
int cmd_sweep(const ConfigArgs& args, const std::vector<std::uint64_t>& seeds,
              const std::string& out_base) {
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  struct Slot {
    std::uint64_t seed = 0;
    std::string summary;
    std::string error;
  };
  std::vector<Slot> slots(seeds.size());
  std::atomic<std::size_t> next{0};
  const int workers = std::min<int>(worker_count(), static_cast<int>(seeds.size()));

  auto body = [&]() {
    for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) {
      Slot& slot = slots[i];
      slot.seed = seeds[i];
      try {
        RunConfig config = args.resolve(/*require_seed=*/false);
        config.seed = seeds[i];
        config.seed_set = true;
        config.out_dir = fmt::format("{}/seed_{}", out_base, seeds[i]);
        const TrainResult result = train(config);
        slot.summary = fmt::format("{},{},{},{}", seeds[i],
                                   format_double(result.final_test_accuracy),
                                   format_double(result.spent.eps),
                                   result.halted_on_budget ? "halted" : "ok");
      } catch (const std::exception& err) {
        slot.error = err.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < workers; ++i) pool.emplace_back(body);
  body();
  for (std::thread& th : pool) th.join();

  fmt::print("seed,final_test_acc,eps_spent,status\n");
  int failures = 0;
  for (const Slot& slot : slots) {
    if (!slot.error.empty()) {
      fmt::print(stderr, "seed {}: error: {}\n", slot.seed, slot.error);
      ++failures;
    } else {
      fmt::print("{}\n", slot.summary);
    }
  }
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private optimization with sharpness diagnostics"};
  app.require_subcommand(1);

  // calibrate
  auto* calibrate_cmd =
      app.add_subcommand("calibrate", "noise multiplier for a privacy budget");
  double cal_eps = 1.0, cal_delta = 1e-5, cal_q = 0.01;
  std::int64_t cal_steps = 1000;
  calibrate_cmd->add_option("--eps", cal_eps, "target epsilon")->required();
  calibrate_cmd->add_option("--delta", cal_delta, "target delta")->required();
  calibrate_cmd->add_option("--q", cal_q, "sampling rate")->required();
  calibrate_cmd->add_option("--steps", cal_steps, "total steps")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "run a configured training loop");
  ConfigArgs train_args;
  train_args.attach(*train_cmd);

  // toy
  auto* toy_cmd =
      app.add_subcommand("toy", "matched-noise descent in the flat and sharp basins");
  std::uint64_t toy_seed = 0;
  ToyProtocolParams toy_params;
  std::string toy_variant = "corrected";
  std::string toy_out = "toy.csv";
  toy_cmd->add_option("--seed", toy_seed, "noise seed")->required();
  toy_cmd->add_option("--steps", toy_params.steps, "steps per basin");
  toy_cmd->add_option("--eta", toy_params.learning_rate, "step size");
  toy_cmd->add_option("--clip", toy_params.clip_norm, "clip norm");
  toy_cmd->add_option("--sigma", toy_params.noise_multiplier, "noise multiplier");
  toy_cmd->add_option("--radius", toy_params.start_radius, "start distance from centers");
  toy_cmd->add_option("--variant", toy_variant, "landscape variant: corrected | as-printed");
  toy_cmd->add_option("--out", toy_out, "output CSV path ('-' prints)");

  // spectrum
  auto* spectrum_cmd =
      app.add_subcommand("spectrum", "top Hessian eigenvalues at saved weights");
  ConfigArgs spectrum_args;
  spectrum_args.attach(*spectrum_cmd);
  std::string spectrum_weights;
  int spectrum_k = 5;
  double spectrum_tol = 1e-8;
  std::string spectrum_out;
  spectrum_cmd->add_option("--weights", spectrum_weights, "weights file")->required();
  spectrum_cmd->add_option("--k", spectrum_k, "eigenvalue count");
  spectrum_cmd->add_option("--tol", spectrum_tol, "power-iteration tolerance");
  spectrum_cmd->add_option("--out", spectrum_out, "output CSV path (default: print)");

  // surface
  auto* surface_cmd =
      app.add_subcommand("surface", "loss on a 2D slice around saved weights");
  ConfigArgs surface_args;
  surface_args.attach(*surface_cmd);
  std::string surface_weights;
  double surface_extent = 1.0;
  int surface_grid_steps = 21;
  std::string surface_out = "surface.csv";
  surface_cmd->add_option("--weights", surface_weights, "weights file")->required();
  surface_cmd->add_option("--extent", surface_extent, "half-width of the slice");
  surface_cmd->add_option("--grid", surface_grid_steps, "grid points per axis (odd)");
  surface_cmd->add_option("--out", surface_out, "output CSV path ('-' prints)");

  // interpolate
  auto* interp_cmd =
      app.add_subcommand("interpolate", "loss along the segment between two weights");
  ConfigArgs interp_args;
  interp_args.attach(*interp_cmd);
  std::string interp_a, interp_b;
  double interp_min = 0.0, interp_max = 1.0;
  int interp_points = 25;
  std::string interp_out;
  interp_cmd->add_option("--weights-a", interp_a, "first weights file")->required();
  interp_cmd->add_option("--weights-b", interp_b, "second weights file")->required();
  interp_cmd->add_option("--alpha-min", interp_min, "start of the alpha range");
  interp_cmd->add_option("--alpha-max", interp_max, "end of the alpha range");
  interp_cmd->add_option("--points", interp_points, "number of alphas");
  interp_cmd->add_option("--out", interp_out, "output CSV path (default: print)");

  // cosine
  auto* cosine_cmd = app.add_subcommand(
      "cosine", "mean ascent-direction cosine versus clip norm and batch size");
  ConfigArgs cosine_args;
  cosine_args.attach(*cosine_cmd);
  std::vector<std::string> cosine_clips = {"inf", "1", "0.5", "0.1"};
  std::vector<std::int64_t> cosine_batches = {8};
  std::string cosine_out;
  cosine_cmd->add_option("--clip", cosine_clips, "clip norms to sweep ('inf' allowed)");
  cosine_cmd->add_option("--batch", cosine_batches, "batch sizes to sweep");
  cosine_cmd->add_option("--out", cosine_out, "output CSV path (default: print)");

  // sweep
  auto* sweep_cmd =
      app.add_subcommand("sweep", "independent seed sweep (DP_SHARP_THREADS workers)");
  ConfigArgs sweep_args;
  sweep_args.attach(*sweep_cmd);
  std::vector<std::uint64_t> sweep_seeds;
  std::string sweep_out_base = "sweep";
  sweep_cmd->add_option("--seeds", sweep_seeds, "seeds to run")->required();
  sweep_cmd->add_option("--out-base", sweep_out_base, "parent directory for run outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    // --help lands here with exit code 0; real parse errors map to the
    // configuration error code.
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (calibrate_cmd->parsed()) return cmd_calibrate(cal_eps, cal_delta, cal_q, cal_steps);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (toy_cmd->parsed()) {
      if (toy_variant == "corrected") {
        toy_params.variant = Toy2dVariant::kCorrected;
      } else if (toy_variant == "as-printed") {
        toy_params.variant = Toy2dVariant::kAsPrinted;
      } else {
        throw ConfigError(fmt::format(
            "unknown variant '{}' (valid: corrected, as-printed)", toy_variant));
      }
      return cmd_toy(toy_seed, toy_params, toy_out);
    }
    if (spectrum_cmd->parsed()) {
      return cmd_spectrum(spectrum_args, spectrum_weights, spectrum_k, spectrum_tol,
                          spectrum_out);
    }
    if (surface_cmd->parsed()) {
      return cmd_surface(surface_args, surface_weights, surface_extent,
                         surface_grid_steps, surface_out);
    }
    if (interp_cmd->parsed()) {
      return cmd_interpolate(interp_args, interp_a, interp_b, interp_min, interp_max,
                             interp_points, interp_out);
    }
    if (cosine_cmd->parsed()) return cmd_cosine(cosine_args, cosine_clips, cosine_batches, cosine_out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, sweep_seeds, sweep_out_base);
    throw ContractViolation("no subcommand dispatched");
  } catch (const BudgetExhausted& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 3;
  } catch (const NumericError& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 4;
  } catch (const ConfigError& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 2;
  } catch (const FormatError& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 2;
  } catch (const ContractViolation& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    fmt::print(stderr, "unexpected error: {}\n", err.what());
    return 1;
  }
}

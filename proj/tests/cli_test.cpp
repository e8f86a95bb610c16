// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end tests of the installed command surface: exit codes, output
// files, and the one-line summaries, all through a real subprocess.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dpsharp/metrics_io.hpp"
#include "support/subprocess.hpp"

using dpsharp::test::CommandResult;
using dpsharp::test::run_cli;
using dpsharp::test::scratch_dir;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Value following `key=` in a summary line, up to the next space or newline.
double summary_value(const std::string& output, const std::string& key) {
  const auto at = output.find(key + "=");
  REQUIRE(at != std::string::npos);
  const auto begin = at + key.size() + 1;
  const auto end = output.find_first_of(" \n", begin);
  return std::stod(output.substr(begin, end - begin));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, sep)) fields.push_back(field);
  return fields;
}

// Writes the small private-training config used by the subcommand tests and
// returns the config path; outputs land in <dir>/run.
std::filesystem::path write_train_config(const std::filesystem::path& dir) {
  const auto path = dir / "run.cfg";
  std::ofstream out(path);
  out << "model = mlp\n"
         "hidden = 4\n"
         "dataset = synth\n"
         "synth_n = 64\n"
         "synth_dim = 3\n"
         "synth_classes = 2\n"
         "synth_separation = 4\n"
         "optimizer = dpsgd\n"
         "learning_rate = 0.1\n"
         "clip_norm = 0.1\n"
         "noise_multiplier = 1\n"
         "epochs = 2\n"
         "batch_size = 16\n"
      << "out_dir = " << (dir / "run").string() << "\n";
  return path;
}

}  // namespace

TEST_CASE("cli: help exits cleanly and a missing subcommand does not") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
}

TEST_CASE("cli: training requires an explicit seed") {
  const auto dir = scratch_dir("cli_no_seed");
  const auto cfg = write_train_config(dir);
  const CommandResult r = run_cli("train --config " + cfg.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("seed") != std::string::npos);
}

TEST_CASE("cli: a configured run trains and writes its outputs") {
  const auto dir = scratch_dir("cli_train");
  const auto cfg = write_train_config(dir);
  const CommandResult r = run_cli("train --config " + cfg.string() + " --seed 9");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("steps=8") != std::string::npos);
  CHECK(summary_value(r.output, "eps") > 0.0);
  CHECK(summary_value(r.output, "sigma") == 1.0);
  CHECK(std::filesystem::exists(dir / "run" / "metrics.csv"));
  CHECK(std::filesystem::exists(dir / "run" / "weights.bin"));
  CHECK(std::filesystem::exists(dir / "run" / "meta.cfg"));
}

TEST_CASE("cli: identical invocations write identical bytes") {
  const auto dir_a = scratch_dir("cli_repeat_a");
  const auto dir_b = scratch_dir("cli_repeat_b");
  const auto cfg_a = write_train_config(dir_a);
  const auto cfg_b = write_train_config(dir_b);
  REQUIRE(run_cli("train --config " + cfg_a.string() + " --seed 31").exit_code == 0);
  REQUIRE(run_cli("train --config " + cfg_b.string() + " --seed 31").exit_code == 0);
  CHECK(slurp(dir_a / "run" / "metrics.csv") == slurp(dir_b / "run" / "metrics.csv"));
  CHECK(slurp(dir_a / "run" / "weights.bin") == slurp(dir_b / "run" / "weights.bin"));
}

TEST_CASE("cli: config mistakes map to the configuration exit code") {
  const auto dir = scratch_dir("cli_config_errors");
  const auto cfg = write_train_config(dir);
  CHECK(run_cli("train --config " + cfg.string() + " --seed 1 --set frob=1").exit_code == 2);
  CHECK(run_cli("train --config " + cfg.string() + " --seed 1 --set epsilon=2").exit_code ==
        2);  // both a budget and a noise multiplier
  CHECK(run_cli("train --config no_such_file.cfg --seed 1").exit_code == 2);
}

TEST_CASE("cli: the budget cap maps to its own exit code") {
  const auto dir = scratch_dir("cli_cap");
  const auto cfg = write_train_config(dir);
  const CommandResult r = run_cli("train --config " + cfg.string() +
                                  " --seed 4 --set max_epsilon=1 --set epochs=20");
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("budget cap") != std::string::npos);
}

TEST_CASE("cli: calibration prints one machine-readable line") {
  const CommandResult r = run_cli("calibrate --eps 2 --delta 1e-5 --q 0.042 --steps 720");
  REQUIRE(r.exit_code == 0);
  const std::string line = r.output.substr(0, r.output.find('\n'));
  const std::vector<std::string> fields = split(line, ',');
  REQUIRE(fields.size() == 6);
  CHECK(fields[0] == "2");
  CHECK(fields[3] == "720");
  CHECK(fields[5] == "renyi");
  const double sigma = std::stod(fields[4]);
  CHECK(std::abs(sigma - 2.9856) < 2e-3 * 2.9856);
}

TEST_CASE("cli: an unreachable privacy target is a configuration error") {
  CHECK(run_cli("calibrate --eps 1e-9 --delta 1e-5 --q 0.042 --steps 720").exit_code == 2);
}

TEST_CASE("cli: the two-basin descent comparison favors the flat basin") {
  const auto dir = scratch_dir("cli_toy");
  const auto csv_path = dir / "toy.csv";
  const CommandResult r = run_cli("toy --seed 7 --out " + csv_path.string());
  REQUIRE(r.exit_code == 0);
  const double flat = summary_value(r.output, "mean_delta_flat");
  const double sharp = summary_value(r.output, "mean_delta_sharp");
  CHECK(flat < sharp);

  const std::string csv = slurp(csv_path);
  CHECK(csv.rfind("step,lambda_flat,delta_flat,loss_flat,lambda_sharp,delta_sharp,loss_sharp\n",
                  0) == 0);
  // Header plus one record per step.
  const std::vector<std::string> lines = split(csv, '\n');
  CHECK(lines.size() >= 251);
}

TEST_CASE("cli: spectrum, surface, and interpolation read saved weights") {
  const auto dir = scratch_dir("cli_analysis");
  const auto cfg = write_train_config(dir);
  REQUIRE(run_cli("train --config " + cfg.string() + " --seed 9").exit_code == 0);
  const std::string weights = (dir / "run" / "weights.bin").string();
  const std::string shared = " --config " + cfg.string() + " --seed 9 ";

  const auto spectrum_csv = dir / "spectrum.csv";
  REQUIRE(run_cli("spectrum" + shared + "--weights " + weights +
                  " --k 3 --out " + spectrum_csv.string())
              .exit_code == 0);
  const std::vector<std::string> spec_lines = split(slurp(spectrum_csv), '\n');
  REQUIRE(spec_lines.size() >= 4);
  CHECK(spec_lines[0] == "rank,eigenvalue,residual,iterations,converged");
  const double e1 = std::stod(split(spec_lines[1], ',')[1]);
  const double e2 = std::stod(split(spec_lines[2], ',')[1]);
  const double e3 = std::stod(split(spec_lines[3], ',')[1]);
  const double slack = 1e-6 * std::max(std::abs(e1), 1.0);
  CHECK(e1 >= e2 - slack);
  CHECK(e2 >= e3 - slack);

  const auto surface_csv = dir / "surface.csv";
  REQUIRE(run_cli("surface" + shared + "--weights " + weights +
                  " --extent 0.5 --grid 5 --out " + surface_csv.string())
              .exit_code == 0);
  const std::vector<std::string> surf_lines = split(slurp(surface_csv), '\n');
  CHECK(surf_lines[0] == "a,b,loss");
  CHECK(surf_lines.size() == 1 + 25);  // header plus the 5x5 grid
  bool has_origin = false;
  for (std::size_t i = 1; i < surf_lines.size(); ++i) {
    if (surf_lines[i].rfind("0,0,", 0) == 0) has_origin = true;
  }
  CHECK(has_origin);

  const auto interp_csv = dir / "interp.csv";
  REQUIRE(run_cli("interpolate" + shared + "--weights-a " + weights + " --weights-b " +
                  weights + " --points 5 --out " + interp_csv.string())
              .exit_code == 0);
  const std::vector<std::string> interp_lines = split(slurp(interp_csv), '\n');
  CHECK(interp_lines[0] == "alpha,train_loss,train_acc,test_loss,test_acc");
  REQUIRE(interp_lines.size() >= 6);
  CHECK(split(interp_lines[1], ',')[0] == "0");
  CHECK(split(interp_lines[5], ',')[0] == "1");
  // Identical endpoints: the segment is one point, so the loss is constant.
  CHECK(split(interp_lines[1], ',')[1] == split(interp_lines[5], ',')[1]);

  CHECK(run_cli("interpolate" + shared + "--weights-a " + weights + " --weights-b " +
                weights + " --points 1")
            .exit_code == 2);
  CHECK(run_cli("surface" + shared + "--weights " + weights + " --grid 4").exit_code == 2);

  const auto stub = dir / "short.bin";
  dpsharp::write_weights(stub.string(), Eigen::VectorXd::Ones(3));
  const CommandResult mismatch =
      run_cli("spectrum" + shared + "--weights " + stub.string());
  CHECK(mismatch.exit_code == 2);
  CHECK(mismatch.output.find("parameters") != std::string::npos);
}

TEST_CASE("cli: the cosine sweep reports one row per clip norm") {
  const auto dir = scratch_dir("cli_cosine");
  const auto cfg = write_train_config(dir);
  const auto csv_path = dir / "cosine.csv";
  const CommandResult r =
      run_cli("cosine --config " + cfg.string() +
              " --seed 5 --set epochs=1 --set batch_size=8 --clip inf 0.1 --out " +
              csv_path.string());
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> lines = split(slurp(csv_path), '\n');
  CHECK(lines[0] == "clip_norm,batch_size,mean_ascent_cosine,steps");
  REQUIRE(lines.size() >= 3);
  const std::vector<std::string> first = split(lines[1], ',');
  const std::vector<std::string> second = split(lines[2], ',');
  CHECK(first[0] == "inf");
  CHECK(second[0] == "0.1");
  CHECK(std::stod(first[2]) >= -1.0);
  CHECK(std::stod(first[2]) <= 1.0);
}

TEST_CASE("cli: the seed sweep runs every seed into its own directory") {
  const auto dir = scratch_dir("cli_sweep");
  const auto cfg = write_train_config(dir);
  setenv("DP_SHARP_THREADS", "2", 1);
  const CommandResult r = run_cli("sweep --config " + cfg.string() +
                                  " --seeds 1 2 --out-base " + (dir / "sweep").string());
  unsetenv("DP_SHARP_THREADS");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("seed,final_test_acc,eps_spent,status") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "sweep" / "seed_1" / "metrics.csv"));
  CHECK(std::filesystem::exists(dir / "sweep" / "seed_2" / "metrics.csv"));
  CHECK(r.output.find(",ok") != std::string::npos);
}

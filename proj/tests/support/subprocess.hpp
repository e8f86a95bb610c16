// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal subprocess helper for exercising the built CLI binary. The binary
// path arrives through the DPSHARP_CLI_PATH compile definition.

#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace dpsharp::test {

inline const char* cli_path() { return DPSHARP_CLI_PATH; }

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

// Fresh scratch directory under the test working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path("scratch") / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline CommandResult run_cli(const std::string& args) {
  static int invocation = 0;
  const std::filesystem::path capture =
      std::filesystem::path("scratch") / ("capture_" + std::to_string(invocation++) + ".txt");
  std::filesystem::create_directories(capture.parent_path());
  const std::string command =
      std::string(cli_path()) + " " + args + " > " + capture.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(capture);
  std::stringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

}  // namespace dpsharp::test

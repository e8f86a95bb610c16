// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared error taxonomy and version string. Every error a caller can act on
// maps to one of these types; the CLI turns them into stable exit codes.

#pragma once

#include <stdexcept>
#include <string>

namespace dpsharp {

inline constexpr const char* kVersion = "0.1.0";

// Caller passed arguments that violate a documented precondition
// (dimension mismatch, empty batch, bad hyperparameter range, ...).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Invalid run configuration: unknown key, missing required key,
// mutually inconsistent settings. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed external input file (IDX, weights, config syntax).
// Reported with the offending offset/line. CLI exit code 2.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// A computation produced NaN/Inf or otherwise left its numeric contract.
// CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// No noise multiplier in the search interval meets the privacy target.
// Treated as a configuration problem. CLI exit code 2.
class CalibrationInfeasible : public ConfigError {
 public:
  explicit CalibrationInfeasible(const std::string& what) : ConfigError(what) {}
};

// A capped ledger ran out of privacy budget; training halts cleanly with
// partial outputs. CLI exit code 3.
class BudgetExhausted : public std::runtime_error {
 public:
  explicit BudgetExhausted(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dpsharp

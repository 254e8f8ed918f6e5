// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cpl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Out-of-range or malformed argument.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Soft value iteration did not reach the requested tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// An advantage table violates sum_a exp(A(s,a) / alpha) = 1.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on numerical inputs does not hold.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Instance exceeds a configured size cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Configuration file or override is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Optimization produced a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Pipeline failure tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace cpl

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace crrcd {

/// Raised when a caller breaks an operation's precondition (shape mismatch,
/// wrong embedding source, out-of-range label, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The eligible negative pool is smaller than the number of negatives asked for.
class InsufficientNegatives : public std::runtime_error {
 public:
  InsufficientNegatives(std::size_t pool_size, std::size_t requested);

  std::size_t pool_size() const noexcept { return pool_size_; }
  std::size_t requested() const noexcept { return requested_; }

 private:
  std::size_t pool_size_;
  std::size_t requested_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config validation failure. Carries every offending field, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Non-finite loss during training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long long step, const std::string& what);

  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

#define CRRCD_REQUIRE(cond, msg)                                        \
  do {                                                                  \
    if (!(cond)) throw ::crrcd::ContractViolation(std::string(msg));    \
  } while (false)

}  // namespace crrcd

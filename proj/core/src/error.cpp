// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/error.hpp"

#include <fmt/format.h>

namespace crrcd {

InsufficientNegatives::InsufficientNegatives(std::size_t pool_size, std::size_t requested)
    : std::runtime_error(fmt::format(
          "insufficient negatives: eligible pool has {} records, {} requested", pool_size,
          requested)),
      pool_size_(pool_size),
      requested_(requested) {}

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("{}:{}: {}", source, line, what)), line_(line) {}

namespace {
std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  - " + p;
  return out;
}
}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

DivergenceError::DivergenceError(long long step, const std::string& what)
    : std::runtime_error(fmt::format("training diverged at step {}: {}", step, what)), step_(step) {}

}  // namespace crrcd

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/rng.hpp"

#include <sstream>

#include "crrcd/error.hpp"

namespace crrcd {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(Rng& rng, double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  CRRCD_REQUIRE(n > 0, "uniform_index over an empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::string save_rng(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng load_rng(const std::string& state) {
  std::istringstream in(state);
  Rng rng;
  in >> rng;
  if (!in) throw ParseError("rng state", 0, "malformed generator state");
  return rng;
}

}  // namespace crrcd

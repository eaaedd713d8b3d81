// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace crrcd {

/// Every stochastic decision in a run draws from one of these, seeded from the
/// experiment seed. Distributions are constructed per draw so that the engine
/// state alone captures the stream position.
using Rng = std::mt19937_64;

/// Independent stream for a named purpose; same (seed, stream) gives the same engine.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

double uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng, double mean = 0.0, double stddev = 1.0);
/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

std::string save_rng(const Rng& rng);
Rng load_rng(const std::string& state);

}  // namespace crrcd

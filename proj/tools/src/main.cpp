// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include <iostream>

#include "crrcd/cli.hpp"

int main(int argc, char** argv) {
  return crrcd::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

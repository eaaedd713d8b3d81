// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace crrcd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

/// Environment variable that relative output paths are resolved against.
inline constexpr const char* kOutputRootEnv = "CRRCD_OUTPUT_ROOT";

/// Runs one command line (args[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Resolves a relative output path against $CRRCD_OUTPUT_ROOT when it is set.
std::filesystem::path output_path(const std::filesystem::path& p);

}  // namespace crrcd::cli

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace crrcd {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Git-style content hash: SHA-256 over "blob <size>\0<content>".
std::string content_hash(std::string_view content);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace crrcd

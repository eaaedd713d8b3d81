// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <filesystem>

#include "crrcd/data.hpp"

namespace crrcd {

/// 16-bit PNG (gray for 1 channel, RGB for 3). Values are quantized to k/65535.
void write_png16(const std::filesystem::path& path, const Image& image);
Image read_png16(const std::filesystem::path& path);

/// Rounds every pixel to the nearest k/65535 so a PNG round trip is exact.
void quantize16(Image& image);

}  // namespace crrcd

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crrcd/autograd.hpp"

namespace crrcd {

/// Planar CHW image with values in [0, 1].
struct Image {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), pixels(static_cast<std::size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool operator==(const Image&) const = default;
};

enum class DegradeMethod { bilinear };
enum class StudentInput { native, bilinear_upsample };

/// Bilinear resampling with half-pixel-aligned centers: output pixel (y, x)
/// samples the source at ((y + 0.5) * H / H' - 0.5, ...), clamped at borders.
Image resize_bilinear(const Image& src, int out_height, int out_width);

/// Shrinks each spatial dimension by `factor`; dims must divide evenly.
Image degrade(const Image& hi, int factor, DegradeMethod method = DegradeMethod::bilinear);

/// native returns the low-resolution image unchanged; bilinear_upsample
/// resizes it to target_height x target_width.
Image restore_for_student(const Image& lo, int target_height, int target_width, StudentInput mode);

struct PairedSample {
  Image hi;
  Image lo;
  int label = 0;
  std::int64_t sample_id = 0;
};

/// Desk-scale corpus: every class owns a random prototype built from smooth
/// blobs and an oriented grating; samples are jittered, noisy copies.
struct SyntheticSpec {
  int classes = 10;
  int per_class = 100;
  int hires = 32;
  int factor = 4;
  int channels = 1;
  std::uint64_t seed = 5;
  /// Selects an independent draw of samples over the same class prototypes.
  std::uint64_t split = 0;
  std::int64_t id_base = 0;
  double noise = 0.25;
  int max_shift = 2;
  double contrast_jitter = 0.2;
};

std::vector<PairedSample> make_synthetic(const SyntheticSpec& spec);

/// Stacks flattened images as rows.
Tensor to_tensor(std::span<const Image* const> images);

// --- on-disk datasets ----------------------------------------------------

struct DatasetFile {
  std::string path;  // relative to the dataset root
  int label = 0;
  std::int64_t sample_id = 0;
  std::string sha256;
};

struct DatasetManifest {
  std::string root;
  std::string split = "train";
  int classes = 0;
  int channels = 1;
  int hires_height = 0;
  int hires_width = 0;
  int factor = 1;
  std::string degradation = "bilinear-half-pixel";
  std::string student_input = "native";
  std::string source;
  std::string checksum;
  std::vector<DatasetFile> files;

  int lowres_height() const { return hires_height / factor; }
  int lowres_width() const { return hires_width / factor; }
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<PairedSample> samples;

  std::size_t size() const { return samples.size(); }
};

/// SHA-256 over the canonical file table.
std::string file_table_checksum(const std::vector<DatasetFile>& files);

/// Writes <dir>/<label>/<id>.png (16-bit PNG) per sample plus <dir>/manifest.txt.
DatasetManifest write_dataset(const std::filesystem::path& dir, std::span<const PairedSample> samples,
                              DatasetManifest header);

std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text, const std::string& source = "manifest");

/// Loads and validates (per-file hashes and table checksum). Low-resolution
/// views are regenerated with degrade().
Dataset load_dataset(const std::filesystem::path& dir);

/// Reads CIFAR-style binary records: label byte(s) then 3 x 32 x 32 planar bytes.
std::vector<PairedSample> read_cifar_binary(const std::filesystem::path& file, int factor,
                                            int label_bytes = 1, std::int64_t id_base = 0);

// --- verification protocol -----------------------------------------------

struct PairSpec {
  std::int64_t id_a = 0;
  std::int64_t id_b = 0;
  bool same = false;
  bool operator==(const PairSpec&) const = default;
};

/// Whitespace-separated `id_a id_b {0,1}` lines; blank lines are skipped.
std::vector<PairSpec> parse_pairs_protocol(const std::string& text, const std::string& source = "pairs");
std::vector<PairSpec> load_pairs_protocol(const std::filesystem::path& file);
std::string format_pairs_protocol(std::span<const PairSpec> pairs);

/// `count` pairs over distinct samples, alternating same-label and
/// different-label pairs (same first). Needs two samples of some class and two
/// classes.
std::vector<PairSpec> make_pairs(std::span<const PairedSample> samples, std::size_t count, std::uint64_t seed);

}  // namespace crrcd

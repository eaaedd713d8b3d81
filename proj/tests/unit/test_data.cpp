// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>

#include "crrcd/data.hpp"
#include "crrcd/error.hpp"
#include "crrcd/hash.hpp"
#include "crrcd/image_io.hpp"
#include "helpers.hpp"

namespace crrcd {
namespace {

Image random_image(Rng& rng, int c, int h, int w) {
  Image img(c, h, w);
  for (double& p : img.pixels) p = uniform(rng, 0.0, 1.0);
  return img;
}

TEST(Degrade, ConstantImageStaysConstant) {
  for (int f : {1, 2, 4, 8}) {
    const Image lo = degrade(Image(3, 32, 32, 0.7), f);
    ASSERT_EQ(lo.height, 32 / f);
    for (double p : lo.pixels) EXPECT_NEAR(p, 0.7, 1e-15);
  }
}

TEST(Degrade, CheckerboardAveragesToHalf) {
  Image img(1, 2, 2);
  img.pixels = {0.0, 1.0, 1.0, 0.0};
  const Image lo = degrade(img, 2);
  ASSERT_EQ(lo.pixels.size(), 1u);
  EXPECT_DOUBLE_EQ(lo.pixels[0], 0.5);
}

TEST(Degrade, ThirtyTwoToEight) {
  const Image lo = degrade(Image(3, 32, 32, 0.1), 4);
  EXPECT_EQ(lo.channels, 3);
  EXPECT_EQ(lo.height, 8);
  EXPECT_EQ(lo.width, 8);
}

TEST(Degrade, OutputWithinInputRange) {
  Rng rng = make_rng(1, 0);
  for (int t = 0; t < 10; ++t) {
    const Image hi = random_image(rng, 1, 16, 16);
    const auto [lo_in, hi_in] = std::minmax_element(hi.pixels.begin(), hi.pixels.end());
    const Image lo = degrade(hi, 4);
    for (double p : lo.pixels) {
      EXPECT_GE(p, *lo_in);
      EXPECT_LE(p, *hi_in);
    }
    EXPECT_EQ(lo, degrade(hi, 4));
  }
}

TEST(Degrade, RejectsIndivisibleDims) { EXPECT_THROW(degrade(Image(1, 10, 10), 4), ContractViolation); }

TEST(Restore, NativeIsIdentity) {
  Rng rng = make_rng(2, 0);
  const Image lo = random_image(rng, 1, 8, 8);
  EXPECT_EQ(restore_for_student(lo, 32, 32, StudentInput::native), lo);
}

TEST(Restore, UpsampleShapesAndConstants) {
  const Image up = restore_for_student(Image(3, 16, 16, 0.3), 112, 112, StudentInput::bilinear_upsample);
  EXPECT_EQ(up.height, 112);
  EXPECT_EQ(up.width, 112);
  for (double p : up.pixels) EXPECT_NEAR(p, 0.3, 1e-15);
  const Image round = restore_for_student(degrade(Image(1, 32, 32, 0.42), 4), 32, 32, StudentInput::bilinear_upsample);
  for (double p : round.pixels) EXPECT_NEAR(p, 0.42, 1e-15);
}

TEST(Synthetic, DeterministicAndCounted) {
  SyntheticSpec spec;
  spec.per_class = 100;
  const auto a = make_synthetic(spec);
  const auto b = make_synthetic(spec);
  ASSERT_EQ(a.size(), 1000u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].hi, b[i].hi);
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].sample_id, b[i].sample_id);
  }
}

TEST(Synthetic, PairedViewsAgree) {
  SyntheticSpec spec;
  spec.per_class = 5;
  for (const auto& s : make_synthetic(spec)) {
    EXPECT_EQ(s.lo, degrade(s.hi, spec.factor));
    EXPECT_EQ(s.lo.height, spec.hires / spec.factor);
    for (double p : s.hi.pixels) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(Synthetic, NearestCentroidSeparatesHiRes) {
  SyntheticSpec spec;
  spec.per_class = 100;
  const auto samples = make_synthetic(spec);
  const std::size_t dim = samples.front().hi.pixels.size();
  std::vector<std::vector<double>> centroid(10, std::vector<double>(dim, 0.0));
  std::vector<int> count(10, 0);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < dim; ++i) centroid[s.label][i] += s.hi.pixels[i];
    ++count[s.label];
  }
  for (int c = 0; c < 10; ++c) {
    for (double& v : centroid[c]) v /= count[c];
  }
  int correct = 0;
  for (const auto& s : samples) {
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < 10; ++c) {
      double d = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d += (s.hi.pixels[i] - centroid[c][i]) * (s.hi.pixels[i] - centroid[c][i]);
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == s.label;
  }
  EXPECT_GE(correct, 950);
}

TEST(Synthetic, SplitsDiffer) {
  SyntheticSpec spec;
  spec.per_class = 2;
  const auto a = make_synthetic(spec);
  spec.split = 1;
  const auto b = make_synthetic(spec);
  EXPECT_NE(a.front().hi, b.front().hi);
}

TEST(PairsProtocol, EmptyAndDuplicates) {
  EXPECT_TRUE(parse_pairs_protocol("").empty());
  const auto pairs = parse_pairs_protocol("1 2 1\n\n1 2 1\n3 4 0\n");
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0], pairs[1]);
  EXPECT_EQ(pairs[2], (PairSpec{3, 4, false}));
}

TEST(PairsProtocol, SixThousandLines) {
  testing::TempDir dir("pairs");
  std::string text;
  for (int i = 0; i < 6000; ++i) text += std::to_string(i) + " " + std::to_string(i + 1) + " " + (i % 2 ? "0" : "1") + "\n";
  write_file(dir / "pairs.txt", text);
  const auto pairs = load_pairs_protocol(dir / "pairs.txt");
  EXPECT_EQ(pairs.size(), 6000u);
  EXPECT_EQ(format_pairs_protocol(pairs), text);
}

TEST(PairsProtocol, MalformedLineReportsNumber) {
  try {
    parse_pairs_protocol("1 2 1\n3 4\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_pairs_protocol("1 2 7\n"), ParseError);
  EXPECT_THROW(parse_pairs_protocol("a 2 1\n"), ParseError);
}

TEST(MakePairs, AlternatesAndUsesDistinctSamples) {
  SyntheticSpec spec;
  spec.per_class = 4;
  const auto samples = make_synthetic(spec);
  std::map<std::int64_t, int> label;
  for (const auto& s : samples) label[s.sample_id] = s.label;
  const auto pairs = make_pairs(samples, 40, 5);
  ASSERT_EQ(pairs.size(), 40u);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].same, i % 2 == 0);
    EXPECT_NE(pairs[i].id_a, pairs[i].id_b);
    EXPECT_EQ(label.at(pairs[i].id_a) == label.at(pairs[i].id_b), pairs[i].same);
  }
  EXPECT_EQ(pairs, make_pairs(samples, 40, 5));
}

TEST(Dataset, WriteLoadRoundTrip) {
  testing::TempDir dir("dataset");
  SyntheticSpec spec;
  spec.per_class = 3;
  auto samples = make_synthetic(spec);
  DatasetManifest header;
  header.classes = 10;
  header.channels = 1;
  header.hires_height = header.hires_width = 32;
  header.factor = 4;
  const DatasetManifest written = write_dataset(dir.path(), samples, header);
  const Dataset loaded = load_dataset(dir.path());
  EXPECT_EQ(loaded.manifest.checksum, written.checksum);
  EXPECT_EQ(loaded.manifest.lowres_height(), 8);
  ASSERT_EQ(loaded.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Image q = samples[i].hi;
    quantize16(q);
    EXPECT_EQ(loaded.samples[i].hi, q);
    EXPECT_EQ(loaded.samples[i].lo, degrade(q, 4));
    EXPECT_EQ(loaded.samples[i].label, samples[i].label);
    EXPECT_EQ(loaded.samples[i].sample_id, samples[i].sample_id);
  }
  const DatasetManifest again = write_dataset(dir.path() / "again", samples, header);
  EXPECT_EQ(again.checksum, written.checksum);
}

TEST(Dataset, CorruptedFileIsRejected) {
  testing::TempDir dir("corrupt");
  SyntheticSpec spec;
  spec.per_class = 1;
  const auto samples = make_synthetic(spec);
  DatasetManifest header;
  header.classes = 10;
  header.hires_height = header.hires_width = 32;
  header.factor = 4;
  const DatasetManifest m = write_dataset(dir.path(), samples, header);
  std::ofstream(dir.path() / m.files.front().path, std::ios::binary | std::ios::app) << "x";
  EXPECT_THROW(load_dataset(dir.path()), ChecksumError);
}

TEST(Dataset, ManifestRoundTrip) {
  DatasetManifest m;
  m.root = "r";
  m.classes = 3;
  m.hires_height = m.hires_width = 16;
  m.factor = 2;
  m.files = {{"0/1.png", 0, 1, std::string(64, 'a')}, {"2/7.png", 2, 7, std::string(64, 'b')}};
  m.checksum = file_table_checksum(m.files);
  const DatasetManifest back = parse_manifest(format_manifest(m));
  EXPECT_EQ(back.checksum, m.checksum);
  EXPECT_EQ(back.files.size(), 2u);
  EXPECT_EQ(back.files[1].sample_id, 7);
  EXPECT_EQ(back.lowres_width(), 8);
}

TEST(ImageIo, Png16RoundTrip) {
  testing::TempDir dir("png");
  Rng rng = make_rng(3, 0);
  for (int c : {1, 3}) {
    Image img = random_image(rng, c, 5, 7);
    quantize16(img);
    write_png16(dir / "x.png", img);
    EXPECT_EQ(read_png16(dir / "x.png"), img);
  }
}

TEST(Cifar, ReadsBinaryRecords) {
  testing::TempDir dir("cifar");
  std::string bytes;
  for (int r = 0; r < 2; ++r) {
    bytes.push_back(static_cast<char>(r + 3));
    for (int i = 0; i < 3 * 32 * 32; ++i) bytes.push_back(static_cast<char>(r == 0 ? 0 : 255));
  }
  write_file(dir / "data.bin", bytes);
  const auto samples = read_cifar_binary(dir / "data.bin", 4, 1, 10);
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].label, 3);
  EXPECT_EQ(samples[1].sample_id, 11);
  EXPECT_EQ(samples[1].lo.height, 8);
  EXPECT_DOUBLE_EQ(samples[1].hi.pixels[0], 1.0);
  write_file(dir / "bad.bin", bytes.substr(1));
  EXPECT_THROW(read_cifar_binary(dir / "bad.bin", 4), ParseError);
}

}  // namespace
}  // namespace crrcd

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/data.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "crrcd/error.hpp"
#include "crrcd/hash.hpp"
#include "crrcd/image_io.hpp"
#include "crrcd/rng.hpp"

namespace crrcd {

namespace {

// a + w (b - a), kept inside [min(a, b), max(a, b)].
double lerp(double a, double b, double w) {
  return std::clamp(a + w * (b - a), std::min(a, b), std::max(a, b));
}

struct Tap {
  int lo, hi;
  double w;
};

std::vector<Tap> taps(int in, int out) {
  std::vector<Tap> t(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    t[static_cast<std::size_t>(o)] = {lo, std::min(lo + 1, in - 1), src - lo};
  }
  return t;
}

}  // namespace

Image resize_bilinear(const Image& src, int out_height, int out_width) {
  CRRCD_REQUIRE(src.height > 0 && src.width > 0, "resize_bilinear: empty image");
  CRRCD_REQUIRE(out_height > 0 && out_width > 0, "resize_bilinear: empty target");
  const auto ty = taps(src.height, out_height);
  const auto tx = taps(src.width, out_width);
  Image out(src.channels, out_height, out_width);
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < out_height; ++y) {
      const Tap& a = ty[static_cast<std::size_t>(y)];
      for (int x = 0; x < out_width; ++x) {
        const Tap& b = tx[static_cast<std::size_t>(x)];
        const double top = lerp(src.at(c, a.lo, b.lo), src.at(c, a.lo, b.hi), b.w);
        const double bottom = lerp(src.at(c, a.hi, b.lo), src.at(c, a.hi, b.hi), b.w);
        out.at(c, y, x) = lerp(top, bottom, a.w);
      }
    }
  }
  return out;
}

Image degrade(const Image& hi, int factor, DegradeMethod method) {
  CRRCD_REQUIRE(method == DegradeMethod::bilinear, "degrade: unsupported method");
  CRRCD_REQUIRE(factor >= 1, "degrade: factor must be at least 1");
  CRRCD_REQUIRE(hi.height % factor == 0 && hi.width % factor == 0,
                fmt::format("degrade: {}x{} is not divisible by factor {}", hi.height, hi.width, factor));
  return resize_bilinear(hi, hi.height / factor, hi.width / factor);
}

Image restore_for_student(const Image& lo, int target_height, int target_width, StudentInput mode) {
  if (mode == StudentInput::native) return lo;
  return resize_bilinear(lo, target_height, target_width);
}

namespace {

Image make_prototype(const SyntheticSpec& spec, int cls) {
  Rng rng = make_rng(spec.seed, 0x70000u + static_cast<std::uint64_t>(cls));
  const int h = spec.hires;
  Image proto(spec.channels, h, h, 0.5);
  for (int ch = 0; ch < spec.channels; ++ch) {
    for (int blob = 0; blob < 2; ++blob) {
      const double cy = uniform(rng, 0.2 * h, 0.8 * h);
      const double cx = uniform(rng, 0.2 * h, 0.8 * h);
      const double sigma = uniform(rng, 0.08 * h, 0.18 * h);
      const double amp = uniform(rng, 0.2, 0.4) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < h; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          proto.at(ch, y, x) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
        }
      }
    }
    const double angle = uniform(rng, 0.0, std::numbers::pi);
    const double period = uniform(rng, 4.0, 10.0);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < h; ++x) {
        const double t = x * std::cos(angle) + y * std::sin(angle);
        proto.at(ch, y, x) += 0.15 * std::sin(2.0 * std::numbers::pi * t / period + phase);
      }
    }
  }
  return proto;
}

}  // namespace

std::vector<PairedSample> make_synthetic(const SyntheticSpec& spec) {
  CRRCD_REQUIRE(spec.classes >= 2, "make_synthetic: need at least two classes");
  CRRCD_REQUIRE(spec.per_class >= 1, "make_synthetic: need at least one sample per class");
  CRRCD_REQUIRE(spec.channels == 1 || spec.channels == 3, "make_synthetic: channels must be 1 or 3");
  CRRCD_REQUIRE(spec.factor >= 1 && spec.hires % spec.factor == 0,
                "make_synthetic: hires must be divisible by factor");

  std::vector<Image> prototypes;
  prototypes.reserve(static_cast<std::size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) prototypes.push_back(make_prototype(spec, c));

  Rng rng = make_rng(spec.seed, 0x10000u + spec.split);
  const int h = spec.hires;
  std::vector<PairedSample> out;
  out.reserve(static_cast<std::size_t>(spec.classes) * spec.per_class);
  for (int c = 0; c < spec.classes; ++c) {
    const Image& proto = prototypes[static_cast<std::size_t>(c)];
    for (int k = 0; k < spec.per_class; ++k) {
      const int dy = static_cast<int>(uniform_index(rng, 2 * spec.max_shift + 1)) - spec.max_shift;
      const int dx = static_cast<int>(uniform_index(rng, 2 * spec.max_shift + 1)) - spec.max_shift;
      const double contrast = 1.0 + uniform(rng, -spec.contrast_jitter, spec.contrast_jitter);
      Image img(spec.channels, h, h);
      for (int ch = 0; ch < spec.channels; ++ch) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < h; ++x) {
            const int sy = std::clamp(y - dy, 0, h - 1);
            const int sx = std::clamp(x - dx, 0, h - 1);
            const double v = 0.5 + contrast * (proto.at(ch, sy, sx) - 0.5) + normal(rng, 0.0, spec.noise);
            img.at(ch, y, x) = std::clamp(v, 0.0, 1.0);
          }
        }
      }
      quantize16(img);
      PairedSample s;
      s.lo = degrade(img, spec.factor);
      s.hi = std::move(img);
      s.label = c;
      s.sample_id = spec.id_base + static_cast<std::int64_t>(out.size());
      out.push_back(std::move(s));
    }
  }
  return out;
}

Tensor to_tensor(std::span<const Image* const> images) {
  if (images.empty()) return Tensor(0, 0);
  const Index cols = static_cast<Index>(images.front()->pixels.size());
  Tensor out(static_cast<Index>(images.size()), cols);
  for (std::size_t i = 0; i < images.size(); ++i) {
    CRRCD_REQUIRE(static_cast<Index>(images[i]->pixels.size()) == cols, "to_tensor: ragged images");
    std::copy(images[i]->pixels.begin(), images[i]->pixels.end(), out.row(static_cast<Index>(i)).data());
  }
  return out;
}

// --- manifests -------------------------------------------------------------

std::string file_table_checksum(const std::vector<DatasetFile>& files) {
  std::string table;
  for (const auto& f : files) table += fmt::format("{} {} {} {}\n", f.path, f.label, f.sample_id, f.sha256);
  return sha256_hex(table);
}

std::string format_manifest(const DatasetManifest& m) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "format" << YAML::Value << "crrcd-dataset/1";
  out << YAML::Key << "root" << YAML::Value << m.root;
  out << YAML::Key << "split" << YAML::Value << m.split;
  out << YAML::Key << "classes" << YAML::Value << m.classes;
  out << YAML::Key << "channels" << YAML::Value << m.channels;
  out << YAML::Key << "hires_height" << YAML::Value << m.hires_height;
  out << YAML::Key << "hires_width" << YAML::Value << m.hires_width;
  out << YAML::Key << "factor" << YAML::Value << m.factor;
  out << YAML::Key << "lowres_height" << YAML::Value << m.lowres_height();
  out << YAML::Key << "lowres_width" << YAML::Value << m.lowres_width();
  out << YAML::Key << "degradation" << YAML::Value << m.degradation;
  out << YAML::Key << "student_input" << YAML::Value << m.student_input;
  out << YAML::Key << "source" << YAML::Value << m.source;
  out << YAML::Key << "checksum" << YAML::Value << m.checksum;
  out << YAML::Key << "files" << YAML::Value << YAML::BeginSeq;
  for (const auto& f : m.files) {
    out << fmt::format("{} {} {} {}", f.path, f.label, f.sample_id, f.sha256);
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

DatasetManifest parse_manifest(const std::string& text, const std::string& source) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(source, static_cast<std::size_t>(e.mark.line + 1), e.msg);
  }
  auto field = [&](const char* key) {
    const YAML::Node n = doc[key];
    if (!n) throw ParseError(source, 0, fmt::format("missing field '{}'", key));
    return n;
  };
  DatasetManifest m;
  try {
    if (field("format").as<std::string>() != "crrcd-dataset/1") {
      throw ParseError(source, 1, "unsupported manifest format");
    }
    m.root = field("root").as<std::string>();
    m.split = field("split").as<std::string>();
    m.classes = field("classes").as<int>();
    m.channels = field("channels").as<int>();
    m.hires_height = field("hires_height").as<int>();
    m.hires_width = field("hires_width").as<int>();
    m.factor = field("factor").as<int>();
    m.degradation = field("degradation").as<std::string>();
    m.student_input = field("student_input").as<std::string>();
    m.source = field("source").as<std::string>();
    m.checksum = field("checksum").as<std::string>();
    const YAML::Node files = field("files");
    if (files.IsSequence()) {
      for (const auto& entry : files) {
        std::istringstream row(entry.as<std::string>());
        DatasetFile f;
        if (!(row >> f.path >> f.label >> f.sample_id >> f.sha256)) {
          throw ParseError(source, static_cast<std::size_t>(entry.Mark().line + 1), "malformed file entry");
        }
        m.files.push_back(std::move(f));
      }
    }
  } catch (const YAML::Exception& e) {
    throw ParseError(source, static_cast<std::size_t>(e.mark.line + 1), e.msg);
  }
  if (m.lowres_height() * m.factor != m.hires_height || m.lowres_width() * m.factor != m.hires_width) {
    throw ParseError(source, 0, "resolution is not divisible by the degradation factor");
  }
  return m;
}

DatasetManifest write_dataset(const std::filesystem::path& dir, std::span<const PairedSample> samples,
                              DatasetManifest header) {
  header.root = dir.string();
  header.files.clear();
  std::set<std::int64_t> ids;
  for (const auto& s : samples) {
    CRRCD_REQUIRE(ids.insert(s.sample_id).second, fmt::format("duplicate sample id {}", s.sample_id));
    CRRCD_REQUIRE(s.label >= 0 && s.label < header.classes, "write_dataset: label out of range");
    CRRCD_REQUIRE(s.hi.channels == header.channels && s.hi.height == header.hires_height &&
                      s.hi.width == header.hires_width,
                  "write_dataset: image shape does not match the manifest");
    const std::string rel = fmt::format("{}/{}.png", s.label, s.sample_id);
    write_png16(dir / rel, s.hi);
    header.files.push_back({rel, s.label, s.sample_id, sha256_file(dir / rel)});
  }
  header.checksum = file_table_checksum(header.files);
  write_file(dir / "manifest.txt", format_manifest(header));
  return header;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.txt";
  Dataset ds;
  ds.manifest = parse_manifest(read_file(manifest_path), manifest_path.string());
  const auto& m = ds.manifest;
  if (file_table_checksum(m.files) != m.checksum) {
    throw ChecksumError("dataset file table does not match its checksum in " + manifest_path.string());
  }
  ds.samples.reserve(m.files.size());
  for (const auto& f : m.files) {
    const auto path = dir / f.path;
    const std::string bytes = read_file(path);
    if (sha256_hex(bytes) != f.sha256) throw ChecksumError("checksum mismatch for " + path.string());
    if (f.label < 0 || f.label >= m.classes) {
      throw ParseError(manifest_path.string(), 0, fmt::format("label {} out of range for {}", f.label, f.path));
    }
    PairedSample s;
    s.hi = read_png16(path);
    if (s.hi.channels != m.channels || s.hi.height != m.hires_height || s.hi.width != m.hires_width) {
      throw ParseError(manifest_path.string(), 0, "image shape does not match the manifest: " + f.path);
    }
    s.lo = degrade(s.hi, m.factor);
    s.label = f.label;
    s.sample_id = f.sample_id;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::vector<PairedSample> read_cifar_binary(const std::filesystem::path& file, int factor, int label_bytes,
                                            std::int64_t id_base) {
  CRRCD_REQUIRE(label_bytes == 1 || label_bytes == 2, "read_cifar_binary: label_bytes must be 1 or 2");
  constexpr std::size_t kPixels = 3 * 32 * 32;
  const std::string bytes = read_file(file);
  const std::size_t record = static_cast<std::size_t>(label_bytes) + kPixels;
  if (bytes.size() % record != 0) {
    throw ParseError(file.string(), 0, "file size is not a multiple of the record size");
  }
  std::vector<PairedSample> out;
  out.reserve(bytes.size() / record);
  for (std::size_t off = 0; off < bytes.size(); off += record) {
    PairedSample s;
    // Two-byte records (coarse, fine) use the fine label.
    s.label = static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(label_bytes) - 1]);
    s.hi = Image(3, 32, 32);
    for (std::size_t i = 0; i < kPixels; ++i) {
      s.hi.pixels[i] = static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(label_bytes) + i]) / 255.0;
    }
    s.lo = degrade(s.hi, factor);
    s.sample_id = id_base + static_cast<std::int64_t>(out.size());
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PairSpec> parse_pairs_protocol(const std::string& text, const std::string& source) {
  std::vector<PairSpec> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream row(line);
    std::vector<std::string> tokens;
    for (std::string t; row >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    if (tokens.size() != 3) throw ParseError(source, number, "expected 'id_a id_b {0,1}'");
    PairSpec p;
    auto parse_id = [&](const std::string& t, std::int64_t& v) {
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ParseError(source, number, "invalid sample id '" + t + "'");
      }
    };
    parse_id(tokens[0], p.id_a);
    parse_id(tokens[1], p.id_b);
    if (tokens[2] != "0" && tokens[2] != "1") throw ParseError(source, number, "same-flag must be 0 or 1");
    p.same = tokens[2] == "1";
    out.push_back(p);
  }
  return out;
}

std::vector<PairSpec> load_pairs_protocol(const std::filesystem::path& file) {
  return parse_pairs_protocol(read_file(file), file.string());
}

std::string format_pairs_protocol(std::span<const PairSpec> pairs) {
  std::string out;
  for (const auto& p : pairs) out += fmt::format("{} {} {}\n", p.id_a, p.id_b, p.same ? 1 : 0);
  return out;
}

std::vector<PairSpec> make_pairs(std::span<const PairedSample> samples, std::size_t count, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < samples.size(); ++i) by_label[samples[i].label].push_back(i);
  std::vector<int> multi;
  for (const auto& [label, members] : by_label) {
    if (members.size() >= 2) multi.push_back(label);
  }
  CRRCD_REQUIRE(by_label.size() >= 2, "make_pairs: need at least two classes");
  CRRCD_REQUIRE(!multi.empty(), "make_pairs: need a class with two samples");

  Rng rng = make_rng(seed, 0x50000);
  std::vector<PairSpec> out;
  out.reserve(count);
  while (out.size() < count) {
    if (out.size() % 2 == 0) {
      const auto& members = by_label[multi[uniform_index(rng, multi.size())]];
      const std::size_t a = uniform_index(rng, members.size());
      std::size_t b = uniform_index(rng, members.size() - 1);
      if (b >= a) ++b;
      out.push_back({samples[members[a]].sample_id, samples[members[b]].sample_id, true});
    } else {
      const std::size_t a = uniform_index(rng, samples.size());
      std::size_t b = uniform_index(rng, samples.size());
      while (samples[b].label == samples[a].label) b = uniform_index(rng, samples.size());
      out.push_back({samples[a].sample_id, samples[b].sample_id, false});
    }
  }
  return out;
}

}  // namespace crrcd

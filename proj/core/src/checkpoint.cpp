// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "crrcd/error.hpp"
#include "crrcd/hash.hpp"

namespace crrcd {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes little-endian doubles");

namespace {

using nlohmann::json;

constexpr char kMagic[] = "CRRCDCK1";
constexpr std::size_t kMagicSize = 8;
constexpr std::size_t kDigestSize = 64;

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  std::memcpy(&v, in.data() + at, 8);
  return v;
}

json backbone_json(const BackboneSpec& s) {
  return {{"arch", s.arch},
          {"channels", s.channels},
          {"height", s.height},
          {"width", s.width},
          {"hidden", s.hidden},
          {"conv_channels", s.conv_channels},
          {"embedding_dim", s.embedding_dim},
          {"classes", s.classes},
          {"classifier", s.classifier == ClassifierKind::linear ? "linear" : "cosine"},
          {"cosine_scale", s.cosine_scale}};
}

BackboneSpec backbone_from(const json& j) {
  BackboneSpec s;
  s.arch = j.at("arch").get<std::string>();
  s.channels = j.at("channels").get<int>();
  s.height = j.at("height").get<int>();
  s.width = j.at("width").get<int>();
  s.hidden = j.at("hidden").get<int>();
  s.conv_channels = j.at("conv_channels").get<int>();
  s.embedding_dim = j.at("embedding_dim").get<int>();
  s.classes = j.at("classes").get<int>();
  s.classifier = j.at("classifier").get<std::string>() == "linear" ? ClassifierKind::linear : ClassifierKind::cosine;
  s.cosine_scale = j.at("cosine_scale").get<double>();
  return s;
}

void append_tensors(json& index, std::string& payload, const char* group, const std::map<std::string, Tensor>& tensors) {
  for (const auto& [name, t] : tensors) {
    index.push_back({{"group", group}, {"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", payload.size()}});
    payload.append(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(double));
  }
}

}  // namespace

std::string to_string(ModelRole role) { return role == ModelRole::teacher ? "teacher" : "student"; }

ModelRole parse_model_role(const std::string& s) {
  if (s == "teacher") return ModelRole::teacher;
  if (s == "student") return ModelRole::student;
  throw ContractViolation("unknown model role '" + s + "'");
}

std::string parameters_hash(const std::map<std::string, Tensor>& parameters) {
  std::string bytes;
  for (const auto& [name, t] : parameters) {
    bytes += fmt::format("{}:{}x{}\n", name, t.rows(), t.cols());
    bytes.append(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(double));
  }
  return sha256_hex(bytes);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  json header;
  header["format"] = "crrcd-checkpoint/1";
  header["role"] = to_string(c.role);
  header["backbone"] = backbone_json(c.backbone);
  header["input_mode"] = c.input_mode;
  header["config_text"] = c.config_text;
  header["config_hash"] = c.config_hash;
  header["teacher_hash"] = c.teacher_hash;
  header["step"] = c.step;
  header["completed_epochs"] = c.completed_epochs;
  header["step_in_epoch"] = c.step_in_epoch;
  header["epoch_order"] = c.epoch_order;
  header["rng_states"] = c.rng_states;
  header["notes"] = c.notes;
  std::string payload;
  json index = json::array();
  append_tensors(index, payload, "parameters", c.parameters);
  append_tensors(index, payload, "optimizer", c.optimizer);
  header["tensors"] = index;

  const std::string head = header.dump();
  std::string out(kMagic, kMagicSize);
  put_u64(out, head.size());
  out += head;
  put_u64(out, payload.size());
  out += payload;
  out += sha256_hex(out);

  // Write-then-rename so an interrupted save never leaves a torn checkpoint.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, out);
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  const std::string where = path.string();
  if (in.size() < kMagicSize + 16 + kDigestSize || in.compare(0, kMagicSize, kMagic) != 0) {
    throw ChecksumError("checkpoint '" + where + "' is truncated or not a checkpoint");
  }
  const std::size_t body = in.size() - kDigestSize;
  if (sha256_hex(std::string_view(in).substr(0, body)) != in.substr(body)) {
    throw ChecksumError("checkpoint '" + where + "' failed its integrity check");
  }
  const std::uint64_t head_size = get_u64(in, kMagicSize);
  if (kMagicSize + 8 + head_size + 8 > body) throw ChecksumError("checkpoint '" + where + "' has a bad header length");
  const std::size_t payload_at = kMagicSize + 8 + head_size + 8;
  const std::uint64_t payload_size = get_u64(in, kMagicSize + 8 + head_size);
  if (payload_at + payload_size != body) throw ChecksumError("checkpoint '" + where + "' has a bad payload length");

  Checkpoint c;
  try {
    const json header = json::parse(in.substr(kMagicSize + 8, head_size));
    c.role = parse_model_role(header.at("role").get<std::string>());
    c.backbone = backbone_from(header.at("backbone"));
    c.input_mode = header.at("input_mode").get<std::string>();
    c.config_text = header.at("config_text").get<std::string>();
    c.config_hash = header.at("config_hash").get<std::string>();
    c.teacher_hash = header.at("teacher_hash").get<std::string>();
    c.step = header.at("step").get<std::int64_t>();
    c.completed_epochs = header.at("completed_epochs").get<int>();
    c.step_in_epoch = header.at("step_in_epoch").get<int>();
    c.epoch_order = header.at("epoch_order").get<std::vector<std::int64_t>>();
    c.rng_states = header.at("rng_states").get<std::map<std::string, std::string>>();
    c.notes = header.at("notes").get<std::map<std::string, std::string>>();
    for (const auto& entry : header.at("tensors")) {
      const auto rows = entry.at("rows").get<Index>();
      const auto cols = entry.at("cols").get<Index>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (offset + bytes > payload_size) throw ChecksumError("checkpoint '" + where + "' tensor index out of range");
      Tensor t(rows, cols);
      std::memcpy(t.data(), in.data() + payload_at + offset, bytes);
      auto& group = entry.at("group").get<std::string>() == "optimizer" ? c.optimizer : c.parameters;
      group.emplace(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& e) {
    throw ChecksumError("checkpoint '" + where + "' has a malformed header: " + e.what());
  }
  return c;
}

}  // namespace crrcd

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "crrcd/error.hpp"
#include "crrcd/hash.hpp"
#include "crrcd/nn.hpp"

namespace crrcd {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError({fmt::format("{}: invalid value '{}' ({})", key, value, why)});
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "expected a number");
  return out;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

template <typename T, typename Member>
Field number(Member member) {
  return {[member](const ExperimentConfig& c) { return fmt::format("{}", std::invoke(member, c)); },
          [member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_number<T>(k, v);
          }};
}

template <typename Member>
Field text(Member member) {
  return {[member](const ExperimentConfig& c) { return std::invoke(member, c); },
          [member](ExperimentConfig& c, const std::string&, const std::string& v) { std::invoke(member, c) = v; }};
}

template <typename E, typename Member, typename Parse>
Field enumeration(Member member, Parse parse) {
  return {[member](const ExperimentConfig& c) { return to_string(std::invoke(member, c)); },
          [member, parse](ExperimentConfig& c, const std::string& k, const std::string& v) {
            try {
              std::invoke(member, c) = parse(v);
            } catch (const ContractViolation& e) {
              bad_value(k, v, e.what());
            }
          }};
}

template <typename Fn>
Field network(Fn pick, const char* what) {
  const std::string w = what;
  return {[pick, w](const ExperimentConfig& c) {
            const NetworkConfig& n = pick(const_cast<ExperimentConfig&>(c));
            if (w == "arch") return n.arch;
            if (w == "hidden") return fmt::format("{}", n.hidden);
            if (w == "conv_channels") return fmt::format("{}", n.conv_channels);
            return fmt::format("{}", n.embedding_dim);
          },
          [pick, w](ExperimentConfig& c, const std::string& k, const std::string& v) {
            NetworkConfig& n = pick(c);
            if (w == "arch") n.arch = v;
            else if (w == "hidden") n.hidden = parse_number<int>(k, v);
            else if (w == "conv_channels") n.conv_channels = parse_number<int>(k, v);
            else n.embedding_dim = parse_number<int>(k, v);
          }};
}

using FieldTable = std::vector<std::pair<std::string, Field>>;

const FieldTable& fields() {
  static const FieldTable table = [] {
    auto teacher = [](ExperimentConfig& c) -> NetworkConfig& { return c.teacher; };
    auto student = [](ExperimentConfig& c) -> NetworkConfig& { return c.student; };
    FieldTable t;
    t.emplace_back("name", text(&ExperimentConfig::name));
    t.emplace_back("seed", number<std::uint64_t>(&ExperimentConfig::seed));
    t.emplace_back("teacher.arch", network(teacher, "arch"));
    t.emplace_back("teacher.hidden", network(teacher, "hidden"));
    t.emplace_back("teacher.conv_channels", network(teacher, "conv_channels"));
    t.emplace_back("teacher.embedding_dim", network(teacher, "embedding_dim"));
    t.emplace_back("teacher.epochs", number<int>(&ExperimentConfig::teacher_epochs));
    t.emplace_back("student.arch", network(student, "arch"));
    t.emplace_back("student.hidden", network(student, "hidden"));
    t.emplace_back("student.conv_channels", network(student, "conv_channels"));
    t.emplace_back("student.embedding_dim", network(student, "embedding_dim"));
    t.emplace_back("student.input_mode",
                   enumeration<StudentInput>(&ExperimentConfig::student_input, parse_student_input));
    t.emplace_back("student.input_size", number<int>(&ExperimentConfig::student_input_size));
    t.emplace_back("loss.alpha", number<double>([](auto& c) -> auto& { return c.loss.alpha; }));
    t.emplace_back("loss.beta", number<double>([](auto& c) -> auto& { return c.loss.beta; }));
    t.emplace_back("loss.rho", number<double>([](auto& c) -> auto& { return c.loss.rho; }));
    t.emplace_back("loss.cls", enumeration<ClsMode>(&ExperimentConfig::cls_mode, parse_cls_mode));
    t.emplace_back("loss.arcface_scale", number<double>([](auto& c) -> auto& { return c.arcface.scale; }));
    t.emplace_back("loss.arcface_margin", number<double>([](auto& c) -> auto& { return c.arcface.margin; }));
    t.emplace_back("loss.negative_weighting",
                   enumeration<NegativeWeighting>(&ExperimentConfig::negative_weighting,
                                                  parse_negative_weighting));
    t.emplace_back("critic.tau", number<double>(&ExperimentConfig::tau));
    t.emplace_back("critic.n_negatives", number<int>(&ExperimentConfig::n_negatives));
    t.emplace_back("critic.dataset_cardinality", number<std::int64_t>(&ExperimentConfig::dataset_cardinality));
    t.emplace_back("critic.projection_dim", number<int>(&ExperimentConfig::projection_dim));
    t.emplace_back("relation.hidden_dim", number<int>(&ExperimentConfig::relation_hidden));
    t.emplace_back("relation.dim", number<int>(&ExperimentConfig::relation_dim));
    t.emplace_back("bank.capacity", number<int>(&ExperimentConfig::bank_capacity));
    t.emplace_back("bank.policy", enumeration<SamplingMode>(&ExperimentConfig::sampling, parse_sampling_mode));
    t.emplace_back("optim.lr", number<double>(&ExperimentConfig::lr));
    t.emplace_back("optim.milestones",
                   Field{[](const ExperimentConfig& c) {
                           std::vector<std::string> items;
                           for (int m : c.milestones) items.push_back(fmt::format("{}", m));
                           return join(items);
                         },
                         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                           c.milestones.clear();
                           for (const auto& item : split_list(v)) c.milestones.push_back(parse_number<int>(k, item));
                         }});
    t.emplace_back("optim.gamma", number<double>(&ExperimentConfig::gamma));
    t.emplace_back("optim.momentum", number<double>(&ExperimentConfig::momentum));
    t.emplace_back("optim.weight_decay", number<double>(&ExperimentConfig::weight_decay));
    t.emplace_back("train.batch_size", number<int>(&ExperimentConfig::batch_size));
    t.emplace_back("train.epochs", number<int>(&ExperimentConfig::epochs));
    t.emplace_back("train.checkpoint_every", number<int>(&ExperimentConfig::checkpoint_every));
    t.emplace_back("data.factor", number<int>(&ExperimentConfig::factor));
    t.emplace_back("eval.protocols",
                   Field{[](const ExperimentConfig& c) { return join(c.eval_protocols); },
                         [](ExperimentConfig& c, const std::string&, const std::string& v) {
                           c.eval_protocols = split_list(v);
                         }});
    return t;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError({fmt::format("unknown key '{}'", key)});
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return keys;
}

std::string get_value(const ExperimentConfig& config, const std::string& key) { return field(key).get(config); }

void set_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, key, value);
}

std::vector<std::string> validation_problems(const ExperimentConfig& c) {
  std::vector<std::string> p;
  auto check = [&p](bool ok, const std::string& msg) {
    if (!ok) p.push_back(msg);
  };
  for (const auto& [prefix, net] : {std::pair{"teacher", &c.teacher}, std::pair{"student", &c.student}}) {
    check(is_known_arch(net->arch), fmt::format("{}.arch: '{}' is not a registered architecture", prefix, net->arch));
    check(net->hidden > 0, fmt::format("{}.hidden: must be positive", prefix));
    check(net->conv_channels > 0, fmt::format("{}.conv_channels: must be positive", prefix));
    check(net->embedding_dim > 0, fmt::format("{}.embedding_dim: must be positive", prefix));
  }
  check(c.teacher.embedding_dim == c.student.embedding_dim,
        "student.embedding_dim: must equal teacher.embedding_dim (relation heads consume both)");
  check(c.teacher_epochs >= 0, "teacher.epochs: must be nonnegative");
  check(c.student_input_size >= 0, "student.input_size: must be nonnegative");
  check(c.loss.alpha >= 0.0, "loss.alpha: must be nonnegative");
  check(c.loss.beta >= 0.0, "loss.beta: must be nonnegative");
  check(c.loss.rho > 0.0, "loss.rho: must be positive");
  check(c.arcface.scale > 0.0, "loss.arcface_scale: must be positive");
  check(c.arcface.margin >= 0.0, "loss.arcface_margin: must be nonnegative");
  check(c.tau > 0.0, "critic.tau: must be positive");
  check(c.n_negatives >= 1, "critic.n_negatives: must be at least 1");
  check(c.dataset_cardinality >= 0, "critic.dataset_cardinality: must be nonnegative (0 = auto)");
  check(c.projection_dim > 0, "critic.projection_dim: must be positive");
  check(c.relation_hidden > 0, "relation.hidden_dim: must be positive");
  check(c.relation_dim > 0, "relation.dim: must be positive");
  check(c.bank_capacity > 0, "bank.capacity: must be positive");
  check(c.n_negatives <= c.bank_capacity, "critic.n_negatives: must not exceed bank.capacity");
  check(c.lr > 0.0, "optim.lr: must be positive");
  check(std::is_sorted(c.milestones.begin(), c.milestones.end()), "optim.milestones: must be sorted");
  check(c.gamma > 0.0, "optim.gamma: must be positive");
  check(c.momentum >= 0.0 && c.momentum < 1.0, "optim.momentum: must lie in [0, 1)");
  check(c.weight_decay >= 0.0, "optim.weight_decay: must be nonnegative");
  check(c.batch_size > 0, "train.batch_size: must be positive");
  check(c.epochs >= 0, "train.epochs: must be nonnegative");
  check(c.checkpoint_every >= 0, "train.checkpoint_every: must be nonnegative");
  check(c.factor >= 1, "data.factor: must be at least 1");
  static const std::vector<std::string> protocols{"top1", "verify", "probe", "retrieve"};
  for (const auto& proto : c.eval_protocols) {
    check(std::find(protocols.begin(), protocols.end(), proto) != protocols.end(),
          fmt::format("eval.protocols: unknown protocol '{}'", proto));
  }
  return p;
}

void validate(const ExperimentConfig& config) {
  auto problems = validation_problems(config);
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [name, f] : fields()) out += fmt::format("{}: {}\n", name, f.get(config));
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(source, static_cast<std::size_t>(e.mark.line + 1), e.msg);
  }
  ExperimentConfig config;
  if (doc.IsNull()) return config;
  if (!doc.IsMap()) throw ParseError(source, 1, "expected `key: value` lines");
  std::vector<std::string> problems;
  for (const auto& entry : doc) {
    const std::string key = entry.first.as<std::string>();
    std::string value;
    if (entry.second.IsSequence()) {
      std::vector<std::string> items;
      for (const auto& item : entry.second) items.push_back(item.as<std::string>());
      value = join(items);
    } else if (entry.second.IsScalar()) {
      value = entry.second.as<std::string>();
    } else {
      problems.push_back(fmt::format("{}: expected a scalar or a list", key));
      continue;
    }
    try {
      set_value(config, key, value);
    } catch (const ConfigError& e) {
      for (const auto& msg : e.problems()) problems.push_back(msg);
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError({fmt::format("config file '{}' does not exist", path.string())});
  return parse_config(read_file(path), path.string());
}

void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides) {
  std::vector<std::string> problems;
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      problems.push_back(fmt::format("override '{}': expected key=value", item));
      continue;
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    std::vector<std::string> matches;
    for (const auto& name : config_keys()) {
      const auto dot = name.rfind('.');
      if (name == key || (dot != std::string::npos && name.substr(dot + 1) == key)) matches.push_back(name);
    }
    if (matches.size() > 1) {
      auto exact = std::find(matches.begin(), matches.end(), key);
      if (exact == matches.end()) {
        problems.push_back(fmt::format("override '{}': ambiguous key, candidates: {}", key, join(matches)));
        continue;
      }
      matches = {key};
    }
    if (matches.empty()) {
      problems.push_back(fmt::format("override '{}': unknown key", key));
      continue;
    }
    try {
      set_value(config, matches.front(), value);
    } catch (const ConfigError& e) {
      for (const auto& msg : e.problems()) problems.push_back(msg);
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::string config_hash(const ExperimentConfig& config) { return content_hash(format_config(config)); }

std::string to_string(StudentInput s) { return s == StudentInput::native ? "native" : "bilinear_upsample"; }

StudentInput parse_student_input(const std::string& s) {
  if (s == "native") return StudentInput::native;
  if (s == "bilinear_upsample") return StudentInput::bilinear_upsample;
  throw ContractViolation("unknown student input mode '" + s + "'");
}

}  // namespace crrcd

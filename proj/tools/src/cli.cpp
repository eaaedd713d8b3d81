// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <optional>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "crrcd/checkpoint.hpp"
#include "crrcd/config.hpp"
#include "crrcd/data.hpp"
#include "crrcd/error.hpp"
#include "crrcd/evaluator.hpp"
#include "crrcd/hash.hpp"
#include "crrcd/model.hpp"
#include "crrcd/trainer.hpp"

namespace crrcd::cli {

namespace fs = std::filesystem;

fs::path output_path(const fs::path& p) {
  const char* root = std::getenv(kOutputRootEnv);
  if (p.is_absolute() || root == nullptr || *root == '\0') return p;
  return fs::path(root) / p;
}

namespace {

std::string utc_now() { return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))); }

// --- make-data -------------------------------------------------------------

struct MakeDataArgs {
  std::string out;
  bool synthetic = false;
  std::string cifar;
  std::string cifar_test;
  int label_bytes = 1;
  int classes = 10;
  int per_class = 100;
  int test_per_class = 0;
  std::uint64_t seed = 5;
  int factor = 4;
  int hires = 32;
  int channels = 1;
  double noise = 0.25;
  std::size_t pairs = 0;
  bool force = false;
};

int cmd_make_data(const MakeDataArgs& a, std::ostream& out) {
  if (a.synthetic == !a.cifar.empty()) throw ConfigError({"make-data: pass exactly one of --synthetic or --cifar"});
  const fs::path root = output_path(a.out);
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!a.force) throw ConfigError({fmt::format("make-data: '{}' is not empty (use --force to overwrite)", root.string())});
    fs::remove_all(root);
  }

  std::vector<PairedSample> train, test;
  DatasetManifest header;
  header.factor = a.factor;
  header.classes = a.classes;
  if (a.synthetic) {
    SyntheticSpec spec;
    spec.classes = a.classes;
    spec.per_class = a.per_class;
    spec.hires = a.hires;
    spec.factor = a.factor;
    spec.channels = a.channels;
    spec.seed = a.seed;
    spec.noise = a.noise;
    train = make_synthetic(spec);
    if (a.test_per_class > 0) {
      spec.per_class = a.test_per_class;
      spec.split = 1;
      spec.id_base = static_cast<std::int64_t>(train.size());
      test = make_synthetic(spec);
    }
    header.channels = a.channels;
    header.hires_height = header.hires_width = a.hires;
    header.source = fmt::format("synthetic classes={} per_class={} test_per_class={} seed={} noise={}", a.classes,
                                a.per_class, a.test_per_class, a.seed, a.noise);
  } else {
    train = read_cifar_binary(a.cifar, a.factor, a.label_bytes, 0);
    if (!a.cifar_test.empty()) {
      test = read_cifar_binary(a.cifar_test, a.factor, a.label_bytes, static_cast<std::int64_t>(train.size()));
    }
    header.channels = 3;
    header.hires_height = header.hires_width = 32;
    header.source = "cifar-binary " + fs::path(a.cifar).filename().string();
  }

  header.split = "train";
  const DatasetManifest tm = write_dataset(root / "train", train, header);
  out << fmt::format("train: {} samples, {}x{} -> {}x{}, checksum {}\n", train.size(), tm.hires_height, tm.hires_width,
                     tm.lowres_height(), tm.lowres_width(), tm.checksum);
  if (!test.empty()) {
    header.split = "test";
    const DatasetManifest sm = write_dataset(root / "test", test, header);
    out << fmt::format("test: {} samples, checksum {}\n", test.size(), sm.checksum);
  }
  if (a.pairs > 0) {
    const auto pairs = make_pairs(test.empty() ? train : test, a.pairs, a.seed);
    write_file(root / "pairs.txt", format_pairs_protocol(pairs));
    out << fmt::format("pairs: {} written to {}\n", pairs.size(), (root / "pairs.txt").string());
  }
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string mode = "distill";
  std::string data;
  std::string teacher;
  std::string out = "run";
  std::vector<std::string> overrides;
  std::string resume;
  std::int64_t stop_at = 0;
};

std::string run_manifest(const ExperimentConfig& c, const TrainArgs& a, const Dataset& train,
                         const std::string& teacher_hash, const std::string& started, const std::string& finished) {
  const std::int64_t m = c.dataset_cardinality > 0 ? c.dataset_cardinality : static_cast<std::int64_t>(train.size());
  std::string s;
  s += "# run manifest\n";
  s += fmt::format("mode: {}\n", a.mode);
  s += fmt::format("config_hash: {}\n", config_hash(c));
  s += fmt::format("dataset: {}\n", train.manifest.root);
  s += fmt::format("dataset_checksum: {}\n", train.manifest.checksum);
  s += fmt::format("teacher_hash: {}\n", teacher_hash.empty() ? "none" : teacher_hash);
  s += fmt::format("alpha: {}\nbeta: {}\ntau: {}\nrho: {}\n", c.loss.alpha, c.loss.beta, c.tau, c.loss.rho);
  s += fmt::format("n: {}\nm: {}\nd_r: {}\nseed: {}\n", c.n_negatives, m, c.relation_dim, c.seed);
  s += "platform: x86-64 Linux, IEEE-754 binary64, -ffp-contract=off, single-threaded kernels\n";
  s += fmt::format("started: {}\n", started);
  s += fmt::format("finished: {}\n", finished.empty() ? "running" : finished);
  s += "# resolved config\n";
  s += format_config(c);
  return s;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  if (a.mode != "teacher" && a.mode != "distill" && a.mode != "supervised") {
    throw ConfigError({"--mode: expected teacher, distill or supervised"});
  }
  ExperimentConfig config = load_config(a.config);
  apply_overrides(config, a.overrides);
  validate(config);
  if (a.mode == "distill" && a.teacher.empty()) throw ConfigError({"--teacher: required with --mode distill"});

  const Dataset train = load_dataset(a.data);
  std::optional<Model> teacher;
  if (a.mode == "distill") {
    teacher.emplace(Model::from_checkpoint(load_checkpoint(a.teacher)));
    if (teacher->role() != ModelRole::teacher) throw ConfigError({"--teacher: checkpoint does not hold a teacher"});
  }
  std::unique_ptr<Trainer> trainer =
      teacher ? std::make_unique<Trainer>(config, train, *teacher)
              : std::make_unique<Trainer>(config, train, a.mode == "teacher" ? ModelRole::teacher : ModelRole::student);

  const fs::path dir = output_path(a.out);
  fs::create_directories(dir);
  std::vector<StepRecord> metrics;
  if (!a.resume.empty()) {
    const Checkpoint ckpt = load_checkpoint(a.resume);
    trainer->restore(ckpt);
    if (fs::exists(dir / "metrics.csv")) {
      for (const auto& r : read_metrics_csv(dir / "metrics.csv")) {
        if (r.step <= ckpt.step) metrics.push_back(r);
      }
    }
  }
  const std::string teacher_hash = teacher ? teacher->parameter_hash() : "";
  const std::string started = utc_now();
  write_file(dir / "manifest.txt", run_manifest(config, a, train, teacher_hash, started, ""));

  const auto save = [&](const fs::path& path) {
    Checkpoint c = trainer->checkpoint();
    save_checkpoint(path, c);
    write_metrics_csv(dir / "metrics.csv", metrics);
  };
  std::optional<std::int64_t> stop;
  if (a.stop_at > 0) stop = a.stop_at;
  trainer->run(stop, [&](const StepRecord& r) {
    metrics.push_back(r);
    if (config.checkpoint_every > 0 && r.step % config.checkpoint_every == 0) {
      save(dir / "checkpoints" / fmt::format("step_{:08}.ckpt", r.step));
    }
  });

  if (trainer->finished()) {
    trainer->model().notes["train_accuracy"] = fmt::format("{}", top1(trainer->model(), train));
  }
  save(dir / "checkpoint.ckpt");
  write_file(dir / "manifest.txt", run_manifest(config, a, train, teacher_hash, started, utc_now()));
  out << fmt::format("steps: {} / {}\n", trainer->step(), trainer->total_steps());
  if (trainer->finished()) out << fmt::format("train_accuracy: {}\n", trainer->model().notes["train_accuracy"]);
  out << fmt::format("checkpoint: {}\n", (dir / "checkpoint.ckpt").string());
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string protocol = "top1";
  std::string data;
  std::string test;
  std::string pairs;
  std::string out = "eval";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.protocol == "verify" && a.pairs.empty()) throw ConfigError({"eval --protocol verify: --pairs file is required"});
  if ((a.protocol == "probe" || a.protocol == "retrieve") && a.test.empty()) {
    throw ConfigError({fmt::format("eval --protocol {}: --test split is required", a.protocol)});
  }
  const Model model = Model::from_checkpoint(load_checkpoint(a.checkpoint));
  const Dataset data = load_dataset(a.data);
  const fs::path dir = output_path(a.out);

  Report report;
  if (a.protocol == "top1") {
    report = {{"protocol", "top1"},
              {"samples", fmt::format("{}", data.size())},
              {"accuracy", fmt::format("{}", top1(model, data))}};
  } else if (a.protocol == "verify") {
    const auto pairs = load_pairs_protocol(a.pairs);
    const VerificationReport v = verify_pairs(model, data, pairs);
    report = verification_report(v);
    write_pair_scores_csv(dir / "verify_scores.csv", pairs, v);
  } else if (a.protocol == "probe") {
    const Dataset test = load_dataset(a.test);
    report = {{"protocol", "probe"},
              {"train_samples", fmt::format("{}", data.size())},
              {"test_samples", fmt::format("{}", test.size())},
              {"accuracy", fmt::format("{}", linear_probe(model, data, test))}};
  } else {
    const Dataset probes = load_dataset(a.test);
    report = retrieval_report(retrieve(model, data, probes));
  }
  report.emplace_back("checkpoint", a.checkpoint);
  report.emplace_back("dataset_checksum", data.manifest.checksum);
  const std::string text = format_report(report);
  write_file(dir / (a.protocol + ".txt"), text);
  out << text;
  return kExitOk;
}

// --- export-embeddings -----------------------------------------------------

struct ExportArgs {
  std::string checkpoint;
  std::string data;
  std::string out = "embeddings.csv";
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  const Model model = Model::from_checkpoint(load_checkpoint(a.checkpoint));
  const Dataset data = load_dataset(a.data);
  const fs::path path = output_path(a.out);
  export_embeddings(model, data, path);
  out << fmt::format("rows: {}\npath: {}\n", data.size(), path.string());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-resolution relational contrastive distillation toolkit", "crrcd"};
  app.require_subcommand(1, 1);

  MakeDataArgs md;
  auto* make_data = app.add_subcommand("make-data", "Write a paired hi/lo-resolution dataset to disk");
  make_data->add_option("--out", md.out, "Output directory (relative to $CRRCD_OUTPUT_ROOT)")->required();
  make_data->add_flag("--synthetic", md.synthetic, "Generate the seeded synthetic corpus");
  make_data->add_option("--cifar", md.cifar, "Import a CIFAR binary batch file")->check(CLI::ExistingFile);
  make_data->add_option("--cifar-test", md.cifar_test, "CIFAR binary file for the test split")->check(CLI::ExistingFile);
  make_data->add_option("--label-bytes", md.label_bytes, "Label bytes per CIFAR record (1 or 2)")->capture_default_str();
  make_data->add_option("--classes", md.classes, "Number of classes")->capture_default_str();
  make_data->add_option("--per-class", md.per_class, "Training samples per class")->capture_default_str();
  make_data->add_option("--test-per-class", md.test_per_class, "Test samples per class (0: no test split)")
      ->capture_default_str();
  make_data->add_option("--seed", md.seed, "Corpus seed")->capture_default_str();
  make_data->add_option("--factor", md.factor, "Degradation factor")->capture_default_str();
  make_data->add_option("--hires", md.hires, "High-resolution side length")->capture_default_str();
  make_data->add_option("--channels", md.channels, "Channels (1 or 3)")->capture_default_str();
  make_data->add_option("--noise", md.noise, "Pixel noise standard deviation")->capture_default_str();
  make_data->add_option("--pairs", md.pairs, "Also write N verification pairs to pairs.txt")->capture_default_str();
  make_data->add_flag("--force", md.force, "Overwrite a nonempty output directory");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a teacher, a plain student or a distilled student");
  train->add_option("--config", tr.config, "Experiment config file")->required();
  train->add_option("--mode", tr.mode, "teacher | distill | supervised")->capture_default_str();
  train->add_option("--data", tr.data, "Training dataset directory")->required();
  train->add_option("--teacher", tr.teacher, "Teacher checkpoint (distill mode)");
  train->add_option("--out", tr.out, "Run directory (relative to $CRRCD_OUTPUT_ROOT)")->capture_default_str();
  train->add_option("--override", tr.overrides, "key=value config overrides; keys may be unambiguous suffixes");
  train->add_option("--resume", tr.resume, "Continue from a checkpoint of this run")->check(CLI::ExistingFile);
  train->add_option("--stop-at", tr.stop_at, "Stop after this many total steps (0: run to the end)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with one protocol");
  eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  eval->add_option("--protocol", ev.protocol, "top1 | verify | probe | retrieve")
      ->check(CLI::IsMember({"top1", "verify", "probe", "retrieve"}))
      ->capture_default_str();
  eval->add_option("--data", ev.data, "Dataset (probe: train split; retrieve: gallery)")->required();
  eval->add_option("--test", ev.test, "Second split (probe: test split; retrieve: probes)");
  eval->add_option("--pairs", ev.pairs, "Pairs file for verify: `id_a id_b same` per line");
  eval->add_option("--out", ev.out, "Report directory (relative to $CRRCD_OUTPUT_ROOT)")->capture_default_str();

  ExportArgs ex;
  auto* exporter = app.add_subcommand("export-embeddings", "Write per-sample embeddings as CSV");
  exporter->add_option("--checkpoint", ex.checkpoint, "Model checkpoint")->required();
  exporter->add_option("--data", ex.data, "Dataset directory")->required();
  exporter->add_option("--out", ex.out, "CSV path (relative to $CRRCD_OUTPUT_ROOT)")->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*make_data) return cmd_make_data(md, out);
    if (*train) return cmd_train(tr, out);
    if (*eval) return cmd_eval(ev, out);
    return cmd_export(ex, out);
  } catch (const ConfigError& e) {
    err << "error: invalid configuration\n";
    for (const auto& p : e.problems()) err << "  " << p << "\n";
    return kExitValidation;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ChecksumError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace crrcd::cli

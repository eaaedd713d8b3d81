// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/model.hpp"

#include <algorithm>
#include <vector>

#include "crrcd/error.hpp"

namespace crrcd {

namespace {
constexpr Index kPredictBatch = 256;
}

Model::Model(BackboneSpec spec, ModelRole role, StudentInput input, Rng& rng)
    : backbone_(std::move(spec), rng), role_(role), input_(input) {}

Model Model::from_checkpoint(const Checkpoint& checkpoint) {
  Rng rng = make_rng(0, 0);
  Model model(checkpoint.backbone, checkpoint.role, parse_student_input(checkpoint.input_mode), rng);
  std::map<std::string, Tensor> values;
  const std::string prefix = "model.";
  for (const auto& [name, t] : checkpoint.parameters) {
    if (name.starts_with(prefix)) values.emplace(name.substr(prefix.size()), t);
  }
  model.load_state(values);
  model.notes = checkpoint.notes;
  return model;
}

Image Model::view(const PairedSample& sample) const {
  const Image& src = role_ == ModelRole::teacher ? sample.hi : restore_for_student(sample.lo, spec().height, spec().width, input_);
  CRRCD_REQUIRE(src.channels == spec().channels && src.height == spec().height && src.width == spec().width,
                "Model: sample geometry does not match the model input");
  return src;
}

Tensor Model::inputs(std::span<const PairedSample> samples) const {
  Tensor out(static_cast<Index>(samples.size()), spec().input_size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Image v = view(samples[i]);
    out.row(static_cast<Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(v.pixels.data(), out.cols());
  }
  return out;
}

Model::Outputs Model::predict(const Tensor& inputs) const {
  Outputs out{Tensor(inputs.rows(), spec().embedding_dim), Tensor(inputs.rows(), spec().classes)};
  for (Index begin = 0; begin < inputs.rows(); begin += kPredictBatch) {
    const Index count = std::min(kPredictBatch, inputs.rows() - begin);
    const BackboneOutput o = backbone_.forward(inputs.middleRows(begin, count));
    out.embeddings.middleRows(begin, count) = o.embedding.value();
    out.logits.middleRows(begin, count) = o.logits.value();
  }
  return out;
}

Model::Outputs Model::predict(std::span<const PairedSample> samples) const { return predict(inputs(samples)); }

std::string Model::parameter_hash() const { return parameters_hash(state()); }

BackboneSpec backbone_spec(const ExperimentConfig& config, const DatasetManifest& manifest, ModelRole role) {
  const NetworkConfig& net = role == ModelRole::teacher ? config.teacher : config.student;
  BackboneSpec spec;
  spec.arch = net.arch;
  spec.hidden = net.hidden;
  spec.conv_channels = net.conv_channels;
  spec.embedding_dim = net.embedding_dim;
  spec.channels = manifest.channels;
  spec.classes = manifest.classes;
  if (role == ModelRole::teacher) {
    spec.height = manifest.hires_height;
    spec.width = manifest.hires_width;
  } else if (config.student_input == StudentInput::native) {
    spec.height = manifest.lowres_height();
    spec.width = manifest.lowres_width();
  } else {
    spec.height = config.student_input_size > 0 ? config.student_input_size : manifest.hires_height;
    spec.width = config.student_input_size > 0 ? config.student_input_size : manifest.hires_width;
  }
  if (config.cls_mode == ClsMode::arcface) {
    spec.classifier = ClassifierKind::cosine;
    spec.cosine_scale = config.arcface.scale;
  }
  return spec;
}

Checkpoint model_checkpoint(const Model& model, const ExperimentConfig& config) {
  Checkpoint c;
  c.role = model.role();
  c.backbone = model.spec();
  c.input_mode = to_string(model.input_mode());
  c.config_text = format_config(config);
  c.config_hash = config_hash(config);
  c.parameters = snapshot(with_prefix("model", model.parameters()));
  c.notes = model.notes;
  return c;
}

}  // namespace crrcd

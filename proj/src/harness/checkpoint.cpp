// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/harness/checkpoint.hpp"

#include <fstream>

namespace faillab::harness {
namespace {

using nlohmann::json;

json mlp_to_json(const diff::MlpParams& mlp) {
  json layers = json::array();
  for (const auto& layer : mlp.layers) {
    layers.push_back({{"activation", diff::activation_name(layer.activation)},
                      {"weight", matrix_to_json(layer.weight)},
                      {"bias", matrix_to_json(layer.bias)}});
  }
  return layers;
}

diff::MlpParams mlp_from_json(const json& j) {
  diff::MlpParams mlp;
  for (const auto& layer : j) {
    mlp.layers.push_back({matrix_from_json(layer.at("weight")), matrix_from_json(layer.at("bias")),
                          diff::parse_activation(layer.at("activation").get<std::string>())});
  }
  return mlp;
}

json field_to_json(const flow::VectorField& f) {
  return {{"dim", f.dim},
          {"classes", f.classes},
          {"cond_embedding", matrix_to_json(f.cond_embedding)},
          {"layers", mlp_to_json(f.net)}};
}

flow::VectorField field_from_json(const json& j) {
  flow::VectorField f;
  f.dim = j.at("dim").get<std::size_t>();
  f.classes = j.at("classes").get<std::size_t>();
  f.cond_embedding = matrix_from_json(j.at("cond_embedding"));
  f.net = mlp_from_json(j.at("layers"));
  return f;
}

json disc_to_json(const adversary::Discriminator& d) {
  json vectors = json::array();
  for (const auto& u : d.spectral_vectors) vectors.push_back(matrix_to_json(u));
  return {{"variant", adversary::variant_name(d.variant)},
          {"dim", d.dim},
          {"classes", d.classes},
          {"cond_embedding", matrix_to_json(d.cond_embedding)},
          {"backbone", field_to_json(d.backbone)},
          {"feature_weight", matrix_to_json(d.feature_weight)},
          {"feature_bias", matrix_to_json(d.feature_bias)},
          {"head", mlp_to_json(d.head)},
          {"spectral_norm", d.spectral_norm},
          {"spectral_iters", d.spectral_iters},
          {"spectral_vectors", vectors},
          {"probe_t", d.probe_t}};
}

adversary::Discriminator disc_from_json(const json& j) {
  adversary::Discriminator d;
  d.variant = adversary::parse_variant(j.at("variant").get<std::string>());
  d.dim = j.at("dim").get<std::size_t>();
  d.classes = j.at("classes").get<std::size_t>();
  d.cond_embedding = matrix_from_json(j.at("cond_embedding"));
  d.backbone = field_from_json(j.at("backbone"));
  d.feature_weight = matrix_from_json(j.at("feature_weight"));
  d.feature_bias = matrix_from_json(j.at("feature_bias"));
  d.head = mlp_from_json(j.at("head"));
  d.spectral_norm = j.at("spectral_norm").get<bool>();
  d.spectral_iters = j.at("spectral_iters").get<int>();
  for (const auto& u : j.at("spectral_vectors")) d.spectral_vectors.push_back(matrix_from_json(u));
  d.probe_t = j.at("probe_t").get<double>();
  return d;
}

json adam_to_json(const diff::AdamState& s) {
  json m = json::array();
  json v = json::array();
  for (const auto& x : s.m) m.push_back(matrix_to_json(x));
  for (const auto& x : s.v) v.push_back(matrix_to_json(x));
  return {{"step", s.step},
          {"hyper",
           {{"lr", s.hyper.lr},
            {"beta1", s.hyper.beta1},
            {"beta2", s.hyper.beta2},
            {"eps", s.hyper.eps},
            {"weight_decay", s.hyper.weight_decay}}},
          {"m", m},
          {"v", v}};
}

diff::AdamState adam_from_json(const json& j) {
  diff::AdamState s;
  s.step = j.at("step").get<std::int64_t>();
  const auto& h = j.at("hyper");
  s.hyper = {h.at("lr").get<double>(), h.at("beta1").get<double>(), h.at("beta2").get<double>(),
             h.at("eps").get<double>(), h.at("weight_decay").get<double>()};
  for (const auto& x : j.at("m")) s.m.push_back(matrix_from_json(x));
  for (const auto& x : j.at("v")) s.v.push_back(matrix_from_json(x));
  return s;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}},
          {"values", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from_json(const json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw CheckpointError("matrix shape must have two entries");
  auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != shape[0] * shape[1]) {
    throw CheckpointError("matrix has " + std::to_string(values.size()) + " values for shape " +
                          std::to_string(shape[0]) + "x" + std::to_string(shape[1]));
  }
  return Matrix(shape[0], shape[1], std::move(values));
}

json checkpoint_to_json(const ExperimentConfig& config, const adversary::TrainState& state) {
  return {{"format", "faillab-checkpoint"},
          {"version", kCheckpointVersion},
          {"config", serialize_config(config)},
          {"step", state.step},
          {"seed", state.seed},
          {"policy", field_to_json(state.policy)},
          {"reference", field_to_json(state.reference)},
          {"discriminator", disc_to_json(state.disc)},
          {"policy_opt", adam_to_json(state.policy_opt)},
          {"disc_opt", adam_to_json(state.disc_opt)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != "faillab-checkpoint") throw CheckpointError("not a faillab checkpoint");
    if (j.at("version") != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint c;
    c.config = parse_config_text(j.at("config").get<std::string>(), "<checkpoint>");
    c.state.step = j.at("step").get<long>();
    c.state.seed = j.at("seed").get<std::uint64_t>();
    c.state.policy = field_from_json(j.at("policy"));
    c.state.reference = field_from_json(j.at("reference"));
    c.state.disc = disc_from_json(j.at("discriminator"));
    c.state.policy_opt = adam_from_json(j.at("policy_opt"));
    c.state.disc_opt = adam_from_json(j.at("disc_opt"));
    c.state.policy.validate();
    c.state.reference.validate();
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigurationError& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config,
                     const adversary::TrainState& state) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out << checkpoint_to_json(config, state).dump() << '\n';
    if (!out.flush()) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint '" + path.string() + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace faillab::harness

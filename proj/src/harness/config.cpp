// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/harness/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace faillab::harness {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kSft: return "sft";
    case Method::kRewardGrad: return "reward_grad";
    case Method::kFpoStatic: return "fpo_static";
    case Method::kOnlineDpo: return "online_dpo";
    case Method::kFailPd: return "fail_pd";
    case Method::kFailPg: return "fail_pg";
    case Method::kFailPdReward: return "fail_pd+reward";
    case Method::kFailPgReward: return "fail_pg+reward";
  }
  return "fail_pd";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kSft, Method::kRewardGrad, Method::kFpoStatic, Method::kOnlineDpo,
                   Method::kFailPd, Method::kFailPg, Method::kFailPdReward,
                   Method::kFailPgReward}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigValueError("unknown method '" + std::string(name) + "'", "experiment.method");
}

bool uses_discriminator(Method m) {
  return m == Method::kFailPd || m == Method::kFailPg || m == Method::kFailPdReward ||
         m == Method::kFailPgReward;
}

bool uses_static_reward(Method m) {
  return m == Method::kRewardGrad || m == Method::kFpoStatic || m == Method::kFailPdReward ||
         m == Method::kFailPgReward;
}

bool is_policy_gradient(Method m) {
  return m == Method::kFpoStatic || m == Method::kFailPg || m == Method::kFailPgReward;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

using Ptree = boost::property_tree::ptree;

[[noreturn]] void bad_value(const std::string& key, std::string_view value,
                            const std::string& expected) {
  throw ConfigValueError(
      "invalid value '" + std::string(value) + "' for " + key + ": expected " + expected, key);
}

double to_double(std::string_view s, const std::string& key) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    bad_value(key, s, "a finite number");
  }
  return v;
}

long to_long(std::string_view s, const std::string& key) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) bad_value(key, s, "an integer");
  return v;
}

std::uint64_t to_u64(std::string_view s, const std::string& key) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    bad_value(key, s, "a non-negative integer");
  }
  return v;
}

std::size_t to_size(std::string_view s, const std::string& key) {
  const long v = to_long(s, key);
  if (v < 0) bad_value(key, s, "a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool to_bool(std::string_view s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  bad_value(key, s, "true or false");
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    std::string_view part = s.substr(start, pos == std::string_view::npos ? pos : pos - start);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    out.push_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> to_doubles(std::string_view s, const std::string& key) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (auto part : split(s, ',')) out.push_back(to_double(part, key));
  return out;
}

std::vector<std::size_t> to_sizes(std::string_view s, const std::string& key) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  for (auto part : split(s, ',')) out.push_back(to_size(part, key));
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F format) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += format(v[i]);
  }
  return out;
}

std::string doubles_text(const std::vector<double>& v) { return join(v, format_double); }
std::string sizes_text(const std::vector<std::size_t>& v) {
  return join(v, [](std::size_t x) { return std::to_string(x); });
}

eval::Component parse_component(std::string_view text, const std::string& key) {
  eval::Component c;
  bool has_mean = false;
  for (auto field : split(text, ' ')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) bad_value(key, text, "name=value fields");
    const auto name = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (name == "cond") {
      c.cond = static_cast<int>(to_long(value, key));
    } else if (name == "weight") {
      c.weight = to_double(value, key);
    } else if (name == "mean") {
      c.mean = to_doubles(value, key);
      has_mean = true;
    } else if (name == "std") {
      c.std = to_double(value, key);
    } else {
      bad_value(key, text, "fields cond, weight, mean, std");
    }
  }
  if (!has_mean) bad_value(key, text, "a mean=... field");
  return c;
}

std::string component_text(const eval::Component& c) {
  return "cond=" + std::to_string(c.cond) + " weight=" + format_double(c.weight) +
         " mean=" + doubles_text(c.mean) + " std=" + format_double(c.std);
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view, const std::string&)> parse;
  std::function<std::string(const ExperimentConfig&)> print;
};

#define FAILLAB_FIELD(SECTION, KEY, MEMBER, PARSE, PRINT)                                    \
  Field {                                                                                     \
    SECTION, KEY,                                                                             \
        [](ExperimentConfig& c, std::string_view v, [[maybe_unused]] const std::string& k) { \
          c.MEMBER = PARSE;                                                                   \
        }, \
        [](const ExperimentConfig& c) { return PRINT; }                                       \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FAILLAB_FIELD("experiment", "method", method, parse_method(v),
                    std::string(method_name(c.method))),
      FAILLAB_FIELD("experiment", "name", name, std::string(v), c.name),
      FAILLAB_FIELD("experiment", "seed", seed, to_u64(v, k), std::to_string(c.seed)),
      FAILLAB_FIELD("experiment", "total_steps", total_steps, to_long(v, k),
                    std::to_string(c.total_steps)),
      FAILLAB_FIELD("experiment", "bc_pretrain_steps", bc_pretrain_steps, to_long(v, k),
                    std::to_string(c.bc_pretrain_steps)),
      FAILLAB_FIELD("experiment", "batch_size", batch_size, to_size(v, k),
                    std::to_string(c.batch_size)),
      FAILLAB_FIELD("experiment", "eval_every", eval_every, to_long(v, k),
                    std::to_string(c.eval_every)),
      FAILLAB_FIELD("experiment", "eval_samples", eval_samples, to_size(v, k),
                    std::to_string(c.eval_samples)),
      FAILLAB_FIELD("experiment", "eval_projections", eval_projections, to_size(v, k),
                    std::to_string(c.eval_projections)),
      FAILLAB_FIELD("experiment", "output_dir", output_dir, std::string(v), c.output_dir),
      FAILLAB_FIELD("experiment", "sft_data", sft_data, std::string(v), c.sft_data),

      FAILLAB_FIELD("target", "kind", target.kind, eval::parse_target_kind(v),
                    std::string(eval::target_kind_name(c.target.kind))),
      FAILLAB_FIELD("target", "dim", target.dim, to_size(v, k), std::to_string(c.target.dim)),
      FAILLAB_FIELD("target", "classes", target.classes, to_size(v, k),
                    std::to_string(c.target.classes)),
      FAILLAB_FIELD("target", "cells", target.cells, static_cast<int>(to_long(v, k)),
                    std::to_string(c.target.cells)),
      FAILLAB_FIELD("target", "scale", target.scale, to_double(v, k),
                    format_double(c.target.scale)),
      FAILLAB_FIELD("target", "noise", target.noise, to_double(v, k),
                    format_double(c.target.noise)),

      FAILLAB_FIELD("policy", "hidden", policy_hidden, to_sizes(v, k), sizes_text(c.policy_hidden)),
      FAILLAB_FIELD("policy", "activation", policy_activation, diff::parse_activation(v),
                    std::string(diff::activation_name(c.policy_activation))),
      FAILLAB_FIELD("policy", "lr", policy_lr, to_double(v, k), format_double(c.policy_lr)),
      FAILLAB_FIELD("policy", "zero_output", policy_zero_output, to_bool(v, k),
                    std::string(c.policy_zero_output ? "true" : "false")),
      FAILLAB_FIELD("policy", "bc_lr", bc_lr, to_double(v, k), format_double(c.bc_lr)),

      FAILLAB_FIELD("discriminator", "variant", disc.variant, adversary::parse_variant(v),
                    std::string(adversary::variant_name(c.disc.variant))),
      FAILLAB_FIELD("discriminator", "hidden", disc.hidden, to_sizes(v, k),
                    sizes_text(c.disc.hidden)),
      FAILLAB_FIELD("discriminator", "activation", disc.activation, diff::parse_activation(v),
                    std::string(diff::activation_name(c.disc.activation))),
      FAILLAB_FIELD("discriminator", "lr", disc_lr, to_double(v, k), format_double(c.disc_lr)),
      FAILLAB_FIELD("discriminator", "spectral_norm", disc.spectral_norm, to_bool(v, k),
                    std::string(c.disc.spectral_norm ? "true" : "false")),
      FAILLAB_FIELD("discriminator", "spectral_iters", disc.spectral_iters,
                    static_cast<int>(to_long(v, k)), std::to_string(c.disc.spectral_iters)),
      FAILLAB_FIELD("discriminator", "probe_t", disc.probe_t, to_double(v, k),
                    format_double(c.disc.probe_t)),
      FAILLAB_FIELD("discriminator", "feature_width", disc.feature_width, to_size(v, k),
                    std::to_string(c.disc.feature_width)),

      FAILLAB_FIELD("optimizer", "beta1", beta1, to_double(v, k), format_double(c.beta1)),
      FAILLAB_FIELD("optimizer", "beta2", beta2, to_double(v, k), format_double(c.beta2)),
      FAILLAB_FIELD("optimizer", "eps", adam_eps, to_double(v, k), format_double(c.adam_eps)),
      FAILLAB_FIELD("optimizer", "weight_decay", weight_decay, to_double(v, k),
                    format_double(c.weight_decay)),
      FAILLAB_FIELD("optimizer", "policy_clip", policy_clip, to_double(v, k),
                    format_double(c.policy_clip)),
      FAILLAB_FIELD("optimizer", "disc_clip", disc_clip, to_double(v, k),
                    format_double(c.disc_clip)),

      FAILLAB_FIELD("fail", "group_size", group_size, static_cast<int>(to_long(v, k)),
                    std::to_string(c.group_size)),
      FAILLAB_FIELD("fail", "delta_t", delta_t, to_double(v, k), format_double(c.delta_t)),
      FAILLAB_FIELD("fail", "hybrid_bc_weight", hybrid_bc_weight, to_double(v, k),
                    format_double(c.hybrid_bc_weight)),
      FAILLAB_FIELD("fail", "warmup_steps", warmup_steps, static_cast<int>(to_long(v, k)),
                    std::to_string(c.warmup_steps)),

      FAILLAB_FIELD("pg", "clip_eps", clip_eps, to_double(v, k), format_double(c.clip_eps)),
      FAILLAB_FIELD("pg", "inner_epochs", inner_epochs, static_cast<int>(to_long(v, k)),
                    std::to_string(c.inner_epochs)),
      FAILLAB_FIELD("pg", "beta_kl", beta_kl, to_double(v, k), format_double(c.beta_kl)),
      FAILLAB_FIELD("pg", "adv_eps", adv_eps, to_double(v, k), format_double(c.adv_eps)),
      FAILLAB_FIELD("pg", "mc_pairs", mc_pairs, static_cast<int>(to_long(v, k)),
                    std::to_string(c.mc_pairs)),
      FAILLAB_FIELD("pg", "hybrid", hybrid, to_bool(v, k),
                    std::string(c.hybrid ? "true" : "false")),

      FAILLAB_FIELD("dpo", "beta", beta_dpo, to_double(v, k), format_double(c.beta_dpo)),
      FAILLAB_FIELD("dpo", "mc_pairs", dpo_mc_pairs, static_cast<int>(to_long(v, k)),
                    std::to_string(c.dpo_mc_pairs)),

      FAILLAB_FIELD("reward", "kind", reward.kind, baselines::parse_reward_kind(v),
                    std::string(baselines::reward_kind_name(c.reward.kind))),
      FAILLAB_FIELD("reward", "target", reward.target, to_doubles(v, k),
                    doubles_text(c.reward.target)),
      FAILLAB_FIELD("reward", "scale", reward.scale, to_double(v, k),
                    format_double(c.reward.scale)),
      FAILLAB_FIELD("reward", "weight", reward.weight, to_double(v, k),
                    format_double(c.reward.weight)),
      FAILLAB_FIELD("reward", "fail_weight", reward.fail_weight, to_double(v, k),
                    format_double(c.reward.fail_weight)),
  };
  return table;
}

#undef FAILLAB_FIELD

const std::vector<std::string>& section_order() {
  static const std::vector<std::string> order = {"experiment", "target",    "policy",
                                                 "discriminator", "optimizer", "fail",
                                                 "pg",         "dpo",       "reward"};
  return order;
}

/// Runs `f`, re-raising enum/name parse failures as value errors on `key`.
template <class F>
void with_key(const std::string& key, std::string_view value, F f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const ConfigurationError& e) {
    throw ConfigValueError("invalid value '" + std::string(value) + "' for " + key + ": " +
                               e.what(),
                           key);
  }
}

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigValueError(key + ": " + message, key);
}

}  // namespace

eval::TargetSpec target_preset(std::string_view name) {
  eval::TargetSpec t;
  if (name == "gaussian_1d") {
    t.dim = 1;
    t.components = {{0, 1.0, {2.0}, 1.0}};
  } else if (name == "two_mode_2d") {
    t.dim = 2;
    t.components = {{0, 1.0, {-2.0, 0.0}, 0.5}, {0, 1.0, {2.0, 0.0}, 0.5}};
  } else if (name == "point_mass") {
    t.dim = 1;
    t.components = {{0, 1.0, {0.0}, 0.0}};
  } else if (name == "checkerboard") {
    t.kind = eval::TargetKind::kCheckerboard;
    t.cells = 4;
    t.scale = 2.0;
  } else if (name == "two_moons") {
    t.kind = eval::TargetKind::kTwoMoons;
    t.scale = 1.0;
    t.noise = 0.1;
  } else {
    throw ConfigValueError("unknown target preset '" + std::string(name) + "'", "target.preset");
  }
  return t;
}

void ExperimentConfig::validate() const {
  require(total_steps >= 0, "experiment.total_steps", "must be >= 0");
  require(bc_pretrain_steps >= 0, "experiment.bc_pretrain_steps", "must be >= 0");
  require(batch_size >= 1, "experiment.batch_size", "must be >= 1");
  require(eval_every >= 1, "experiment.eval_every", "must be >= 1");
  require(eval_samples >= 2, "experiment.eval_samples", "must be >= 2");
  require(eval_projections >= 1, "experiment.eval_projections", "must be >= 1");
  require(sft_data == "expert" || sft_data == "bc", "experiment.sft_data",
          "must be 'expert' or 'bc'");
  require(!name.empty() && name.find('/') == std::string::npos, "experiment.name",
          "must be a non-empty file name");
  try {
    target.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const ConfigurationError& e) {
    throw ConfigValueError(std::string("target.component: ") + e.what(), "target.component");
  }
  if (!bc_components.empty()) {
    try {
      bc_target().validate();
    } catch (const ConfigurationError& e) {
      throw ConfigValueError(std::string("target.bc_component: ") + e.what(),
                             "target.bc_component");
    }
  }
  require(!policy_hidden.empty(), "policy.hidden", "needs at least one hidden layer");
  for (auto w : policy_hidden) require(w >= 1, "policy.hidden", "widths must be >= 1");
  require(policy_lr > 0.0, "policy.lr", "must be > 0");
  require(bc_lr > 0.0, "policy.bc_lr", "must be > 0");
  require(!disc.hidden.empty(), "discriminator.hidden", "needs at least one hidden layer");
  for (auto w : disc.hidden) require(w >= 1, "discriminator.hidden", "widths must be >= 1");
  require(disc_lr > 0.0, "discriminator.lr", "must be > 0");
  require(disc.spectral_iters >= 1, "discriminator.spectral_iters", "must be >= 1");
  require(disc.probe_t >= 0.0 && disc.probe_t < 1.0, "discriminator.probe_t",
          "must lie in [0, 1)");
  require(disc.feature_width >= 1, "discriminator.feature_width", "must be >= 1");
  require(beta1 >= 0.0 && beta1 < 1.0, "optimizer.beta1", "must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "optimizer.beta2", "must lie in [0, 1)");
  require(adam_eps > 0.0, "optimizer.eps", "must be > 0");
  require(weight_decay >= 0.0, "optimizer.weight_decay", "must be >= 0");
  require(policy_clip > 0.0, "optimizer.policy_clip", "must be > 0");
  require(disc_clip > 0.0, "optimizer.disc_clip", "must be > 0");
  if (is_policy_gradient(method)) {
    require(group_size >= 2, "fail.group_size",
            "policy-gradient methods need G >= 2 (group advantage std undefined for G = 1)");
  } else {
    require(group_size >= 1, "fail.group_size", "must be >= 1");
  }
  require(delta_t > 0.0 && delta_t < 1.0 - flow::kDenoiseMargin, "fail.delta_t",
          "must lie in (0, 1 - 1e-3)");
  require(hybrid_bc_weight >= 0.0, "fail.hybrid_bc_weight", "must be >= 0");
  require(warmup_steps >= 0, "fail.warmup_steps", "must be >= 0");
  require(clip_eps > 0.0 && clip_eps < 1.0, "pg.clip_eps", "must lie in (0, 1)");
  require(inner_epochs >= 1, "pg.inner_epochs", "must be >= 1");
  require(beta_kl >= 0.0, "pg.beta_kl", "must be >= 0");
  require(adv_eps > 0.0, "pg.adv_eps", "must be > 0");
  require(mc_pairs >= 1, "pg.mc_pairs", "must be >= 1");
  require(beta_dpo > 0.0, "dpo.beta", "must be > 0");
  require(dpo_mc_pairs >= 1, "dpo.mc_pairs", "must be >= 1");
  require(reward.target.empty() || reward.target.size() == target.dim, "reward.target",
          "needs one entry per target dimension");
}

fail_pd::PdConfig ExperimentConfig::pd_config() const {
  fail_pd::PdConfig c;
  c.group_size = group_size;
  c.delta_t = delta_t;
  c.hybrid_bc_weight = hybrid_bc_weight;
  c.warmup.warmup_steps = warmup_steps;
  c.policy_clip = policy_clip;
  c.disc_clip = disc_clip;
  return c;
}

fail_pg::PgConfig ExperimentConfig::pg_config() const {
  fail_pg::PgConfig c;
  c.group_size = group_size;
  c.clip_eps = clip_eps;
  c.inner_epochs = inner_epochs;
  c.beta_kl = beta_kl;
  c.adv_eps = adv_eps;
  c.mc_pairs = mc_pairs;
  c.hybrid = hybrid;
  c.delta_t = delta_t;
  c.warmup.warmup_steps = warmup_steps;
  c.policy_clip = policy_clip;
  c.disc_clip = disc_clip;
  return c;
}

baselines::DpoConfig ExperimentConfig::dpo_config() const {
  baselines::DpoConfig c;
  c.beta_dpo = beta_dpo;
  c.mc_pairs = dpo_mc_pairs;
  c.delta_t = delta_t;
  c.policy_clip = policy_clip;
  return c;
}

baselines::StaticReward ExperimentConfig::static_reward() const {
  return baselines::StaticReward(reward.kind, reward.target, reward.scale);
}

diff::AdamHyper ExperimentConfig::policy_hyper() const {
  return {policy_lr, beta1, beta2, adam_eps, weight_decay};
}

diff::AdamHyper ExperimentConfig::disc_hyper() const {
  return {disc_lr, beta1, beta2, adam_eps, weight_decay};
}

eval::TargetSpec ExperimentConfig::bc_target() const {
  if (bc_components.empty()) return target;
  eval::TargetSpec t = target;
  t.kind = eval::TargetKind::kGaussianMixture;
  t.components = bc_components;
  return t;
}

ExperimentConfig parse_config_text(std::string_view text, std::string_view source) {
  Ptree tree;
  {
    std::istringstream in{std::string(text)};
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigSyntaxError(std::string(source) + ":" + std::to_string(e.line()) + ": " +
                                  e.message(),
                              "line " + std::to_string(e.line()));
    }
  }
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.section + "." + f.key] = &f;

  ExperimentConfig config;
  // A preset replaces the whole target before individual keys apply.
  if (auto target = tree.get_child_optional("target")) {
    if (auto preset = target->get_optional<std::string>("preset")) {
      config.target = target_preset(*preset);
    }
  }
  bool has_components = false;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigKeyError(std::string(source) + ": key '" + section + "' outside any section",
                           section);
    }
    if (std::find(section_order().begin(), section_order().end(), section) ==
        section_order().end()) {
      throw ConfigKeyError(std::string(source) + ": unknown section [" + section + "]", section);
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const std::string value = node.data();
      if (!node.empty()) throw ConfigSyntaxError("nested key " + full, full);
      if (full == "target.preset") continue;
      if (section == "target" &&
          (key.rfind("component.", 0) == 0 || key.rfind("bc_component.", 0) == 0)) {
        const bool bc = key[0] == 'b';
        to_size(std::string_view(key).substr(key.find('.') + 1), full);
        auto comp = parse_component(value, full);
        if (bc) {
          config.bc_components.push_back(std::move(comp));
        } else {
          if (!has_components) config.target.components.clear();
          has_components = true;
          config.target.components.push_back(std::move(comp));
        }
        continue;
      }
      const auto it = by_key.find(full);
      if (it == by_key.end()) {
        throw ConfigKeyError(std::string(source) + ": unknown key '" + full + "'", full);
      }
      with_key(full, value, [&] { it->second->parse(config, value, full); });
    }
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFileError("cannot open config file '" + path.string() + "'", "");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const bool named = text.find("\nname") != std::string::npos || text.rfind("name", 0) == 0;
  ExperimentConfig config = parse_config_text(text, path.string());
  if (!named) config.name = path.stem().string();
  return config;
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& section : section_order()) {
    out += "[" + section + "]\n";
    for (const auto& f : fields()) {
      if (f.section != section) continue;
      out += f.key + " = " + f.print(config) + "\n";
    }
    if (section == "target") {
      for (std::size_t i = 0; i < config.target.components.size(); ++i) {
        out += "component." + std::to_string(i) + " = " +
               component_text(config.target.components[i]) + "\n";
      }
      for (std::size_t i = 0; i < config.bc_components.size(); ++i) {
        out += "bc_component." + std::to_string(i) + " = " +
               component_text(config.bc_components[i]) + "\n";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace faillab::harness

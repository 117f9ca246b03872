// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "faillab/adversary/discriminator.hpp"
#include "faillab/baselines/baselines.hpp"
#include "faillab/eval/targets.hpp"
#include "faillab/fail_pd/fail_pd.hpp"
#include "faillab/fail_pg/fail_pg.hpp"

namespace faillab::harness {

/// Base of every configuration failure; `key()` is "section.key" or empty.
class ConfigError : public ConfigurationError {
 public:
  ConfigError(const std::string& what, std::string key)
      : ConfigurationError(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class ConfigFileError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};
/// Malformed line; key() names the line.
class ConfigSyntaxError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};
class ConfigKeyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};
/// Unparseable value or violated invariant.
class ConfigValueError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum class Method {
  kSft,
  kRewardGrad,
  kFpoStatic,
  kOnlineDpo,
  kFailPd,
  kFailPg,
  kFailPdReward,
  kFailPgReward,
};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
bool uses_discriminator(Method m);
bool uses_static_reward(Method m);
bool is_policy_gradient(Method m);

struct RewardConfig {
  baselines::RewardKind kind = baselines::RewardKind::kPointAttractor;
  std::vector<double> target;
  double scale = 1.0;
  double weight = 1.0;       // w_r in the combined pathwise loss
  double fail_weight = 1.0;  // weight on the FAIL term in fail_pd+reward

  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

struct ExperimentConfig {
  // [experiment]
  Method method = Method::kFailPd;
  std::string name = "run";
  std::uint64_t seed = 0;
  long total_steps = 1000;
  long bc_pretrain_steps = 0;
  std::size_t batch_size = 64;  // expert rows (conditionings) per step
  long eval_every = 100;
  std::size_t eval_samples = 1000;
  std::size_t eval_projections = 128;
  std::string output_dir = "runs";
  /// Data continued SFT trains on: "expert" or "bc".
  std::string sft_data = "expert";

  // [target]; bc_components empty means BC uses the target itself.
  eval::TargetSpec target;
  std::vector<eval::Component> bc_components;

  // [policy]
  std::vector<std::size_t> policy_hidden{64, 64};
  diff::Activation policy_activation = diff::Activation::kTanh;
  double policy_lr = 1e-3;
  double bc_lr = 1e-3;
  /// Start from v ≡ 0 (zeroed output layer) instead of random outputs.
  bool policy_zero_output = false;

  // [discriminator]
  adversary::DiscriminatorSpec disc;
  double disc_lr = 1e-3;

  // [optimizer]
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double policy_clip = 1.0;
  double disc_clip = 1.0;

  // [fail]
  int group_size = 3;
  double delta_t = 1.0 / 28.0;
  double hybrid_bc_weight = 0.1;
  int warmup_steps = 25;

  // [pg]
  double clip_eps = 0.2;
  int inner_epochs = 1;
  double beta_kl = 0.05;
  double adv_eps = 1e-8;
  int mc_pairs = 4;
  bool hybrid = true;

  // [dpo]
  double beta_dpo = 1.0;
  int dpo_mc_pairs = 4;

  // [reward]
  RewardConfig reward;

  /// Checks every invariant; throws ConfigValueError naming the key.
  void validate() const;

  fail_pd::PdConfig pd_config() const;
  fail_pg::PgConfig pg_config() const;
  baselines::DpoConfig dpo_config() const;
  baselines::StaticReward static_reward() const;
  diff::AdamHyper policy_hyper() const;
  diff::AdamHyper disc_hyper() const;
  /// Distribution used for BC pretraining.
  eval::TargetSpec bc_target() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses INI text. `source` is used in error messages.
ExperimentConfig parse_config_text(std::string_view text, std::string_view source = "<text>");
/// Reads and parses a file; the run name defaults to the file stem.
ExperimentConfig parse_config(const std::filesystem::path& path);
/// Canonical text listing every key; parse_config_text(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Built-in targets by name: gaussian_1d, two_mode_2d, point_mass, checkerboard,
/// two_moons. Throws ConfigValueError for unknown names.
eval::TargetSpec target_preset(std::string_view name);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace faillab::harness

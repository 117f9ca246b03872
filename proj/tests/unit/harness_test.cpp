// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "faillab/harness/checkpoint.hpp"
#include "faillab/harness/config.hpp"
#include "faillab/harness/run.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
namespace h = faillab::harness;
using faillab::testing::TempDir;

namespace {

const char* kSmallRun = R"(
[experiment]
method = fail_pd
name = small
seed = 11
total_steps = 12
batch_size = 8
eval_every = 4
eval_samples = 64
eval_projections = 16

[target]
preset = two_mode_2d

[policy]
hidden = 8,8
lr = 0.01

[discriminator]
hidden = 8,8
lr = 0.01

[fail]
warmup_steps = 3
delta_t = 0.125
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

h::ExperimentConfig small_config(std::string_view method = "fail_pd") {
  auto c = h::parse_config_text(kSmallRun);
  c.method = h::parse_method(method);
  return c;
}

h::RunOptions in_dir(const fs::path& dir) {
  h::RunOptions o;
  o.run_dir = dir;
  return o;
}

template <class E>
std::string key_of(std::string_view text) {
  try {
    h::parse_config_text(text);
  } catch (const E& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("parse_config: minimal config fills the defaults") {
  const auto c = h::parse_config_text("[experiment]\nmethod = fail_pg\nseed = 3\n"
                                      "[target]\npreset = gaussian_1d\n");
  CHECK(c.method == h::Method::kFailPg);
  CHECK(c.seed == 3);
  CHECK(c.beta1 == 0.9);
  CHECK(c.beta2 == 0.999);
  CHECK(c.weight_decay == 0.0);
  CHECK(c.policy_clip == 1.0);
  CHECK(c.disc_clip == 1.0);
  CHECK(c.beta_kl == 0.05);
  CHECK(c.warmup_steps == 25);
  CHECK(c.group_size == 3);
  CHECK(c.hybrid_bc_weight == 0.1);
  CHECK(c.target.dim == 1);
  CHECK(c.target.components.size() == 1);
}

TEST_CASE("parse_config: every failure class names the key") {
  CHECK(key_of<h::ConfigKeyError>("[experiment]\nbogus = 1\n[target]\npreset=gaussian_1d\n") ==
        "experiment.bogus");
  CHECK(key_of<h::ConfigKeyError>("[nowhere]\nx = 1\n") == "nowhere");
  CHECK(key_of<h::ConfigValueError>("[experiment]\nseed = abc\n[target]\npreset=gaussian_1d\n") ==
        "experiment.seed");
  CHECK(key_of<h::ConfigValueError>("[experiment]\nmethod = magic\n") == "experiment.method");
  CHECK(key_of<h::ConfigValueError>(
            "[experiment]\nmethod = fail_pg\n[target]\npreset=gaussian_1d\n[fail]\ngroup_size = 1\n") ==
        "fail.group_size");
  CHECK(key_of<h::ConfigValueError>("[experiment]\nmethod = fail_pd\n") == "target.component");
  CHECK(key_of<h::ConfigSyntaxError>("[experiment\nseed = 1\n") != "<no error>");
  CHECK_THROWS_AS(h::parse_config("/nonexistent/config.ini"), h::ConfigFileError);

  try {
    h::parse_config_text(
        "[experiment]\nmethod = fail_pg\n[target]\npreset=gaussian_1d\n[fail]\ngroup_size = 1\n");
  } catch (const h::ConfigValueError& e) {
    CHECK(std::string(e.what()).find("G >= 2") != std::string::npos);
  }
  // G = 1 stays legal for the pathwise method.
  CHECK_NOTHROW(h::parse_config_text(
      "[experiment]\nmethod = fail_pd\n[target]\npreset=gaussian_1d\n[fail]\ngroup_size = 1\n"));
}

TEST_CASE("parse_config: serialize then re-parse is the identity") {
  auto c = small_config();
  c.bc_components = {{0, 1.0, {-2.0, 0.0}, 0.5}};
  c.reward.kind = faillab::baselines::RewardKind::kPointAttractor;
  c.reward.target = {0.1, 1.0 / 3.0};
  c.delta_t = 1.0 / 28.0;
  const auto text = h::serialize_config(c);
  const auto back = h::parse_config_text(text);
  CHECK(back == c);
  CHECK(h::serialize_config(back) == text);

  for (const char* preset : {"gaussian_1d", "two_mode_2d", "point_mass", "checkerboard", "two_moons"}) {
    auto p = small_config();
    p.target = h::target_preset(preset);
    CHECK(h::parse_config_text(h::serialize_config(p)) == p);
  }
}

TEST_CASE("parse_config: run name defaults to the file stem") {
  TempDir tmp;
  const auto path = tmp.path() / "my_sweep_point.ini";
  std::ofstream(path) << "[experiment]\nseed = 1\n[target]\npreset = gaussian_1d\n";
  CHECK(h::parse_config(path).name == "my_sweep_point");
}

TEST_CASE("checkpoint: save then load restores the state bitwise") {
  TempDir tmp;
  auto config = small_config("fail_pg");
  config.disc.spectral_norm = true;
  auto state = h::initial_state(config);
  for (int i = 0; i < 5; ++i) h::train_step(config, state, h::expert_batch(config, config.target, i));
  const auto path = tmp.path() / "ck.json";
  h::save_checkpoint(path, config, state);
  const auto loaded = h::load_checkpoint(path);
  CHECK(loaded.state == state);
  CHECK(loaded.config == config);

  std::ofstream(tmp.path() / "bad.json") << "{\"format\": \"other\"}";
  CHECK_THROWS_AS(h::load_checkpoint(tmp.path() / "bad.json"), h::CheckpointError);
  CHECK_THROWS_AS(h::load_checkpoint(tmp.path() / "missing.json"), h::CheckpointError);
}

TEST_CASE("run_experiment: layout, cadence and status") {
  TempDir tmp;
  const auto result = h::run_experiment(small_config(), in_dir(tmp.path() / "r"));
  CHECK(result.status == h::RunStatus::kCompleted);
  CHECK(result.steps_completed == 12);
  const auto dir = tmp.path() / "r";
  for (const char* f : {"config.ini", "run.json", "steps.csv", "evals.jsonl",
                        "checkpoints/step_0.json", "checkpoints/step_12.json"}) {
    CHECK(fs::exists(dir / f));
  }
  std::istringstream steps(slurp(dir / "steps.csv"));
  std::string line;
  std::getline(steps, line);
  CHECK(line == h::kStepsSchema);
  std::getline(steps, line);
  CHECK(line.rfind("step,disc_loss,policy_loss", 0) == 0);
  long expected = 0;
  while (std::getline(steps, line)) {
    CHECK(std::stol(line) == expected);
    ++expected;
  }
  CHECK(expected == 12);
  const auto evals = h::read_evals(dir);
  REQUIRE(evals.size() == 4);
  for (std::size_t i = 0; i < evals.size(); ++i) {
    CHECK(evals[i].step == static_cast<long>(4 * i));
    CHECK(std::isfinite(evals[i].report.sliced_wasserstein));
  }
  CHECK(slurp(dir / "run.json").find("\"completed\"") != std::string::npos);
  CHECK(h::parse_config_text(slurp(dir / "config.ini")) == small_config());
}

TEST_CASE("run_experiment: zero steps logs only the initial snapshot") {
  TempDir tmp;
  auto c = small_config();
  c.total_steps = 0;
  c.bc_pretrain_steps = 5;
  const auto result = h::run_experiment(c, in_dir(tmp.path()));
  CHECK(result.status == h::RunStatus::kCompleted);
  CHECK(h::read_evals(tmp.path()).size() == 1);
}

TEST_CASE("run_experiment: repeated runs give byte-identical logs") {
  for (const char* method : {"fail_pd", "fail_pg", "online_dpo", "fail_pd+reward"}) {
    TempDir tmp;
    auto c = small_config(method);
    c.reward.kind = faillab::baselines::RewardKind::kNormMax;
    h::run_experiment(c, in_dir(tmp.path() / "a"));
    h::run_experiment(c, in_dir(tmp.path() / "b"));
    INFO(method);
    CHECK(slurp(tmp.path() / "a" / "steps.csv") == slurp(tmp.path() / "b" / "steps.csv"));
    CHECK(slurp(tmp.path() / "a" / "evals.jsonl") == slurp(tmp.path() / "b" / "evals.jsonl"));
  }
}

TEST_CASE("run_experiment: resume from a checkpoint matches the uninterrupted run") {
  for (const char* method : {"fail_pd", "fail_pg"}) {
    TempDir tmp;
    auto c = small_config(method);
    c.disc.spectral_norm = true;
    const auto full = h::run_experiment(c, in_dir(tmp.path() / "full"));

    std::atomic<bool> stop{false};
    auto interrupted = in_dir(tmp.path() / "part");
    interrupted.stop = &stop;
    interrupted.on_step = [&](const faillab::adversary::TrainState& s, const h::StepRecord&) {
      if (s.step == 6) stop = true;
    };
    const auto part = h::run_experiment(c, interrupted);
    CHECK(part.status == h::RunStatus::kInterrupted);
    CHECK(part.steps_completed == 6);
    CHECK(slurp(tmp.path() / "part" / "run.json").find("\"interrupted\"") != std::string::npos);

    auto resume = in_dir(tmp.path() / "part");
    resume.resume_from = tmp.path() / "part" / "checkpoints" / "step_4.json";
    const auto resumed = h::run_experiment(c, resume);
    INFO(method);
    CHECK(resumed.status == h::RunStatus::kCompleted);
    CHECK(resumed.state == full.state);
    CHECK(slurp(tmp.path() / "part" / "steps.csv") == slurp(tmp.path() / "full" / "steps.csv"));
    CHECK(slurp(tmp.path() / "part" / "evals.jsonl") == slurp(tmp.path() / "full" / "evals.jsonl"));
  }
}

TEST_CASE("run_experiment: divergence keeps the partial log") {
  TempDir tmp;
  auto c = small_config("reward_grad");
  c.warmup_steps = 0;
  c.reward.kind = faillab::baselines::RewardKind::kNormMax;
  c.reward.scale = 1e308;
  const auto result = h::run_experiment(c, in_dir(tmp.path()));
  CHECK(result.status == h::RunStatus::kDiverged);
  CHECK(!result.error.empty());
  CHECK(slurp(tmp.path() / "run.json").find("\"diverged\"") != std::string::npos);
  CHECK(fs::exists(tmp.path() / "steps.csv"));
}

TEST_CASE("run_directory honours the environment override") {
  auto c = small_config();
  c.output_dir = "base";
  ::unsetenv(h::kOutputDirEnv);
  CHECK(h::run_directory(c) == fs::path("base") / "small");
  ::setenv(h::kOutputDirEnv, "/tmp/elsewhere", 1);
  CHECK(h::run_directory(c) == fs::path("/tmp/elsewhere") / "small");
  ::unsetenv(h::kOutputDirEnv);
}

TEST_CASE("bc_pretrain lowers expert CFM loss and warmup freezes the policy") {
  auto c = small_config("fail_pd");
  c.bc_pretrain_steps = 200;
  c.warmup_steps = 5;
  const auto fresh = h::initial_policy(c);
  const auto state = h::initial_state(c);
  CHECK(!(state.policy == fresh));
  CHECK(state.reference == state.policy);

  auto s = state;
  for (long i = 0; i < 5; ++i) {
    h::train_step(c, s, h::expert_batch(c, c.target, i));
    CHECK(s.policy == state.policy);
  }
  h::train_step(c, s, h::expert_batch(c, c.target, 5));
  CHECK(!(s.policy == state.policy));
}

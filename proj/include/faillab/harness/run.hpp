// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faillab/adversary/train_state.hpp"
#include "faillab/eval/metrics.hpp"
#include "faillab/harness/config.hpp"

namespace faillab::harness {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kStepsSchema = "# faillab steps v1";
/// Overrides ExperimentConfig::output_dir when set.
inline constexpr const char* kOutputDirEnv = "FAIL_LAB_OUTPUT_DIR";

enum class RunStatus { kCompleted, kDiverged, kInterrupted };
std::string_view status_name(RunStatus s);

/// One row of steps.csv. Fields a method does not produce stay 0.
struct StepRecord {
  long step = 0;
  double disc_loss = 0.0;
  double policy_loss = 0.0;  // generator, surrogate, CFM or DPO loss
  double reward_mean = 0.0;  // discriminator reward (softplus of the logit)
  double static_reward_mean = 0.0;
  double kl = 0.0;
  double bc_loss = 0.0;
  double expert_prob = 0.0;
  double policy_prob = 0.0;
  double disc_grad_norm = 0.0;
  double policy_grad_norm = 0.0;
  std::size_t ratio_clamped = 0;
  double dpo_margin = 0.0;
  bool policy_updated = false;
};

/// Fixed column order of steps.csv.
const std::vector<std::string>& step_columns();
std::string step_csv_row(const StepRecord& r);

struct EvalRecord {
  long step = 0;
  eval::MetricReport report;
};
std::string eval_json_line(const EvalRecord& r);
EvalRecord parse_eval_line(std::string_view line);

struct RunOptions {
  /// Defaults to run_directory(config).
  std::optional<std::filesystem::path> run_dir;
  /// Continue from this checkpoint; logs past its step are discarded.
  std::optional<std::filesystem::path> resume_from;
  /// Polled before every step; true stops the run with status interrupted.
  const std::atomic<bool>* stop = nullptr;
  /// Called after every completed step.
  std::function<void(const adversary::TrainState&, const StepRecord&)> on_step;
};

struct RunResult {
  RunStatus status = RunStatus::kCompleted;
  std::filesystem::path run_dir;
  long steps_completed = 0;
  std::string error;  // set when diverged
  std::vector<EvalRecord> evals;
  adversary::TrainState state;
};

/// $FAIL_LAB_OUTPUT_DIR (or config.output_dir) joined with config.name.
std::filesystem::path run_directory(const ExperimentConfig& config);

/// Expert rows for `step`: classes assigned round-robin, points drawn from
/// the stream ("expert", step).
adversary::Batch expert_batch(const ExperimentConfig& config, const eval::TargetSpec& target,
                              long step);

/// Randomly initialised policy, before any pretraining.
flow::VectorField initial_policy(const ExperimentConfig& config);

/// Behavioral-cloning cold start: bc_pretrain_steps of CFM descent on
/// config.bc_target() with a dedicated optimizer. Returns the last loss.
double bc_pretrain(const ExperimentConfig& config, flow::VectorField& policy);

/// Policy after cold start, its frozen reference copy and a fresh
/// discriminator; step 0.
adversary::TrainState initial_state(const ExperimentConfig& config);

/// One training step of the configured method on an expert batch.
StepRecord train_step(const ExperimentConfig& config, adversary::TrainState& state,
                      const adversary::Batch& expert);

eval::MetricReport evaluate_state(const ExperimentConfig& config,
                                  const adversary::TrainState& state);

/// Runs the configured method for total_steps, writing into the run
/// directory: config.ini, run.json, steps.csv, evals.jsonl and
/// checkpoints/step_N.json at the eval cadence. Divergence is reported
/// through the status, never thrown.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Reads every record of a run directory's evals.jsonl.
std::vector<EvalRecord> read_evals(const std::filesystem::path& run_dir);

}  // namespace faillab::harness

// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/harness/run.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "faillab/baselines/baselines.hpp"
#include "faillab/fail_pd/fail_pd.hpp"
#include "faillab/fail_pg/fail_pg.hpp"
#include "faillab/flow/flow.hpp"
#include "faillab/harness/checkpoint.hpp"
#include "json.hpp"

namespace faillab::harness {

using adversary::Batch;
using adversary::TrainState;
namespace fs = std::filesystem;

std::string_view status_name(RunStatus s) {
  switch (s) {
    case RunStatus::kCompleted: return "completed";
    case RunStatus::kDiverged: return "diverged";
    case RunStatus::kInterrupted: return "interrupted";
  }
  return "completed";
}

const std::vector<std::string>& step_columns() {
  static const std::vector<std::string> columns = {
      "step",        "disc_loss",      "policy_loss",      "reward_mean",    "static_reward_mean",
      "kl",          "bc_loss",        "expert_prob",      "policy_prob",    "disc_grad_norm",
      "policy_grad_norm", "ratio_clamped", "dpo_margin", "policy_updated"};
  return columns;
}

std::string step_csv_row(const StepRecord& r) {
  std::string out = std::to_string(r.step);
  for (double v : {r.disc_loss, r.policy_loss, r.reward_mean, r.static_reward_mean, r.kl,
                   r.bc_loss, r.expert_prob, r.policy_prob, r.disc_grad_norm,
                   r.policy_grad_norm}) {
    out += ',' + format_double(v);
  }
  out += ',' + std::to_string(r.ratio_clamped);
  out += ',' + format_double(r.dpo_margin);
  out += r.policy_updated ? ",1" : ",0";
  return out;
}

std::string eval_json_line(const EvalRecord& r) {
  const auto& m = r.report;
  nlohmann::ordered_json j = {{"step", r.step},
                              {"sliced_wasserstein", m.sliced_wasserstein},
                              {"energy_distance", m.energy_distance},
                              {"mode_coverage", m.mode_coverage},
                              {"collapsed", m.collapsed},
                              {"disc_probe_accuracy", m.disc_probe_accuracy},
                              {"sample_count", m.sample_count},
                              {"seed", m.seed}};
  return j.dump();
}

EvalRecord parse_eval_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  EvalRecord r;
  r.step = j.at("step").get<long>();
  auto& m = r.report;
  m.sliced_wasserstein = j.at("sliced_wasserstein").get<double>();
  m.energy_distance = j.at("energy_distance").get<double>();
  m.mode_coverage = j.at("mode_coverage").get<std::vector<double>>();
  m.collapsed = j.at("collapsed").get<bool>();
  m.disc_probe_accuracy = j.at("disc_probe_accuracy").get<double>();
  m.sample_count = j.at("sample_count").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

fs::path run_directory(const ExperimentConfig& config) {
  const char* env = std::getenv(kOutputDirEnv);
  const fs::path base = (env != nullptr && *env != '\0') ? fs::path(env) : fs::path(config.output_dir);
  return base / config.name;
}

Batch expert_batch(const ExperimentConfig& config, const eval::TargetSpec& target, long step) {
  Batch b;
  b.cond.resize(config.batch_size);
  for (std::size_t i = 0; i < config.batch_size; ++i) {
    b.cond[i] = static_cast<int>(i % target.classes);
  }
  Rng rng(config.seed, "expert", static_cast<std::uint64_t>(step));
  b.x = eval::sample_expert(target, b.cond, rng);
  return b;
}

flow::VectorField initial_policy(const ExperimentConfig& config) {
  Rng rng(config.seed, "policy_init");
  auto policy = flow::VectorField::create(config.target.dim, config.target.classes,
                                          config.policy_hidden, config.policy_activation, rng);
  if (config.policy_zero_output) policy.zero_output();
  return policy;
}

double bc_pretrain(const ExperimentConfig& config, flow::VectorField& policy) {
  auto hyper = config.policy_hyper();
  hyper.lr = config.bc_lr;
  auto opt = diff::AdamState::zeros_like(std::as_const(policy).tensors(), hyper);
  const auto target = config.bc_target();
  double loss = 0.0;
  for (long i = 0; i < config.bc_pretrain_steps; ++i) {
    Batch b;
    b.cond.resize(config.batch_size);
    for (std::size_t r = 0; r < config.batch_size; ++r) {
      b.cond[r] = static_cast<int>(r % target.classes);
    }
    Rng data(config.seed, "bc_data", static_cast<std::uint64_t>(i));
    b.x = eval::sample_expert(target, b.cond, data);
    Rng rng(config.seed, "bc_pretrain", static_cast<std::uint64_t>(i));
    loss = baselines::sft_update(policy, opt, b, rng, config.policy_clip, i);
  }
  return loss;
}

TrainState initial_state(const ExperimentConfig& config) {
  auto policy = initial_policy(config);
  bc_pretrain(config, policy);
  Rng rng(config.seed, "disc_init");
  auto disc = adversary::Discriminator::create(config.disc, config.target.dim,
                                               config.target.classes, rng, &policy);
  return TrainState::create(std::move(policy), std::move(disc), config.policy_hyper(),
                            config.disc_hyper(), config.seed);
}

namespace {

StepRecord from_pd(const fail_pd::PdStepMetrics& m) {
  StepRecord r;
  r.disc_loss = m.disc_loss;
  r.policy_loss = m.gen_loss;
  r.static_reward_mean = m.reward_mean;
  r.bc_loss = m.bc_loss;
  r.expert_prob = m.expert_prob;
  r.policy_prob = m.policy_prob;
  r.disc_grad_norm = m.disc_grad_norm;
  r.policy_grad_norm = m.policy_grad_norm;
  r.policy_updated = m.policy_updated;
  return r;
}

StepRecord from_pg(const fail_pg::PgStepMetrics& m) {
  StepRecord r;
  r.disc_loss = m.disc_loss;
  r.policy_loss = m.surrogate;
  r.reward_mean = m.reward_mean;
  r.static_reward_mean = m.static_reward_mean;
  r.kl = m.kl;
  r.expert_prob = m.expert_prob;
  r.policy_prob = m.policy_prob;
  r.disc_grad_norm = m.disc_grad_norm;
  r.policy_grad_norm = m.policy_grad_norm;
  r.ratio_clamped = m.ratio_clamped;
  r.policy_updated = m.policy_updated;
  return r;
}

}  // namespace

StepRecord train_step(const ExperimentConfig& config, TrainState& state, const Batch& expert) {
  const long step = state.step;
  StepRecord r;
  switch (config.method) {
    case Method::kSft:
      r.policy_loss = baselines::sft_step(state, expert, config.policy_clip);
      r.policy_updated = true;
      break;
    case Method::kRewardGrad:
      r = from_pd(baselines::reward_gradient_step(state, config.pd_config(), expert,
                                                  config.static_reward(), config.reward.weight));
      break;
    case Method::kFpoStatic:
      r = from_pg(baselines::fpo_static_step(state, config.pg_config(), expert,
                                             config.static_reward()));
      break;
    case Method::kOnlineDpo: {
      const auto m = baselines::online_dpo_step(state, config.dpo_config(), expert);
      r.policy_loss = m.loss;
      r.dpo_margin = m.margin;
      r.policy_grad_norm = m.policy_grad_norm;
      r.policy_updated = true;
      break;
    }
    case Method::kFailPd:
      r = from_pd(fail_pd::pd_train_step(state, config.pd_config(), expert));
      break;
    case Method::kFailPg:
      r = from_pg(fail_pg::pg_train_step(state, config.pg_config(), expert));
      break;
    case Method::kFailPdReward:
      r = from_pd(baselines::combined_pd_step(state, config.pd_config(), expert,
                                              config.static_reward(), config.reward.fail_weight,
                                              config.reward.weight));
      break;
    case Method::kFailPgReward:
      r = from_pg(baselines::combined_pg_step(state, config.pg_config(), expert,
                                              config.static_reward()));
      break;
  }
  r.step = step;
  return r;
}

eval::MetricReport evaluate_state(const ExperimentConfig& config, const TrainState& state) {
  eval::EvalOptions options;
  options.samples = config.eval_samples;
  options.projections = config.eval_projections;
  options.sampler_steps = flow::steps_for_delta(config.delta_t);
  options.seed = config.seed;
  const adversary::Discriminator* disc = uses_discriminator(config.method) ? &state.disc : nullptr;
  return eval::evaluate(state.policy, disc, config.target, options);
}

std::vector<EvalRecord> read_evals(const fs::path& run_dir) {
  std::ifstream in(run_dir / "evals.jsonl");
  if (!in) throw std::runtime_error("cannot read " + (run_dir / "evals.jsonl").string());
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_eval_line(line));
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_run_json(const fs::path& dir, const ExperimentConfig& config, std::string_view status,
                    long steps, const std::string& error) {
  nlohmann::ordered_json j = {{"format", "faillab-run"},
                              {"version", kVersion},
                              {"name", config.name},
                              {"method", method_name(config.method)},
                              {"seed", config.seed},
                              {"total_steps", config.total_steps},
                              {"steps_completed", steps},
                              {"status", status}};
  if (!error.empty()) j["error"] = error;
  write_text(dir / "run.json", j.dump(2) + "\n");
}

/// Rewrites a log keeping the lines `keep` accepts.
template <class Keep>
void truncate_log(const fs::path& path, Keep keep) {
  std::ifstream in(path, std::ios::binary);
  std::string kept;
  std::string line;
  while (std::getline(in, line)) {
    if (keep(line)) kept += line + '\n';
  }
  in.close();
  write_text(path, kept);
}

long leading_step(const std::string& line) {
  long v = -1;
  std::istringstream(line) >> v;
  return v;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& input_config, const RunOptions& options) {
  ExperimentConfig config = input_config;
  TrainState state;
  if (options.resume_from) {
    auto checkpoint = load_checkpoint(*options.resume_from);
    config = checkpoint.config;
    state = std::move(checkpoint.state);
  }
  config.validate();

  RunResult result;
  result.run_dir = options.run_dir ? *options.run_dir : run_directory(config);
  const fs::path& dir = result.run_dir;
  fs::create_directories(dir);
  const fs::path steps_path = dir / "steps.csv";
  const fs::path evals_path = dir / "evals.jsonl";

  if (options.resume_from) {
    const long from = state.step;
    truncate_log(steps_path, [from](const std::string& line) {
      return line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0 ||
             leading_step(line) < from;
    });
    truncate_log(evals_path, [from](const std::string& line) {
      return !line.empty() && parse_eval_line(line).step < from;
    });
    for (const auto& e : read_evals(dir)) result.evals.push_back(e);
  } else {
    state = initial_state(config);
    fs::remove_all(dir / "checkpoints");
    std::string header = std::string(kStepsSchema) + "\n";
    const auto& columns = step_columns();
    for (std::size_t i = 0; i < columns.size(); ++i) header += (i ? "," : "") + columns[i];
    write_text(steps_path, header + "\n");
    write_text(evals_path, "");
  }
  write_text(dir / "config.ini", serialize_config(config));
  write_run_json(dir, config, "running", state.step, "");

  std::ofstream steps_out(steps_path, std::ios::binary | std::ios::app);
  std::ofstream evals_out(evals_path, std::ios::binary | std::ios::app);
  RunStatus status = RunStatus::kCompleted;
  try {
    while (true) {
      const long s = state.step;
      if (s % config.eval_every == 0) {
        EvalRecord record{s, evaluate_state(config, state)};
        evals_out << eval_json_line(record) << '\n' << std::flush;
        result.evals.push_back(std::move(record));
        save_checkpoint(dir / "checkpoints" / ("step_" + std::to_string(s) + ".json"), config,
                        state);
      }
      if (s >= config.total_steps) break;
      if (options.stop != nullptr && options.stop->load()) {
        status = RunStatus::kInterrupted;
        break;
      }
      const Batch expert =
          expert_batch(config, config.sft_data == "bc" && config.method == Method::kSft
                                   ? config.bc_target()
                                   : config.target,
                       s);
      const StepRecord record = train_step(config, state, expert);
      steps_out << step_csv_row(record) << '\n' << std::flush;
      if (options.on_step) options.on_step(state, record);
    }
  } catch (const NumericalError& e) {
    status = RunStatus::kDiverged;
    result.error = e.what();
  }
  steps_out.close();
  evals_out.close();
  if (status != RunStatus::kDiverged) {
    save_checkpoint(dir / "checkpoints" / "final.json", config, state);
  }
  result.status = status;
  result.steps_completed = state.step;
  write_run_json(dir, config, status_name(status), state.step, result.error);
  result.state = std::move(state);
  return result;
}

}  // namespace faillab::harness

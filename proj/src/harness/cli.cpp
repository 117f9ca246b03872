// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/harness/cli.hpp"

#include <fcntl.h>
#include <glob.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "faillab/harness/check.hpp"
#include "faillab/harness/checkpoint.hpp"
#include "faillab/harness/config.hpp"
#include "faillab/harness/run.hpp"
#include "json.hpp"

extern char** environ;

namespace faillab::harness {

namespace fs = std::filesystem;

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

void on_sigint(int) { interrupt_flag().store(true); }

std::string report_json(const eval::MetricReport& m) {
  nlohmann::ordered_json j = {{"sliced_wasserstein", m.sliced_wasserstein},
                              {"energy_distance", m.energy_distance},
                              {"mode_coverage", m.mode_coverage},
                              {"collapsed", m.collapsed},
                              {"disc_probe_accuracy", m.disc_probe_accuracy},
                              {"sample_count", m.sample_count},
                              {"seed", m.seed}};
  return j.dump(2);
}

double min_coverage(const eval::MetricReport& m) {
  if (m.mode_coverage.empty()) return 0.0;
  return *std::min_element(m.mode_coverage.begin(), m.mode_coverage.end());
}

nlohmann::json read_run_json(const fs::path& dir) {
  std::ifstream in(dir / "run.json");
  if (!in) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    return nlohmann::json::object();
  }
}

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

int run_train(const fs::path& config_path, const std::string& resume, bool quiet,
              std::ostream& out, std::ostream& err) {
  const ExperimentConfig config = parse_config(config_path);
  RunOptions options;
  options.stop = &interrupt_flag();
  if (!resume.empty()) options.resume_from = resume;
  if (!quiet) {
    options.on_step = [&](const adversary::TrainState& s, const StepRecord&) {
      if (s.step % config.eval_every == 0) out << "step " << s.step << "\n" << std::flush;
    };
  }
  const RunResult result = run_experiment(config, options);
  out << "run " << config.name << ": " << status_name(result.status) << " after "
      << result.steps_completed << " steps (" << result.run_dir.string() << ")\n";
  if (!result.evals.empty()) {
    const auto& last = result.evals.back();
    out << "last eval at step " << last.step
        << ": sliced_wasserstein=" << format_double(last.report.sliced_wasserstein)
        << " min_mode_coverage=" << format_double(min_coverage(last.report)) << "\n";
  }
  switch (result.status) {
    case RunStatus::kCompleted: return kExitOk;
    case RunStatus::kInterrupted: return kExitInterrupted;
    case RunStatus::kDiverged:
      err << "diverged: " << result.error << "\n";
      return kExitDiverged;
  }
  return kExitOk;
}

eval::TargetSpec resolve_target(const std::string& spec, const ExperimentConfig& own) {
  if (spec == "checkpoint") return own.target;
  if (fs::exists(spec)) return parse_config(spec).target;
  return target_preset(spec);
}

int run_eval(const fs::path& checkpoint_path, const std::string& target_spec, std::size_t n,
             std::optional<std::uint64_t> seed, std::size_t projections, std::ostream& out) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  ExperimentConfig config = checkpoint.config;
  config.target = resolve_target(target_spec, checkpoint.config);
  if (config.target.dim != checkpoint.state.policy.dim ||
      config.target.classes > checkpoint.state.policy.classes) {
    throw ConfigValueError("target does not match the checkpoint policy (dimension " +
                               std::to_string(checkpoint.state.policy.dim) + ")",
                           "target");
  }
  config.eval_samples = n;
  config.eval_projections = projections;
  if (seed) config.seed = *seed;
  out << report_json(evaluate_state(config, checkpoint.state)) << "\n";
  return kExitOk;
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& pattern : patterns) {
    glob_t g{};
    if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    ::globfree(&g);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

pid_t spawn_train(const fs::path& self, const std::string& config) {
  const std::string exe = self.string();
  std::vector<std::string> argv_s{exe, "train", config, "--quiet"};
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, exe.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw std::runtime_error("cannot start " + exe);
  return pid;
}

int run_sweep(const fs::path& self, const std::vector<std::string>& patterns, int jobs,
              const std::string& summary_path, std::ostream& out, std::ostream& err) {
  const auto configs = expand_globs(patterns);
  if (configs.empty()) {
    err << "sweep: no config matches\n";
    return kExitUsage;
  }
  // Validate everything before starting any run.
  std::vector<ExperimentConfig> parsed;
  for (const auto& c : configs) parsed.push_back(parse_config(c));

  std::map<pid_t, std::size_t> running;
  std::vector<int> codes(configs.size(), -1);
  std::size_t next = 0;
  while (next < configs.size() || !running.empty()) {
    while (next < configs.size() && static_cast<int>(running.size()) < jobs) {
      running[spawn_train(self, configs[next])] = next;
      ++next;
    }
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid < 0) break;
    const auto it = running.find(pid);
    if (it == running.end()) continue;
    codes[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    running.erase(it);
  }

  std::ostringstream csv;
  csv << "config,name,method,seed,exit_code,status,steps_completed,final_step,"
         "sliced_wasserstein,energy_distance,min_mode_coverage,collapsed\n";
  int worst = kExitOk;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& c = parsed[i];
    const fs::path dir = run_directory(c);
    const auto run = read_run_json(dir);
    csv << csv_field(configs[i]) << ',' << csv_field(c.name) << ',' << method_name(c.method) << ','
        << c.seed << ',' << codes[i] << ',' << run.value("status", std::string("unknown")) << ','
        << run.value("steps_completed", 0L);
    std::vector<EvalRecord> evals;
    try {
      evals = read_evals(dir);
    } catch (const std::exception&) {
    }
    if (evals.empty()) {
      csv << ",,,,,\n";
    } else {
      const auto& e = evals.back();
      csv << ',' << e.step << ',' << format_double(e.report.sliced_wasserstein) << ','
          << format_double(e.report.energy_distance) << ','
          << format_double(min_coverage(e.report)) << ',' << (e.report.collapsed ? 1 : 0)
          << '\n';
    }
    if (codes[i] != kExitOk) worst = std::max(worst, codes[i] == kExitDiverged ? kExitDiverged : 1);
  }
  if (summary_path.empty()) {
    out << csv.str();
  } else {
    std::ofstream(summary_path) << csv.str();
    out << "wrote " << summary_path << " (" << configs.size() << " runs)\n";
  }
  return worst;
}

int run_check(int instances, std::ostream& out) {
  CheckOptions options;
  options.instances = instances;
  const auto results = run_check_suite(options);
  int failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) out << " (" << r.detail << ")";
    out << "\n";
    if (!r.passed) ++failed;
  }
  out << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace

std::string curves_csv(const std::vector<fs::path>& runs) {
  std::string out =
      "run,method,seed,step,sliced_wasserstein,energy_distance,min_mode_coverage,collapsed,"
      "disc_probe_accuracy\n";
  for (const auto& arg : runs) {
    const fs::path dir = fs::is_directory(arg) ? arg : arg.parent_path();
    const auto run = read_run_json(dir);
    const std::string name = run.value("name", dir.filename().string());
    const std::string method = run.value("method", std::string());
    const std::string seed = run.contains("seed") ? run["seed"].dump() : "";
    for (const auto& e : read_evals(dir)) {
      out += csv_field(name) + ',' + method + ',' + seed + ',' + std::to_string(e.step) + ',' +
             format_double(e.report.sliced_wasserstein) + ',' +
             format_double(e.report.energy_distance) + ',' + format_double(min_coverage(e.report)) +
             ',' + (e.report.collapsed ? "1" : "0") + ',' +
             format_double(e.report.disc_probe_accuracy) + '\n';
    }
  }
  return out;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const fs::path& self) {
  CLI::App app{"Adversarial flow-policy post-training on toy targets", "faillab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  auto* train = app.add_subcommand("train", "Run the experiment described by a config file");
  std::string train_config;
  std::string resume;
  bool quiet = false;
  train->add_option("config", train_config, "INI config")->required();
  train->add_option("--resume", resume, "Continue from a checkpoint of this run");
  train->add_flag("--quiet", quiet, "Only print the final status");

  auto* evalc = app.add_subcommand("eval", "Print the metric report of a checkpoint as JSON");
  std::string checkpoint;
  std::string target = "checkpoint";
  std::size_t n = 1000;
  std::optional<std::uint64_t> seed;
  std::size_t projections = eval::kDefaultProjections;
  evalc->add_option("checkpoint", checkpoint, "Checkpoint JSON")->required();
  evalc->add_option("target", target,
                    "Preset name, config file, or 'checkpoint' for the run's own target");
  evalc->add_option("--n", n, "Sample count")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
  evalc->add_option("--seed", seed, "Evaluation seed (default: the run seed)");
  evalc->add_option("--projections", projections, "Sliced-Wasserstein projections")
      ->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Run every matching config in its own process");
  std::vector<std::string> patterns;
  int jobs = 1;
  std::string summary;
  sweep->add_option("configs", patterns, "Config paths or glob patterns")->required();
  sweep->add_option("-j,--jobs", jobs, "Parallel processes")->check(CLI::PositiveNumber);
  sweep->add_option("-o,--summary", summary, "Summary CSV path (default: stdout)");

  auto* curves = app.add_subcommand("curves", "Merge eval records of runs into one CSV");
  std::vector<std::string> runs;
  std::string curves_out;
  curves->add_option("runs", runs, "Run directories or evals.jsonl files")->required();
  curves->add_option("-o,--output", curves_out, "Output CSV (default: stdout)");

  auto* check = app.add_subcommand("check", "Run the invariant and gradient-check suite");
  int instances = 20;
  check->add_option("--instances", instances, "Random instances per gradient family")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (train->parsed()) {
      std::signal(SIGINT, on_sigint);
      return run_train(train_config, resume, quiet, out, err);
    }
    if (evalc->parsed()) return run_eval(checkpoint, target, n, seed, projections, out);
    if (sweep->parsed()) return run_sweep(self, patterns, jobs, summary, out, err);
    if (curves->parsed()) {
      const std::string csv = curves_csv({runs.begin(), runs.end()});
      if (curves_out.empty()) {
        out << csv;
      } else {
        std::ofstream(curves_out) << csv;
      }
      return kExitOk;
    }
    if (check->parsed()) return run_check(instances, out);
  } catch (const ConfigurationError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace faillab::harness

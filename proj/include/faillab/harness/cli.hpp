// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace faillab::harness {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitDiverged = 3,
  kExitCheckFailed = 4,
  kExitInterrupted = 130,
};

/// Set by the SIGINT handler installed by cli_main; polled by `train`.
std::atomic<bool>& interrupt_flag();

/// Entry point of the faillab command. Output goes to `out`, diagnostics to
/// `err`. `self` is the executable that `sweep` re-invokes per config.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const std::filesystem::path& self);

/// One row per eval record of each run directory (or evals.jsonl path),
/// concatenated in argument order.
std::string curves_csv(const std::vector<std::filesystem::path>& runs);

}  // namespace faillab::harness

// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "faillab/adversary/train_state.hpp"
#include "faillab/harness/config.hpp"
#include "json.hpp"

namespace faillab::harness {

inline constexpr int kCheckpointVersion = 1;

/// Malformed or incompatible checkpoint file.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ExperimentConfig config;
  adversary::TrainState state;
};

/// {"shape": [rows, cols], "values": [row-major doubles]}.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const ExperimentConfig& config, const adversary::TrainState& state);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Writes atomically (temporary file, then rename).
void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config,
                     const adversary::TrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace faillab::harness

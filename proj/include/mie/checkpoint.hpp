// Copyright 2026 The mielearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>

#include "mie/nn_core.hpp"
#include "mie/serialization.hpp"
#include "mie/training.hpp"

namespace mie {

inline constexpr int kCheckpointFormatVersion = 1;

/// Trained model plus everything needed to check it against an eval set.
/// The payload is every ParamLayout block in layout order, concatenated.
struct Checkpoint {
    ModelConfig model_config;
    TrainConfig train_config;
    ModelParams params;
    /// Dropout-free training loss of the saved parameters.
    double final_loss = 0.0;
    /// Loss of the last optimizer step (dropout active).
    double last_train_loss = 0.0;
    uint64_t train_seed = 0;
    std::string dataset_fingerprint;
    int num_qubits = 0;
    int probe_a = 0;
    int probe_b = 0;

    Model model() const { return Model{model_config, params}; }
};

Json checkpoint_to_json(const Checkpoint &ckpt);
Checkpoint checkpoint_from_json(const Json &j);
void write_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
Checkpoint read_checkpoint(const std::filesystem::path &path);

/// SHA-256 of the encoded parameter payload.
std::string checkpoint_fingerprint(const Checkpoint &ckpt);

/// Diagnostic model whose output is I/4 for every input: all head weights
/// zero and the head bias set to the real identity.
Checkpoint maximally_mixed_checkpoint(const ModelConfig &config, int num_qubits, int probe_a, int probe_b);

/// `epoch,loss,lr,grad_norm`, one row per epoch.
void write_history_csv(const TrainReport &report, const std::filesystem::path &path);
std::filesystem::path history_path_for(const std::filesystem::path &checkpoint_path);

}  // namespace mie

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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mie/linalg.hpp"
#include "mie/nn_core.hpp"
#include "mie/rng.hpp"
#include "mie/shadows.hpp"

namespace mie {

enum class LossKind { Main, L1 };

std::string loss_name(LossKind kind);
LossKind parse_loss(const std::string &name);

struct TrainConfig {
    LossKind loss_kind = LossKind::Main;
    double lr_init = 5e-4;
    double lr_min = 1e-5;
    double weight_decay = 0.01;
    double warmup_fraction = 0.10;
    double clip_norm = 1.0;
    int epochs = 500;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    // Execution knobs; results do not depend on them.
    int num_threads = 1;
    int chunk_size = 64;

    void validate() const;
};

struct LossResult {
    double value = 0.0;
    /// Sensitivity of the batch loss to each output ρ.
    std::vector<Mat4> d_rho;
};

/// −mean(2 Re Tr(ρσˢ) − Tr ρ²). Throws EmptyBatch.
LossResult loss_main(std::span<const DensityMatrix> rho, std::span<const ShadowSnapshot> snapshots);
/// −mean Re Tr(ρσˢ). Throws EmptyBatch.
LossResult loss_l1(std::span<const DensityMatrix> rho, std::span<const ShadowSnapshot> snapshots);

/// Partial loss over a slice of a batch whose full size is `batch_size`;
/// returns the slice's share of the batch loss and fills its sensitivities.
double loss_terms(LossKind kind, std::span<const DensityMatrix> rho, std::span<const Mat4> snapshots,
                  double batch_size, std::span<Mat4> d_rho);

/// floor(warmup_fraction · total_steps).
int warmup_steps(const TrainConfig &config, int total_steps);
double lr_at_step(const TrainConfig &config, int step, int total_steps);

double global_norm(std::span<const double> grads);
/// Rescales to norm `threshold` when above it; returns the norm before clipping.
double clip_global_norm(std::span<double> grads, double threshold);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::vector<uint8_t> decay;

    static AdamState for_params(const ModelParams &params);
};

/// One AdamW update with bias correction; `step` counts from 1.
void adamw_step(ModelParams &params, const ModelParams &grads, AdamState &state, int step, double lr,
                const TrainConfig &config);

struct TrainingExample {
    std::vector<int> tokens;
    Mat4 snapshot;
};

struct TrainReport {
    std::vector<double> loss_history;
    std::vector<double> lr_trace;
    std::vector<double> grad_norm_trace;
    ModelParams params;
};

/// Full-batch training: one optimizer step per epoch over every example,
/// initialising from `rng`. Results are bit-identical for any num_threads;
/// chunk_size fixes the gradient summation order.
TrainReport train(std::span<const TrainingExample> dataset, const ModelConfig &model_config,
                  const TrainConfig &train_config, Rng &rng);

/// Same, starting from given parameters.
TrainReport train_from(std::span<const TrainingExample> dataset, const ModelConfig &model_config,
                       const TrainConfig &train_config, ModelParams initial, Rng &rng);

/// Dropout-free loss of a model over a dataset.
double evaluate_loss(const Model &model, std::span<const TrainingExample> dataset, LossKind kind);

/// argmin over density matrices of −Tr(ρ S): the top-eigenvector projector of S.
Mat4 l1_minimizer(const Mat4 &mean_snapshot);
/// argmin over density matrices of −(2 Tr(ρ S) − Tr ρ²): the Frobenius
/// projection of S onto the unit-trace PSD set.
Mat4 main_minimizer(const Mat4 &mean_snapshot);

}  // namespace mie

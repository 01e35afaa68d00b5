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

#include "mie/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <thread>

#include "mie/errors.hpp"

namespace mie {

std::string loss_name(LossKind kind) {
    return kind == LossKind::Main ? "main" : "l1";
}

LossKind parse_loss(const std::string &name) {
    if (name == "main") {
        return LossKind::Main;
    }
    if (name == "l1") {
        return LossKind::L1;
    }
    throw ConfigError("unknown loss '" + name + "' (expected main or l1)");
}

void TrainConfig::validate() const {
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
        throw ConfigError("warmup_fraction must lie in [0, 1)");
    }
    if (!(lr_init > 0.0 && lr_min > 0.0 && clip_norm > 0.0 && adam_eps > 0.0)) {
        throw ConfigError("learning rates, clip_norm and adam_eps must be positive");
    }
    if (weight_decay < 0.0 || adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
        throw ConfigError("weight_decay must be nonnegative and Adam betas in [0, 1)");
    }
    if (epochs <= 0 || num_threads <= 0 || chunk_size <= 0) {
        throw ConfigError("epochs, num_threads and chunk_size must be positive");
    }
}

double loss_terms(LossKind kind, std::span<const DensityMatrix> rho, std::span<const Mat4> snapshots,
                  double batch_size, std::span<Mat4> d_rho) {
    double total = 0.0;
    for (size_t i = 0; i < rho.size(); i++) {
        const Mat4 &r = rho[i].matrix;
        const Mat4 &s = snapshots[i];
        double overlap = (r * s).trace().real();
        if (kind == LossKind::Main) {
            double purity = r.cwiseAbs2().sum();
            total += -(2.0 * overlap - purity);
            d_rho[i] = -(2.0 * s - 2.0 * r) / batch_size;
        } else {
            total += -overlap;
            d_rho[i] = -s / batch_size;
        }
    }
    return total / batch_size;
}

namespace {

LossResult batch_loss(LossKind kind, std::span<const DensityMatrix> rho, std::span<const ShadowSnapshot> snapshots) {
    if (rho.empty() || snapshots.empty()) {
        throw EmptyBatch("loss of an empty batch");
    }
    if (rho.size() != snapshots.size()) {
        throw ShapeMismatch("estimate and snapshot batches differ in length");
    }
    std::vector<Mat4> snaps(snapshots.size());
    for (size_t i = 0; i < snapshots.size(); i++) {
        snaps[i] = snapshots[i].matrix;
    }
    LossResult out;
    out.d_rho.resize(rho.size());
    out.value = loss_terms(kind, rho, snaps, static_cast<double>(rho.size()), out.d_rho);
    return out;
}

}  // namespace

LossResult loss_main(std::span<const DensityMatrix> rho, std::span<const ShadowSnapshot> snapshots) {
    return batch_loss(LossKind::Main, rho, snapshots);
}

LossResult loss_l1(std::span<const DensityMatrix> rho, std::span<const ShadowSnapshot> snapshots) {
    return batch_loss(LossKind::L1, rho, snapshots);
}

int warmup_steps(const TrainConfig &config, int total_steps) {
    return static_cast<int>(std::floor(config.warmup_fraction * total_steps));
}

double lr_at_step(const TrainConfig &config, int step, int total_steps) {
    const int warmup = warmup_steps(config, total_steps);
    if (step < warmup) {
        return config.lr_init * (step + 1) / warmup;
    }
    double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return config.lr_min + (config.lr_init - config.lr_min) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

double global_norm(std::span<const double> grads) {
    double total = 0.0;
    for (double g : grads) {
        total += g * g;
    }
    return std::sqrt(total);
}

double clip_global_norm(std::span<double> grads, double threshold) {
    double norm = global_norm(grads);
    if (norm > threshold) {
        double scale = threshold / norm;
        for (double &g : grads) {
            g *= scale;
        }
    }
    return norm;
}

AdamState AdamState::for_params(const ModelParams &params) {
    AdamState s;
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
    s.decay.assign(params.size(), 0);
    for (const auto &b : params.layout.blocks()) {
        std::fill_n(s.decay.begin() + b.offset, b.size(), b.decay ? 1 : 0);
    }
    return s;
}

void adamw_step(ModelParams &params, const ModelParams &grads, AdamState &state, int step, double lr,
                const TrainConfig &config) {
    if (step < 1) {
        throw ConfigError("AdamW steps are counted from 1");
    }
    if (grads.size() != params.size() || state.m.size() != params.size()) {
        throw ShapeMismatch("optimizer state does not match the parameters");
    }
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, step);
    const double c2 = 1.0 - std::pow(b2, step);
    const double decay = lr * config.weight_decay;
    for (size_t k = 0; k < params.size(); k++) {
        const double g = grads.values[k];
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g;
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g;
        double &p = params.values[k];
        if (state.decay[k]) {
            p -= decay * p;
        }
        const double m_hat = state.m[k] / c1;
        const double v_hat = state.v[k] / c2;
        p -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
}

namespace {

struct Chunk {
    size_t begin;
    size_t end;
};

int common_length(std::span<const TrainingExample> dataset) {
    const size_t n = dataset.front().tokens.size();
    for (const auto &ex : dataset) {
        if (ex.tokens.size() != n) {
            throw ShapeMismatch("all training sequences must have the same length");
        }
    }
    return static_cast<int>(n);
}

/// Loss and gradient of one chunk, in train or eval mode.
double chunk_pass(const ModelParams &params, const ModelConfig &config, std::span<const TrainingExample> dataset,
                  Chunk chunk, int seq_len, LossKind kind, Mode mode, uint64_t dropout_base, int epoch,
                  ModelParams *grads) {
    const size_t count = chunk.end - chunk.begin;
    std::vector<int> tokens;
    tokens.reserve(count * seq_len);
    std::vector<Mat4> snaps(count);
    std::vector<uint64_t> seeds;
    for (size_t i = chunk.begin; i < chunk.end; i++) {
        tokens.insert(tokens.end(), dataset[i].tokens.begin(), dataset[i].tokens.end());
        snaps[i - chunk.begin] = dataset[i].snapshot;
        if (mode == Mode::Train) {
            seeds.push_back(derive_seed(dropout_base, "dropout", {static_cast<uint64_t>(epoch), i}));
        }
    }
    ForwardCache cache;
    auto rho = forward_batch(params, config, tokens, seq_len, mode, seeds, grads ? &cache : nullptr);
    std::vector<Mat4> d_rho(count);
    double loss = loss_terms(kind, rho, snaps, static_cast<double>(dataset.size()), d_rho);
    if (grads) {
        backward_batch(params, config, cache, d_rho, *grads);
    }
    return loss;
}

std::vector<Chunk> make_chunks(size_t n, size_t chunk_size) {
    std::vector<Chunk> chunks;
    for (size_t b = 0; b < n; b += chunk_size) {
        chunks.push_back({b, std::min(n, b + chunk_size)});
    }
    return chunks;
}

}  // namespace

TrainReport train(std::span<const TrainingExample> dataset, const ModelConfig &model_config,
                  const TrainConfig &train_config, Rng &rng) {
    ModelParams initial = init_params(model_config, rng);
    return train_from(dataset, model_config, train_config, std::move(initial), rng);
}

TrainReport train_from(std::span<const TrainingExample> dataset, const ModelConfig &model_config,
                       const TrainConfig &train_config, ModelParams initial, Rng &rng) {
    train_config.validate();
    model_config.validate();
    if (dataset.empty()) {
        throw EmptyBatch("training dataset is empty");
    }
    const int seq_len = common_length(dataset);
    const uint64_t dropout_base = rng();

    TrainReport report;
    report.params = std::move(initial);
    AdamState adam = AdamState::for_params(report.params);
    const auto chunks = make_chunks(dataset.size(), static_cast<size_t>(train_config.chunk_size));
    const size_t wave = std::min(chunks.size(), static_cast<size_t>(train_config.num_threads));
    std::vector<ModelParams> partial(wave, ModelParams::zeros(model_config));
    std::vector<double> partial_loss(wave);
    ModelParams grads = ModelParams::zeros(model_config);
    const int total = train_config.epochs;

    for (int epoch = 0; epoch < total; epoch++) {
        std::fill(grads.values.begin(), grads.values.end(), 0.0);
        double loss = 0.0;
        try {
            for (size_t start = 0; start < chunks.size(); start += wave) {
                const size_t active = std::min(wave, chunks.size() - start);
                auto work = [&](size_t slot) {
                    std::fill(partial[slot].values.begin(), partial[slot].values.end(), 0.0);
                    partial_loss[slot] = chunk_pass(report.params, model_config, dataset, chunks[start + slot], seq_len,
                                                    train_config.loss_kind, Mode::Train, dropout_base, epoch,
                                                    &partial[slot]);
                };
                if (active == 1) {
                    work(0);
                } else {
                    std::vector<std::exception_ptr> errors(active);
                    std::vector<std::thread> threads;
                    for (size_t slot = 0; slot < active; slot++) {
                        threads.emplace_back([&, slot] {
                            try {
                                work(slot);
                            } catch (...) {
                                errors[slot] = std::current_exception();
                            }
                        });
                    }
                    for (auto &t : threads) {
                        t.join();
                    }
                    for (auto &e : errors) {
                        if (e) {
                            std::rethrow_exception(e);
                        }
                    }
                }
                // Fixed chunk order keeps the reduction independent of threading.
                for (size_t slot = 0; slot < active; slot++) {
                    loss += partial_loss[slot];
                    const auto &pv = partial[slot].values;
                    for (size_t k = 0; k < pv.size(); k++) {
                        grads.values[k] += pv[k];
                    }
                }
            }
        } catch (const NumericalFailure &e) {
            throw NumericalFailure("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const double lr = lr_at_step(train_config, epoch, total);
        const double norm = clip_global_norm(grads.values, train_config.clip_norm);
        adamw_step(report.params, grads, adam, epoch + 1, lr, train_config);
        report.loss_history.push_back(loss);
        report.lr_trace.push_back(lr);
        report.grad_norm_trace.push_back(norm);
    }
    return report;
}

double evaluate_loss(const Model &model, std::span<const TrainingExample> dataset, LossKind kind) {
    if (dataset.empty()) {
        throw EmptyBatch("evaluation dataset is empty");
    }
    const int seq_len = common_length(dataset);
    double loss = 0.0;
    for (const auto &chunk : make_chunks(dataset.size(), 128)) {
        loss += chunk_pass(model.params, model.config, dataset, chunk, seq_len, kind, Mode::Eval, 0, 0, nullptr);
    }
    return loss;
}

Mat4 l1_minimizer(const Mat4 &mean_snapshot) {
    auto eig = hermitian_eigen(mean_snapshot);
    Vec4 top = eig.eigenvectors().col(3);
    return top * top.adjoint();
}

Mat4 main_minimizer(const Mat4 &mean_snapshot) {
    auto eig = hermitian_eigen(mean_snapshot);
    // Euclidean projection of the spectrum onto the probability simplex.
    Eigen::Vector4d lam = eig.eigenvalues();
    std::array<double, 4> sorted{lam(3), lam(2), lam(1), lam(0)};
    double shift = 0.0;
    double acc = 0.0;
    for (int k = 0; k < 4; k++) {
        acc += sorted[k];
        double candidate = (acc - 1.0) / (k + 1);
        if (sorted[k] - candidate > 0.0) {
            shift = candidate;
        }
    }
    Mat4 out = Mat4::Zero();
    for (int k = 0; k < 4; k++) {
        double p = std::max(lam(k) - shift, 0.0);
        Vec4 v = eig.eigenvectors().col(k);
        out += p * v * v.adjoint();
    }
    return out;
}

}  // namespace mie

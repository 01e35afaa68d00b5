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
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mie/linalg.hpp"
#include "mie/rng.hpp"

namespace mie {

/// Transformer encoder hyperparameters. Presets "20K", "70K", "270K" and
/// "540K" name the approximate trainable-parameter count.
struct ModelConfig {
    std::string preset;
    int hidden_dim = 32;
    int ffn_dim = 64;
    int num_layers = 2;
    int num_heads = 4;
    int max_seq_len = 32;
    double dropout_rate = 0.1;
    double attn_dropout_rate = 0.1;
    double epsilon_mix = 1e-4;
    int vocab_size = 3;

    static ModelConfig from_preset(std::string_view name);
    int head_dim() const { return hidden_dim / num_heads; }
    void validate() const;
    bool operator==(const ModelConfig &) const = default;
};

std::vector<std::string> preset_names();

inline constexpr int kClsToken = 0;
inline constexpr int kPlusToken = 1;
inline constexpr int kMinusToken = 2;
/// Width of the density head output: 16 complex entries as (Re, Im) pairs.
inline constexpr int kHeadOutputs = 32;

/// [CLS] followed by +1 → 1, −1 → 2. Throws UnknownSymbol.
std::vector<int> tokenize(std::span<const int8_t> env_outcomes);

struct ParamBlock {
    std::string name;
    size_t offset = 0;
    size_t rows = 0;
    size_t cols = 0;
    /// Subject to decoupled weight decay (weights, never biases or LN).
    bool decay = false;
    size_t size() const { return rows * cols; }
};

/// Fixed traversal order of every trainable tensor, all stored [in × out]
/// row-major in one flat buffer.
class ParamLayout {
   public:
    struct Layer {
        size_t ln1_gain, ln1_bias;
        size_t wq, bq, wk, bk, wv, bv, wo, bo;
        size_t ln2_gain, ln2_bias;
        size_t w1, b1, w2, b2;
    };

    ParamLayout() = default;
    explicit ParamLayout(const ModelConfig &config);

    const std::vector<ParamBlock> &blocks() const { return blocks_; }
    const ParamBlock &block(std::string_view name) const;
    size_t total() const { return total_; }

    size_t token_embedding = 0;
    size_t position_embedding = 0;
    size_t head_weight = 0;
    size_t head_bias = 0;
    std::vector<Layer> layers;

   private:
    size_t add(std::string name, size_t rows, size_t cols, bool decay);
    std::vector<ParamBlock> blocks_;
    size_t total_ = 0;
};

/// Parameter storage. Eigen's vectorized kernels split work according to
/// the address alignment, so a fixed alignment keeps results bit-identical
/// from run to run.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Flat trainable parameters (or gradients, same layout).
struct ModelParams {
    ParamLayout layout;
    ParamVector values;

    static ModelParams zeros(const ModelConfig &config);
    size_t size() const { return values.size(); }
    std::span<double> block(std::string_view name);
    std::span<const double> block(std::string_view name) const;
};

ModelParams init_params(const ModelConfig &config, Rng &rng);

struct DensityMatrix {
    Mat4 matrix;
};

enum class Mode { Train, Eval };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Activations of one batched forward pass. Sequences are stacked so that
/// row b*n + i is position i of sequence b. The last encoder layer is only
/// evaluated at the [CLS] rows, the only ones the head reads.
struct ForwardCache {
    struct LayerNormCache {
        RowMatrix xhat;
        Eigen::VectorXd rstd;
        RowMatrix y;
    };
    struct Layer {
        bool cls_only = false;
        LayerNormCache ln1;
        RowMatrix q, k, v;
        // [b][h][query][key], softmax output before dropout.
        std::vector<double> probs;
        std::vector<double> attn_mask;
        RowMatrix ctx;
        RowMatrix resid1_mask;
        LayerNormCache ln2;
        RowMatrix ffn_pre;
        RowMatrix ffn_act;
        RowMatrix resid2_mask;
    };

    Mode mode = Mode::Eval;
    int batch = 0;
    int seq_len = 0;
    std::vector<int> tokens;
    std::vector<Layer> layers;
    RowMatrix cls_hidden;
    RowMatrix head_out;
    std::vector<double> trace;
    std::vector<DensityMatrix> output;
};

/// Forward pass of B sequences of equal length n, tokens flattened
/// row-major as [B × n]. In train mode `mask_seeds` supplies one dropout
/// stream per sequence, so a sequence's masks do not depend on batching.
/// Throws NumericalFailure if Tr(AA†) < 1e−30 for some sequence.
std::vector<DensityMatrix> forward_batch(const ModelParams &params, const ModelConfig &config,
                                         std::span<const int> tokens, int seq_len, Mode mode,
                                         std::span<const uint64_t> mask_seeds, ForwardCache *cache);

/// Accumulates into `grads` the gradient of Σ_b Re Tr(G_b† δρ_b), with
/// d_rho[b] = G_b the sensitivity of the loss to sequence b's output.
void backward_batch(const ModelParams &params, const ModelConfig &config, const ForwardCache &cache,
                    std::span<const Mat4> d_rho, ModelParams &grads);

std::pair<DensityMatrix, ForwardCache> forward(const ModelParams &params, const ModelConfig &config,
                                               std::span<const int> tokens, Mode mode, Rng &rng);

ModelParams backward(const ModelParams &params, const ModelConfig &config, const ForwardCache &cache,
                     const Mat4 &d_rho);

struct Model {
    ModelConfig config;
    ModelParams params;
};

/// Eval-mode outputs for many sequences of equal length.
std::vector<DensityMatrix> predict(const Model &model, std::span<const int> tokens, int seq_len);

}  // namespace mie

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

#include "mie/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mie/errors.hpp"

namespace mie {

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;
using ConstRowVec = Eigen::Map<const Eigen::RowVectorXd>;
using MutRowVec = Eigen::Map<Eigen::RowVectorXd>;

constexpr double kLayerNormEps = 1e-5;
constexpr double kMinTrace = 1e-30;
constexpr int kPredictChunk = 256;

}  // namespace

ModelConfig ModelConfig::from_preset(std::string_view name) {
    ModelConfig c;
    c.preset = std::string(name);
    if (name == "20K") {
        c.hidden_dim = 32, c.ffn_dim = 64, c.num_layers = 2;
    } else if (name == "70K") {
        c.hidden_dim = 64, c.ffn_dim = 128, c.num_layers = 2;
    } else if (name == "270K") {
        c.hidden_dim = 128, c.ffn_dim = 256, c.num_layers = 2;
    } else if (name == "540K") {
        c.hidden_dim = 128, c.ffn_dim = 256, c.num_layers = 4;
    } else {
        throw ConfigError("unknown model preset '" + std::string(name) + "' (expected 20K, 70K, 270K or 540K)");
    }
    return c;
}

std::vector<std::string> preset_names() {
    return {"20K", "70K", "270K", "540K"};
}

void ModelConfig::validate() const {
    if (hidden_dim <= 0 || ffn_dim <= 0 || num_layers <= 0 || num_heads <= 0 || max_seq_len <= 0) {
        throw ConfigError("model dimensions must be positive");
    }
    if (hidden_dim % num_heads != 0) {
        throw ConfigError("hidden_dim must be divisible by num_heads");
    }
    if (vocab_size != 3) {
        throw ConfigError("vocab_size must be 3");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0 || attn_dropout_rate < 0.0 || attn_dropout_rate >= 1.0) {
        throw ConfigError("dropout rates must lie in [0, 1)");
    }
    if (epsilon_mix < 0.0 || epsilon_mix >= 1.0) {
        throw ConfigError("epsilon_mix must lie in [0, 1)");
    }
}

std::vector<int> tokenize(std::span<const int8_t> env_outcomes) {
    std::vector<int> tokens;
    tokens.reserve(env_outcomes.size() + 1);
    tokens.push_back(kClsToken);
    for (int8_t v : env_outcomes) {
        if (v == 1) {
            tokens.push_back(kPlusToken);
        } else if (v == -1) {
            tokens.push_back(kMinusToken);
        } else {
            throw UnknownSymbol("cannot tokenize measurement outcome " + std::to_string(v));
        }
    }
    return tokens;
}

size_t ParamLayout::add(std::string name, size_t rows, size_t cols, bool decay) {
    size_t offset = total_;
    blocks_.push_back(ParamBlock{std::move(name), offset, rows, cols, decay});
    total_ += rows * cols;
    return offset;
}

ParamLayout::ParamLayout(const ModelConfig &config) {
    const size_t d = config.hidden_dim;
    const size_t f = config.ffn_dim;
    token_embedding = add("tok_emb", config.vocab_size, d, true);
    position_embedding = add("pos_emb", config.max_seq_len, d, true);
    for (int l = 0; l < config.num_layers; l++) {
        std::string p = "layers." + std::to_string(l) + ".";
        Layer layer{};
        layer.ln1_gain = add(p + "ln1.gain", 1, d, false);
        layer.ln1_bias = add(p + "ln1.bias", 1, d, false);
        layer.wq = add(p + "attn.wq", d, d, true);
        layer.bq = add(p + "attn.bq", 1, d, false);
        layer.wk = add(p + "attn.wk", d, d, true);
        layer.bk = add(p + "attn.bk", 1, d, false);
        layer.wv = add(p + "attn.wv", d, d, true);
        layer.bv = add(p + "attn.bv", 1, d, false);
        layer.wo = add(p + "attn.wo", d, d, true);
        layer.bo = add(p + "attn.bo", 1, d, false);
        layer.ln2_gain = add(p + "ln2.gain", 1, d, false);
        layer.ln2_bias = add(p + "ln2.bias", 1, d, false);
        layer.w1 = add(p + "ffn.w1", d, f, true);
        layer.b1 = add(p + "ffn.b1", 1, f, false);
        layer.w2 = add(p + "ffn.w2", f, d, true);
        layer.b2 = add(p + "ffn.b2", 1, d, false);
        layers.push_back(layer);
    }
    head_weight = add("head.weight", d, kHeadOutputs, true);
    head_bias = add("head.bias", 1, kHeadOutputs, false);
}

const ParamBlock &ParamLayout::block(std::string_view name) const {
    for (const auto &b : blocks_) {
        if (b.name == name) {
            return b;
        }
    }
    throw ShapeMismatch("no parameter block named '" + std::string(name) + "'");
}

ModelParams ModelParams::zeros(const ModelConfig &config) {
    ModelParams p;
    p.layout = ParamLayout(config);
    p.values.assign(p.layout.total(), 0.0);
    return p;
}

std::span<double> ModelParams::block(std::string_view name) {
    const auto &b = layout.block(name);
    return {values.data() + b.offset, b.size()};
}

std::span<const double> ModelParams::block(std::string_view name) const {
    const auto &b = layout.block(name);
    return {values.data() + b.offset, b.size()};
}

ModelParams init_params(const ModelConfig &config, Rng &rng) {
    config.validate();
    ModelParams p = ModelParams::zeros(config);
    std::normal_distribution<double> normal(0.0, 0.02);
    for (const auto &b : p.layout.blocks()) {
        double *v = p.values.data() + b.offset;
        bool is_gain = b.name.ends_with(".gain");
        if (b.decay || b.name == "head.bias") {
            for (size_t k = 0; k < b.size(); k++) {
                v[k] = normal(rng);
            }
        } else if (is_gain) {
            std::fill(v, v + b.size(), 1.0);
        }
    }
    return p;
}

namespace {

struct Views {
    const ModelParams &p;
    ConstMap mat(size_t offset, int rows, int cols) const { return ConstMap(p.values.data() + offset, rows, cols); }
    ConstRowVec vec(size_t offset, int n) const { return ConstRowVec(p.values.data() + offset, n); }
};

struct GradViews {
    ModelParams &g;
    MutMap mat(size_t offset, int rows, int cols) { return MutMap(g.values.data() + offset, rows, cols); }
    MutRowVec vec(size_t offset, int n) { return MutRowVec(g.values.data() + offset, n); }
};

void check_shapes(const ModelParams &params, const ModelConfig &config) {
    config.validate();
    ParamLayout expected(config);
    if (params.values.size() != expected.total() || params.layout.total() != expected.total()) {
        throw ShapeMismatch("parameter buffer has " + std::to_string(params.values.size()) +
                            " entries, config requires " + std::to_string(expected.total()));
    }
}

void layer_norm_forward(const RowMatrix &x, const double *gain, const double *bias, ForwardCache::LayerNormCache &c) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index d = x.cols();
    c.xhat.resize(rows, d);
    c.rstd.resize(rows);
    c.y.resize(rows, d);
    for (Eigen::Index r = 0; r < rows; r++) {
        const double *xr = x.data() + r * d;
        double mean = 0.0;
        for (Eigen::Index k = 0; k < d; k++) {
            mean += xr[k];
        }
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (Eigen::Index k = 0; k < d; k++) {
            double t = xr[k] - mean;
            var += t * t;
        }
        var /= static_cast<double>(d);
        double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
        c.rstd(r) = rstd;
        double *xh = c.xhat.data() + r * d;
        double *yr = c.y.data() + r * d;
        for (Eigen::Index k = 0; k < d; k++) {
            xh[k] = (xr[k] - mean) * rstd;
            yr[k] = xh[k] * gain[k] + bias[k];
        }
    }
}

/// dx += LN'(dy); dgain/dbias accumulate.
void layer_norm_backward(const ForwardCache::LayerNormCache &c, const double *gain, const RowMatrix &dy,
                         RowMatrix &dx, double *dgain, double *dbias) {
    const Eigen::Index rows = dy.rows();
    const Eigen::Index d = dy.cols();
    std::vector<double> dxhat(d);
    for (Eigen::Index r = 0; r < rows; r++) {
        const double *dyr = dy.data() + r * d;
        const double *xh = c.xhat.data() + r * d;
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (Eigen::Index k = 0; k < d; k++) {
            dgain[k] += dyr[k] * xh[k];
            dbias[k] += dyr[k];
            dxhat[k] = dyr[k] * gain[k];
            mean_dxhat += dxhat[k];
            mean_dxhat_xhat += dxhat[k] * xh[k];
        }
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        double *dxr = dx.data() + r * d;
        const double rstd = c.rstd(r);
        for (Eigen::Index k = 0; k < d; k++) {
            dxr[k] += rstd * (dxhat[k] - mean_dxhat - xh[k] * mean_dxhat_xhat);
        }
    }
}

RowMatrix gather_cls_rows(const RowMatrix &x, int batch, int seq_len) {
    RowMatrix out(batch, x.cols());
    for (int b = 0; b < batch; b++) {
        out.row(b) = x.row(static_cast<Eigen::Index>(b) * seq_len);
    }
    return out;
}

RowMatrix affine(const RowMatrix &x, ConstMap w, ConstRowVec bias) {
    RowMatrix out(x.rows(), w.cols());
    out.noalias() = x * w;
    out.rowwise() += bias;
    return out;
}

struct AttentionShape {
    int batch;
    int seq_len;
    int queries;  // per sequence
    int heads;
    int head_dim;
};

void attention_forward(const AttentionShape &s, const RowMatrix &q, const RowMatrix &k, const RowMatrix &v,
                       bool train, ForwardCache::Layer &lc) {
    const int d = s.heads * s.head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
    lc.probs.assign(static_cast<size_t>(s.batch) * s.heads * s.queries * s.seq_len, 0.0);
    lc.ctx.setZero(static_cast<Eigen::Index>(s.batch) * s.queries, d);
    std::vector<double> weights(s.seq_len);
    for (int b = 0; b < s.batch; b++) {
        for (int h = 0; h < s.heads; h++) {
            const int col = h * s.head_dim;
            for (int i = 0; i < s.queries; i++) {
                const double *qi = q.data() + (static_cast<Eigen::Index>(b) * s.queries + i) * d + col;
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < s.seq_len; j++) {
                    const double *kj = k.data() + (static_cast<Eigen::Index>(b) * s.seq_len + j) * d + col;
                    double dot = 0.0;
                    for (int c = 0; c < s.head_dim; c++) {
                        dot += qi[c] * kj[c];
                    }
                    weights[j] = dot * scale;
                    mx = std::max(mx, weights[j]);
                }
                double total = 0.0;
                for (int j = 0; j < s.seq_len; j++) {
                    weights[j] = std::exp(weights[j] - mx);
                    total += weights[j];
                }
                const size_t base = ((static_cast<size_t>(b) * s.heads + h) * s.queries + i) * s.seq_len;
                double *out = lc.ctx.data() + (static_cast<Eigen::Index>(b) * s.queries + i) * d + col;
                for (int j = 0; j < s.seq_len; j++) {
                    double p = weights[j] / total;
                    lc.probs[base + j] = p;
                    double pd = train ? p * lc.attn_mask[base + j] : p;
                    const double *vj = v.data() + (static_cast<Eigen::Index>(b) * s.seq_len + j) * d + col;
                    for (int c = 0; c < s.head_dim; c++) {
                        out[c] += pd * vj[c];
                    }
                }
            }
        }
    }
}

void attention_backward(const AttentionShape &s, const ForwardCache::Layer &lc, bool train, const RowMatrix &dctx,
                        RowMatrix &dq, RowMatrix &dk, RowMatrix &dv) {
    const int d = s.heads * s.head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
    dq.setZero(static_cast<Eigen::Index>(s.batch) * s.queries, d);
    dk.setZero(static_cast<Eigen::Index>(s.batch) * s.seq_len, d);
    dv.setZero(static_cast<Eigen::Index>(s.batch) * s.seq_len, d);
    std::vector<double> dp(s.seq_len);
    for (int b = 0; b < s.batch; b++) {
        for (int h = 0; h < s.heads; h++) {
            const int col = h * s.head_dim;
            for (int i = 0; i < s.queries; i++) {
                const Eigen::Index qrow = static_cast<Eigen::Index>(b) * s.queries + i;
                const double *g = dctx.data() + qrow * d + col;
                const double *qi = lc.q.data() + qrow * d + col;
                double *dqi = dq.data() + qrow * d + col;
                const size_t base = ((static_cast<size_t>(b) * s.heads + h) * s.queries + i) * s.seq_len;
                double weighted = 0.0;
                for (int j = 0; j < s.seq_len; j++) {
                    const Eigen::Index krow = static_cast<Eigen::Index>(b) * s.seq_len + j;
                    const double *vj = lc.v.data() + krow * d + col;
                    double *dvj = dv.data() + krow * d + col;
                    const double p = lc.probs[base + j];
                    const double m = train ? lc.attn_mask[base + j] : 1.0;
                    double dpd = 0.0;
                    for (int c = 0; c < s.head_dim; c++) {
                        dpd += g[c] * vj[c];
                        dvj[c] += p * m * g[c];
                    }
                    dp[j] = dpd * m;
                    weighted += dp[j] * p;
                }
                for (int j = 0; j < s.seq_len; j++) {
                    const Eigen::Index krow = static_cast<Eigen::Index>(b) * s.seq_len + j;
                    const double ds = lc.probs[base + j] * (dp[j] - weighted) * scale;
                    const double *kj = lc.k.data() + krow * d + col;
                    double *dkj = dk.data() + krow * d + col;
                    for (int c = 0; c < s.head_dim; c++) {
                        dqi[c] += ds * kj[c];
                        dkj[c] += ds * qi[c];
                    }
                }
            }
        }
    }
}

void draw_masks(const ModelConfig &config, int seq_len, std::span<const uint64_t> seeds, ForwardCache &c) {
    const int batch = c.batch;
    const int d = config.hidden_dim;
    const double keep_attn = 1.0 - config.attn_dropout_rate;
    const double keep_resid = 1.0 - config.dropout_rate;
    const double scale_attn = 1.0 / keep_attn;
    const double scale_resid = 1.0 / keep_resid;
    for (size_t l = 0; l < c.layers.size(); l++) {
        auto &lc = c.layers[l];
        const int rows = lc.cls_only ? 1 : seq_len;
        lc.attn_mask.assign(static_cast<size_t>(batch) * config.num_heads * rows * seq_len, 1.0);
        lc.resid1_mask.setOnes(static_cast<Eigen::Index>(batch) * rows, d);
        lc.resid2_mask.setOnes(static_cast<Eigen::Index>(batch) * rows, d);
    }
    // Each 64-bit draw decides two mask entries, one per 32-bit half:
    // keep when the half is below round(keep · 2^32).
    auto fill = [](Rng &rng, double *m, size_t n, double keep, double scale) {
        const uint64_t threshold = static_cast<uint64_t>(std::llround(keep * 4294967296.0));
        size_t k = 0;
        for (; k + 1 < n; k += 2) {
            const uint64_t u = rng();
            m[k] = (u & 0xFFFFFFFFu) < threshold ? scale : 0.0;
            m[k + 1] = (u >> 32) < threshold ? scale : 0.0;
        }
        if (k < n) {
            m[k] = (rng() & 0xFFFFFFFFu) < threshold ? scale : 0.0;
        }
    };
    for (int b = 0; b < batch; b++) {
        Rng rng(seeds[b]);
        for (auto &lc : c.layers) {
            const int rows = lc.cls_only ? 1 : seq_len;
            if (config.attn_dropout_rate > 0.0) {
                const size_t n = static_cast<size_t>(config.num_heads) * rows * seq_len;
                fill(rng, lc.attn_mask.data() + b * n, n, keep_attn, scale_attn);
            }
            if (config.dropout_rate > 0.0) {
                const size_t n = static_cast<size_t>(rows) * d;
                fill(rng, lc.resid1_mask.data() + b * n, n, keep_resid, scale_resid);
                fill(rng, lc.resid2_mask.data() + b * n, n, keep_resid, scale_resid);
            }
        }
    }
}

Mat4 head_matrix(const double *out) {
    Mat4 a;
    for (int k = 0; k < 16; k++) {
        a(k / 4, k % 4) = cd{out[2 * k], out[2 * k + 1]};
    }
    return a;
}

}  // namespace

std::vector<DensityMatrix> forward_batch(const ModelParams &params, const ModelConfig &config,
                                         std::span<const int> tokens, int seq_len, Mode mode,
                                         std::span<const uint64_t> mask_seeds, ForwardCache *cache) {
    check_shapes(params, config);
    if (seq_len <= 0 || seq_len > config.max_seq_len) {
        throw ShapeMismatch("sequence length " + std::to_string(seq_len) + " outside [1, " +
                            std::to_string(config.max_seq_len) + "]");
    }
    if (tokens.size() % seq_len != 0) {
        throw ShapeMismatch("token buffer is not a whole number of sequences");
    }
    const int batch = static_cast<int>(tokens.size() / seq_len);
    const bool train = mode == Mode::Train;
    if (train && mask_seeds.size() != static_cast<size_t>(batch)) {
        throw ShapeMismatch("train mode needs one dropout seed per sequence");
    }
    for (int t : tokens) {
        if (t < 0 || t >= config.vocab_size) {
            throw UnknownSymbol("token id " + std::to_string(t) + " out of vocabulary");
        }
    }

    ForwardCache local;
    ForwardCache &c = cache ? *cache : local;
    c = ForwardCache{};
    c.mode = mode;
    c.batch = batch;
    c.seq_len = seq_len;
    c.tokens.assign(tokens.begin(), tokens.end());
    c.layers.resize(config.num_layers);
    for (int l = 0; l < config.num_layers; l++) {
        c.layers[l].cls_only = l == config.num_layers - 1;
    }
    if (train) {
        draw_masks(config, seq_len, mask_seeds, c);
    }

    const Views w{params};
    const auto &layout = params.layout;
    const int d = config.hidden_dim;
    const int f = config.ffn_dim;

    RowMatrix x(static_cast<Eigen::Index>(batch) * seq_len, d);
    {
        auto tok = w.mat(layout.token_embedding, config.vocab_size, d);
        auto pos = w.mat(layout.position_embedding, config.max_seq_len, d);
        for (int b = 0; b < batch; b++) {
            for (int i = 0; i < seq_len; i++) {
                Eigen::Index r = static_cast<Eigen::Index>(b) * seq_len + i;
                x.row(r) = tok.row(tokens[r]) + pos.row(i);
            }
        }
    }

    for (int l = 0; l < config.num_layers; l++) {
        const auto &o = layout.layers[l];
        auto &lc = c.layers[l];
        const int queries = lc.cls_only ? 1 : seq_len;

        layer_norm_forward(x, params.values.data() + o.ln1_gain, params.values.data() + o.ln1_bias, lc.ln1);
        if (lc.cls_only) {
            lc.q = affine(gather_cls_rows(lc.ln1.y, batch, seq_len), w.mat(o.wq, d, d), w.vec(o.bq, d));
        } else {
            lc.q = affine(lc.ln1.y, w.mat(o.wq, d, d), w.vec(o.bq, d));
        }
        lc.k = affine(lc.ln1.y, w.mat(o.wk, d, d), w.vec(o.bk, d));
        lc.v = affine(lc.ln1.y, w.mat(o.wv, d, d), w.vec(o.bv, d));

        AttentionShape shape{batch, seq_len, queries, config.num_heads, config.head_dim()};
        attention_forward(shape, lc.q, lc.k, lc.v, train, lc);

        RowMatrix attn = affine(lc.ctx, w.mat(o.wo, d, d), w.vec(o.bo, d));
        if (train) {
            attn.array() *= lc.resid1_mask.array();
        }
        RowMatrix x1 = lc.cls_only ? gather_cls_rows(x, batch, seq_len) : x;
        x1 += attn;

        layer_norm_forward(x1, params.values.data() + o.ln2_gain, params.values.data() + o.ln2_bias, lc.ln2);
        lc.ffn_pre = affine(lc.ln2.y, w.mat(o.w1, d, f), w.vec(o.b1, f));
        lc.ffn_act = lc.ffn_pre.cwiseMax(0.0);
        RowMatrix ffn = affine(lc.ffn_act, w.mat(o.w2, f, d), w.vec(o.b2, d));
        if (train) {
            ffn.array() *= lc.resid2_mask.array();
        }
        x = std::move(x1);
        x += ffn;
    }

    c.cls_hidden = std::move(x);
    c.head_out = affine(c.cls_hidden, w.mat(layout.head_weight, d, kHeadOutputs), w.vec(layout.head_bias, kHeadOutputs));
    c.trace.resize(batch);
    c.output.resize(batch);
    const double eps = config.epsilon_mix;
    for (int b = 0; b < batch; b++) {
        Mat4 a = head_matrix(c.head_out.data() + static_cast<Eigen::Index>(b) * kHeadOutputs);
        Mat4 rho0 = a * a.adjoint();
        double tr = rho0.trace().real();
        if (!(tr >= kMinTrace)) {
            throw NumericalFailure("Tr(AA†) = " + std::to_string(tr) + " for sequence " + std::to_string(b));
        }
        c.trace[b] = tr;
        c.output[b].matrix = (1.0 - eps) * (rho0 / tr) + (eps / 4.0) * Mat4::Identity();
    }
    return c.output;
}

void backward_batch(const ModelParams &params, const ModelConfig &config, const ForwardCache &cache,
                    std::span<const Mat4> d_rho, ModelParams &grads) {
    check_shapes(params, config);
    const int batch = cache.batch;
    const int seq_len = cache.seq_len;
    if (d_rho.size() != static_cast<size_t>(batch) || cache.layers.size() != static_cast<size_t>(config.num_layers) ||
        cache.head_out.rows() != batch || cache.tokens.size() != static_cast<size_t>(batch) * seq_len) {
        throw ShapeMismatch("forward cache does not match the sensitivity batch or model config");
    }
    if (grads.values.size() != params.values.size()) {
        throw ShapeMismatch("gradient buffer does not match the parameters");
    }
    const bool train = cache.mode == Mode::Train;
    const Views w{params};
    GradViews g{grads};
    const auto &layout = params.layout;
    const int d = config.hidden_dim;
    const int f = config.ffn_dim;
    const double eps = config.epsilon_mix;

    RowMatrix d_out(batch, kHeadOutputs);
    for (int b = 0; b < batch; b++) {
        Mat4 a = head_matrix(cache.head_out.data() + static_cast<Eigen::Index>(b) * kHeadOutputs);
        const double tr = cache.trace[b];
        Mat4 rho_norm = a * a.adjoint() / tr;
        Mat4 g_norm = (1.0 - eps) * d_rho[b];
        double g_trace = -(g_norm.adjoint() * rho_norm).trace().real() / tr;
        Mat4 g_rho0 = g_norm / tr;
        Mat4 g_a = (g_rho0 + g_rho0.adjoint()) * a + 2.0 * g_trace * a;
        for (int k = 0; k < 16; k++) {
            d_out(b, 2 * k) = g_a(k / 4, k % 4).real();
            d_out(b, 2 * k + 1) = g_a(k / 4, k % 4).imag();
        }
    }
    g.mat(layout.head_weight, d, kHeadOutputs).noalias() += cache.cls_hidden.transpose() * d_out;
    g.vec(layout.head_bias, kHeadOutputs) += d_out.colwise().sum();
    RowMatrix dx = d_out * w.mat(layout.head_weight, d, kHeadOutputs).transpose();

    for (int l = config.num_layers - 1; l >= 0; l--) {
        const auto &o = layout.layers[l];
        const auto &lc = cache.layers[l];
        const int queries = lc.cls_only ? 1 : seq_len;

        RowMatrix dx1 = dx;
        RowMatrix d_ffn = train ? RowMatrix(dx.cwiseProduct(lc.resid2_mask)) : dx;
        g.mat(o.w2, f, d).noalias() += lc.ffn_act.transpose() * d_ffn;
        g.vec(o.b2, d) += d_ffn.colwise().sum();
        RowMatrix d_pre = d_ffn * w.mat(o.w2, f, d).transpose();
        d_pre.array() *= (lc.ffn_pre.array() > 0.0).cast<double>();
        g.mat(o.w1, d, f).noalias() += lc.ln2.y.transpose() * d_pre;
        g.vec(o.b1, f) += d_pre.colwise().sum();
        RowMatrix dy2 = d_pre * w.mat(o.w1, d, f).transpose();
        layer_norm_backward(lc.ln2, params.values.data() + o.ln2_gain, dy2, dx1, grads.values.data() + o.ln2_gain,
                            grads.values.data() + o.ln2_bias);

        RowMatrix d_attn = train ? RowMatrix(dx1.cwiseProduct(lc.resid1_mask)) : dx1;
        g.mat(o.wo, d, d).noalias() += lc.ctx.transpose() * d_attn;
        g.vec(o.bo, d) += d_attn.colwise().sum();
        RowMatrix d_ctx = d_attn * w.mat(o.wo, d, d).transpose();

        RowMatrix dq, dk, dv;
        AttentionShape shape{batch, seq_len, queries, config.num_heads, config.head_dim()};
        attention_backward(shape, lc, train, d_ctx, dq, dk, dv);

        RowMatrix y_query = lc.cls_only ? gather_cls_rows(lc.ln1.y, batch, seq_len) : lc.ln1.y;
        g.mat(o.wq, d, d).noalias() += y_query.transpose() * dq;
        g.vec(o.bq, d) += dq.colwise().sum();
        g.mat(o.wk, d, d).noalias() += lc.ln1.y.transpose() * dk;
        g.vec(o.bk, d) += dk.colwise().sum();
        g.mat(o.wv, d, d).noalias() += lc.ln1.y.transpose() * dv;
        g.vec(o.bv, d) += dv.colwise().sum();

        RowMatrix dy1(lc.ln1.y.rows(), d);
        dy1.noalias() = dk * w.mat(o.wk, d, d).transpose();
        dy1.noalias() += dv * w.mat(o.wv, d, d).transpose();
        RowMatrix dq_in = dq * w.mat(o.wq, d, d).transpose();

        RowMatrix dx_in;
        if (lc.cls_only) {
            dx_in.setZero(static_cast<Eigen::Index>(batch) * seq_len, d);
            for (int b = 0; b < batch; b++) {
                Eigen::Index r = static_cast<Eigen::Index>(b) * seq_len;
                dy1.row(r) += dq_in.row(b);
                dx_in.row(r) = dx1.row(b);
            }
        } else {
            dy1 += dq_in;
            dx_in = std::move(dx1);
        }
        layer_norm_backward(lc.ln1, params.values.data() + o.ln1_gain, dy1, dx_in, grads.values.data() + o.ln1_gain,
                            grads.values.data() + o.ln1_bias);
        dx = std::move(dx_in);
    }

    auto d_tok = g.mat(layout.token_embedding, config.vocab_size, d);
    auto d_pos = g.mat(layout.position_embedding, config.max_seq_len, d);
    for (int b = 0; b < batch; b++) {
        for (int i = 0; i < seq_len; i++) {
            Eigen::Index r = static_cast<Eigen::Index>(b) * seq_len + i;
            d_tok.row(cache.tokens[r]) += dx.row(r);
            d_pos.row(i) += dx.row(r);
        }
    }
}

std::pair<DensityMatrix, ForwardCache> forward(const ModelParams &params, const ModelConfig &config,
                                               std::span<const int> tokens, Mode mode, Rng &rng) {
    ForwardCache cache;
    uint64_t seed = mode == Mode::Train ? rng() : 0;
    auto out = forward_batch(params, config, tokens, static_cast<int>(tokens.size()), mode,
                             std::span<const uint64_t>(&seed, mode == Mode::Train ? 1 : 0), &cache);
    return {out.front(), std::move(cache)};
}

ModelParams backward(const ModelParams &params, const ModelConfig &config, const ForwardCache &cache,
                     const Mat4 &d_rho) {
    ModelParams grads = ModelParams::zeros(config);
    backward_batch(params, config, cache, std::span<const Mat4>(&d_rho, 1), grads);
    return grads;
}

std::vector<DensityMatrix> predict(const Model &model, std::span<const int> tokens, int seq_len) {
    std::vector<DensityMatrix> out;
    out.reserve(tokens.size() / std::max(seq_len, 1));
    const size_t chunk = static_cast<size_t>(kPredictChunk) * seq_len;
    for (size_t start = 0; start < tokens.size(); start += chunk) {
        size_t len = std::min(chunk, tokens.size() - start);
        auto part = forward_batch(model.params, model.config, tokens.subspan(start, len), seq_len, Mode::Eval, {},
                                  nullptr);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

}  // namespace mie

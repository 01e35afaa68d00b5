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

#include <algorithm>
#include <string>
#include <vector>

#include "mie/nn_core.hpp"
#include "test_util.hpp"

namespace mie::test_util {

struct ProbeResult {
    double value = 0.0;
    /// Sign of every ReLU pre-activation, layer by layer.
    std::vector<bool> relu_pattern;
};

/// Σ_b Re Tr(G_b† ρ_b), the scalar whose gradient backward_batch returns.
inline ProbeResult probe_loss(const ModelParams &p, const ModelConfig &c, const std::vector<std::vector<int>> &seqs,
                              const std::vector<Mat4> &g, Mode mode, const std::vector<uint64_t> &seeds) {
    std::vector<int> flat;
    for (const auto &s : seqs) {
        flat.insert(flat.end(), s.begin(), s.end());
    }
    ForwardCache cache;
    auto rho = forward_batch(p, c, flat, static_cast<int>(seqs[0].size()), mode, seeds, &cache);
    ProbeResult out;
    for (size_t b = 0; b < rho.size(); b++) {
        out.value += (g[b].adjoint() * rho[b].matrix).trace().real();
    }
    for (const auto &layer : cache.layers) {
        const double *x = layer.ffn_pre.data();
        for (Eigen::Index i = 0; i < layer.ffn_pre.size(); i++) {
            out.relu_pattern.push_back(x[i] > 0.0);
        }
    }
    return out;
}

struct GradCheck {
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::string worst;
    /// Parameters whose ±h step moved a ReLU across its kink.
    int kink_crossings = 0;
    size_t checked = 0;
};

/// Central differences over every parameter. Relative error is taken
/// against max(|analytic|, |numeric|, floor); the floor keeps exactly-zero
/// gradients (key biases, by softmax shift invariance) from dividing
/// finite-difference round-off by zero.
///
/// A difference quotient is only a derivative oracle where the function is
/// smooth over [θ−h, θ+h]. When a ReLU pre-activation changes sign inside
/// that interval the step is shrunk tenfold until it no longer does.
inline GradCheck check_gradients(const ModelParams &p, const ModelConfig &c,
                                 const std::vector<std::vector<int>> &seqs, Mode mode, double h, double floor,
                                 uint64_t probe_seed = 99) {
    Rng rng(probe_seed);
    std::vector<Mat4> g(seqs.size());
    for (auto &m : g) {
        m = random_density_matrix(rng, 4) * 3.0 - Mat4::Identity();
    }
    std::vector<uint64_t> seeds;
    if (mode == Mode::Train) {
        for (size_t b = 0; b < seqs.size(); b++) {
            seeds.push_back(1000 + b);
        }
    }
    std::vector<int> flat;
    for (const auto &s : seqs) {
        flat.insert(flat.end(), s.begin(), s.end());
    }
    ForwardCache cache;
    forward_batch(p, c, flat, static_cast<int>(seqs[0].size()), mode, seeds, &cache);
    ModelParams grads = ModelParams::zeros(c);
    backward_batch(p, c, cache, g, grads);
    const std::vector<bool> base = probe_loss(p, c, seqs, g, mode, seeds).relu_pattern;

    GradCheck out;
    ModelParams q = p;
    for (size_t i = 0; i < p.size(); i++) {
        const double orig = q.values[i];
        double step = h;
        double num = 0.0;
        bool crossed = false;
        for (;;) {
            q.values[i] = orig + step;
            ProbeResult lp = probe_loss(q, c, seqs, g, mode, seeds);
            q.values[i] = orig - step;
            ProbeResult lm = probe_loss(q, c, seqs, g, mode, seeds);
            num = (lp.value - lm.value) / (2 * step);
            bool smooth = lp.relu_pattern == base && lm.relu_pattern == base;
            if (smooth || step < h * 1e-4) {
                break;
            }
            crossed = true;
            step /= 10;
        }
        q.values[i] = orig;
        out.kink_crossings += crossed;
        out.checked++;
        double ana = grads.values[i];
        double err = std::abs(num - ana);
        double rel = err / std::max({std::abs(num), std::abs(ana), floor});
        out.max_abs = std::max(out.max_abs, err);
        if (rel > out.max_rel) {
            out.max_rel = rel;
            for (const auto &blk : p.layout.blocks()) {
                if (i >= blk.offset && i < blk.offset + blk.size()) {
                    out.worst = blk.name + "[" + std::to_string(i - blk.offset) + "]";
                }
            }
        }
    }
    return out;
}

}  // namespace mie::test_util

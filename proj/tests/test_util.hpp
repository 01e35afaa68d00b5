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

#include <cmath>
#include <vector>

#include "mie/linalg.hpp"
#include "mie/quantum_sim.hpp"
#include "mie/rng.hpp"

namespace mie::test_util {

inline Vec4 random_pure_state(Rng &rng) {
    std::normal_distribution<double> g;
    Vec4 v;
    for (int i = 0; i < 4; i++) {
        v(i) = cd{g(rng), g(rng)};
    }
    return v / v.norm();
}

/// Mixture of `rank` random pure states with random weights.
inline Mat4 random_density_matrix(Rng &rng, int rank = 4) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat4 rho = Mat4::Zero();
    double total = 0.0;
    for (int k = 0; k < rank; k++) {
        Vec4 v = random_pure_state(rng);
        double w = u(rng) + 1e-3;
        rho += w * v * v.adjoint();
        total += w;
    }
    return rho / total;
}

inline Statevector random_statevector(int num_qubits, Rng &rng) {
    std::normal_distribution<double> g;
    std::vector<cd> amps(size_t{1} << num_qubits);
    double n2 = 0.0;
    for (auto &a : amps) {
        a = cd{g(rng), g(rng)};
        n2 += std::norm(a);
    }
    for (auto &a : amps) {
        a /= std::sqrt(n2);
    }
    return Statevector::from_amplitudes(std::move(amps));
}

inline double max_diff(std::span<const cd> a, std::span<const cd> b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); i++) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

}  // namespace mie::test_util

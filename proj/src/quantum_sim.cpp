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

#include "mie/quantum_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "mie/errors.hpp"

namespace mie {

namespace {

constexpr double kMinOutcomeProbability = 1e-14;

}  // namespace

std::string geometry_name(Geometry g) {
    switch (g) {
        case Geometry::AllToAll1D:
            return "all-to-all-1d";
        case Geometry::Square2D:
            return "square-2d";
    }
    return "?";
}

Geometry parse_geometry(const std::string &name) {
    if (name == "all-to-all-1d") {
        return Geometry::AllToAll1D;
    }
    if (name == "square-2d") {
        return Geometry::Square2D;
    }
    throw ConfigError("unknown geometry '" + name + "' (expected all-to-all-1d or square-2d)");
}

size_t CircuitSpec::gate_count() const {
    return static_cast<size_t>(std::llround(static_cast<double>(num_qubits) * depth));
}

void CircuitSpec::validate() const {
    if (num_qubits < 3) {
        throw InvalidCircuit("num_qubits must be at least 3, got " + std::to_string(num_qubits));
    }
    if (num_qubits > kMaxStatevectorQubits) {
        throw SystemTooLarge("num_qubits " + std::to_string(num_qubits) + " exceeds the statevector cap of " +
                             std::to_string(kMaxStatevectorQubits));
    }
    if (!(depth >= 0.0) || !std::isfinite(depth)) {
        throw InvalidCircuit("depth must be a finite nonnegative number");
    }
    if (probe_a == probe_b || probe_a < 0 || probe_b < 0 || probe_a >= num_qubits || probe_b >= num_qubits) {
        throw InvalidCircuit("probe qubits must be distinct indices in [0, L)");
    }
    if (geometry == Geometry::Square2D) {
        if (rows * cols != num_qubits) {
            throw InvalidCircuit("square-2d lattice " + std::to_string(rows) + "x" + std::to_string(cols) +
                                 " does not have L = " + std::to_string(num_qubits) + " sites");
        }
        if (rows < 2 || cols < 2) {
            throw InvalidCircuit("square-2d lattice needs at least 2 rows and 2 cols");
        }
    }
}

CircuitSpec make_all_to_all_spec(int num_qubits, double depth, uint64_t seed) {
    CircuitSpec spec;
    spec.num_qubits = num_qubits;
    spec.geometry = Geometry::AllToAll1D;
    spec.depth = depth;
    spec.probe_a = 0;
    spec.probe_b = num_qubits - 1;
    spec.seed = seed;
    return spec;
}

CircuitSpec make_square_spec(int rows, int cols, double depth, uint64_t seed) {
    CircuitSpec spec;
    spec.num_qubits = rows * cols;
    spec.geometry = Geometry::Square2D;
    spec.rows = rows;
    spec.cols = cols;
    spec.depth = depth;
    spec.probe_a = 0;
    spec.probe_b = (rows / 2) * cols + cols / 2;
    spec.seed = seed;
    return spec;
}

Statevector::Statevector(int num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits < 0 || num_qubits > kMaxStatevectorQubits) {
        throw SystemTooLarge("statevector of " + std::to_string(num_qubits) + " qubits exceeds the cap of " +
                             std::to_string(kMaxStatevectorQubits));
    }
    amps_.assign(size_t{1} << num_qubits, cd{0.0, 0.0});
    amps_[0] = 1.0;
}

Statevector Statevector::from_amplitudes(std::vector<cd> amplitudes) {
    size_t n = amplitudes.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw ShapeMismatch("amplitude count must be a power of two");
    }
    int num_qubits = std::countr_zero(n);
    if (num_qubits > kMaxStatevectorQubits) {
        throw SystemTooLarge("statevector exceeds the qubit cap");
    }
    return Statevector(num_qubits, std::move(amplitudes));
}

double Statevector::norm() const {
    double total = 0.0;
    for (const cd &a : amps_) {
        total += std::norm(a);
    }
    return std::sqrt(total);
}

Mat4 haar_two_qubit_gate(Rng &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat4 ginibre;
    for (int i = 0; i < 4; i++) {
        for (int j = 0; j < 4; j++) {
            double re = normal(rng);
            double im = normal(rng);
            ginibre(i, j) = cd{re, im} * M_SQRT1_2;
        }
    }
    Eigen::HouseholderQR<Mat4> qr(ginibre);
    Mat4 q = qr.householderQ();
    const Mat4 &r = qr.matrixQR();
    // Q·Λ with Λ = phases of diag(R) makes the factorization unique, which is
    // what turns the Ginibre measure into the Haar measure.
    for (int j = 0; j < 4; j++) {
        double mag = std::abs(r(j, j));
        cd phase = mag > 0.0 ? r(j, j) / mag : cd{1.0, 0.0};
        q.col(j) *= phase;
    }
    return q;
}

GateSequence build_circuit(const CircuitSpec &spec, Rng &rng) {
    spec.validate();
    const int n = spec.num_qubits;
    std::vector<std::pair<int, int>> pairs;
    if (spec.geometry == Geometry::AllToAll1D) {
        for (int i = 0; i < n; i++) {
            for (int j = i + 1; j < n; j++) {
                pairs.emplace_back(i, j);
            }
        }
    } else {
        for (int r = 0; r < spec.rows; r++) {
            for (int c = 0; c < spec.cols; c++) {
                int site = r * spec.cols + c;
                pairs.emplace_back(site, r * spec.cols + (c + 1) % spec.cols);
                pairs.emplace_back(site, ((r + 1) % spec.rows) * spec.cols + c);
            }
        }
    }
    std::uniform_int_distribution<size_t> pick(0, pairs.size() - 1);
    GateSequence gates;
    size_t count = spec.gate_count();
    gates.reserve(count);
    for (size_t g = 0; g < count; g++) {
        auto [i, j] = pairs[pick(rng)];
        gates.push_back(Gate{i, j, haar_two_qubit_gate(rng)});
    }
    return gates;
}

void apply_gate(Statevector &state, int q0, int q1, const Mat4 &u) {
    auto amps = state.amplitudes();
    const uint64_t m0 = uint64_t{1} << q0;
    const uint64_t m1 = uint64_t{1} << q1;
    const uint64_t dim = amps.size();
    for (uint64_t k = 0; k < dim; k++) {
        if (k & (m0 | m1)) {
            continue;
        }
        const uint64_t idx[4] = {k, k | m1, k | m0, k | m0 | m1};
        cd in[4];
        for (int r = 0; r < 4; r++) {
            in[r] = amps[idx[r]];
        }
        for (int r = 0; r < 4; r++) {
            amps[idx[r]] = u(r, 0) * in[0] + u(r, 1) * in[1] + u(r, 2) * in[2] + u(r, 3) * in[3];
        }
    }
}

void apply_single_qubit(Statevector &state, int qubit, const Mat2 &u) {
    auto amps = state.amplitudes();
    const uint64_t m = uint64_t{1} << qubit;
    for (uint64_t k = 0; k < amps.size(); k++) {
        if (k & m) {
            continue;
        }
        cd a0 = amps[k];
        cd a1 = amps[k | m];
        amps[k] = u(0, 0) * a0 + u(0, 1) * a1;
        amps[k | m] = u(1, 0) * a0 + u(1, 1) * a1;
    }
}

void apply_circuit(Statevector &state, const GateSequence &gates) {
    for (const Gate &g : gates) {
        apply_gate(state, g.q0, g.q1, g.unitary);
    }
}

Statevector prepare_state(const CircuitSpec &spec) {
    spec.validate();
    Rng rng(spec.seed);
    GateSequence gates = build_circuit(spec, rng);
    Statevector state(spec.num_qubits);
    apply_circuit(state, gates);
    return state;
}

OutcomeSampler::OutcomeSampler(const Statevector &state) {
    auto amps = state.amplitudes();
    cumulative_.resize(amps.size());
    double total = 0.0;
    for (size_t k = 0; k < amps.size(); k++) {
        double p = std::norm(amps[k]);
        total += p;
        cumulative_[k] = total;
        if (p > 0.0) {
            last_nonzero_ = k;
        }
    }
}

uint64_t OutcomeSampler::sample(Rng &rng) const {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    double target = uniform(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    uint64_t k = static_cast<uint64_t>(it - cumulative_.begin());
    return std::min(k, last_nonzero_);
}

uint64_t sample_all_qubits(const Statevector &state, Rng &rng) {
    return OutcomeSampler(state).sample(rng);
}

std::vector<int> environment_qubits(int num_qubits, int a, int b) {
    std::vector<int> env;
    env.reserve(std::max(0, num_qubits - 2));
    for (int q = 0; q < num_qubits; q++) {
        if (q != a && q != b) {
            env.push_back(q);
        }
    }
    return env;
}

uint64_t compose_index(const std::vector<int> &env_qubits, const EnvOutcome &m_env, int a, int bit_a, int b,
                       int bit_b) {
    uint64_t idx = (uint64_t(bit_a & 1) << a) | (uint64_t(bit_b & 1) << b);
    for (size_t k = 0; k < env_qubits.size(); k++) {
        if (m_env[k]) {
            idx |= uint64_t{1} << env_qubits[k];
        }
    }
    return idx;
}

namespace {

OracleState project_with(std::span<const cd> amps, uint64_t base, int a, int b, EnvOutcome m_env) {
    Vec4 psi;
    for (int ba = 0; ba < 2; ba++) {
        for (int bb = 0; bb < 2; bb++) {
            uint64_t idx = base | (uint64_t(ba) << a) | (uint64_t(bb) << b);
            psi(2 * ba + bb) = amps[idx];
        }
    }
    OracleState out;
    out.probability = psi.squaredNorm();
    out.m_env = std::move(m_env);
    if (out.probability >= kMinOutcomeProbability) {
        out.sigma_ab = psi * psi.adjoint() / out.probability;
    } else {
        out.sigma_ab.setZero();
    }
    return out;
}

void check_probes(const Statevector &state, int a, int b) {
    int n = state.num_qubits();
    if (a == b || a < 0 || b < 0 || a >= n || b >= n) {
        throw InvalidCircuit("probe qubits must be distinct indices in [0, L)");
    }
}

}  // namespace

OracleState project_environment(const Statevector &state, const EnvOutcome &m_env, int a, int b) {
    check_probes(state, a, b);
    auto env = environment_qubits(state.num_qubits(), a, b);
    if (m_env.size() != env.size()) {
        throw ShapeMismatch("environment outcome has " + std::to_string(m_env.size()) + " bits, expected " +
                            std::to_string(env.size()));
    }
    uint64_t base = compose_index(env, m_env, a, 0, b, 0);
    OracleState out = project_with(state.amplitudes(), base, a, b, m_env);
    if (out.probability < kMinOutcomeProbability) {
        throw ZeroProbabilityOutcome("environment outcome has probability " + std::to_string(out.probability));
    }
    return out;
}

void for_each_outcome(const Statevector &state, int a, int b, const std::function<void(const OracleState &)> &visit,
                      int cap) {
    check_probes(state, a, b);
    if (state.num_qubits() > cap) {
        throw SystemTooLarge("enumeration over " + std::to_string(state.num_qubits()) +
                             " qubits exceeds the cap of " + std::to_string(cap));
    }
    auto env = environment_qubits(state.num_qubits(), a, b);
    const uint64_t count = uint64_t{1} << env.size();
    EnvOutcome m_env(env.size());
    for (uint64_t e = 0; e < count; e++) {
        uint64_t base = 0;
        for (size_t k = 0; k < env.size(); k++) {
            m_env[k] = static_cast<uint8_t>((e >> k) & 1);
            if (m_env[k]) {
                base |= uint64_t{1} << env[k];
            }
        }
        OracleState out = project_with(state.amplitudes(), base, a, b, m_env);
        if (out.probability >= kMinOutcomeProbability) {
            visit(out);
        }
    }
}

std::vector<OracleState> enumerate_outcomes(const Statevector &state, int a, int b, int cap) {
    std::vector<OracleState> out;
    for_each_outcome(state, a, b, [&](const OracleState &o) { out.push_back(o); }, cap);
    return out;
}

Mat4 reduced_density_matrix(const Statevector &state, int a, int b) {
    check_probes(state, a, b);
    auto amps = state.amplitudes();
    const uint64_t ma = uint64_t{1} << a;
    const uint64_t mb = uint64_t{1} << b;
    Mat4 rho = Mat4::Zero();
    for (uint64_t k = 0; k < amps.size(); k++) {
        if (k & (ma | mb)) {
            continue;
        }
        Vec4 psi;
        psi << amps[k], amps[k | mb], amps[k | ma], amps[k | ma | mb];
        rho += psi * psi.adjoint();
    }
    return rho;
}

}  // namespace mie

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

#include "mie/shadows.hpp"

#include <cmath>

#include "mie/errors.hpp"

namespace mie {

char pauli_char(Pauli p) {
    return "XYZ"[static_cast<int>(p)];
}

Pauli parse_pauli(char c) {
    switch (c) {
        case 'X':
            return Pauli::X;
        case 'Y':
            return Pauli::Y;
        case 'Z':
            return Pauli::Z;
        default:
            throw UnknownSymbol(std::string("unknown Pauli basis '") + c + "'");
    }
}

void MeasurementRecord::validate(int expected_env) const {
    if (expected_env >= 0 && env_outcomes.size() != static_cast<size_t>(expected_env)) {
        throw ShapeMismatch("record has " + std::to_string(env_outcomes.size()) + " environment outcomes, expected " +
                            std::to_string(expected_env));
    }
    for (int8_t v : env_outcomes) {
        if (v != 1 && v != -1) {
            throw UnknownSymbol("environment outcome " + std::to_string(v) + " is not ±1");
        }
    }
    if ((outcome_a != 1 && outcome_a != -1) || (outcome_b != 1 && outcome_b != -1)) {
        throw UnknownSymbol("probe outcome is not ±1");
    }
}

std::pair<Pauli, Pauli> draw_bases(Rng &rng) {
    std::uniform_int_distribution<int> pick(0, 2);
    Pauli a = static_cast<Pauli>(pick(rng));
    Pauli b = static_cast<Pauli>(pick(rng));
    return {a, b};
}

Mat2 basis_rotation(Pauli basis) {
    const cd i{0.0, 1.0};
    Mat2 h;
    h << M_SQRT1_2, M_SQRT1_2, M_SQRT1_2, -M_SQRT1_2;
    switch (basis) {
        case Pauli::X:
            return h;
        case Pauli::Y: {
            Mat2 s_dag;
            s_dag << 1.0, 0.0, 0.0, -i;
            return h * s_dag;
        }
        case Pauli::Z:
            break;
    }
    return Mat2::Identity();
}

namespace {

MeasurementRecord decode_index(uint64_t index, const std::vector<int> &env, int a, int b, Pauli basis_a,
                               Pauli basis_b) {
    MeasurementRecord rec;
    rec.env_outcomes.resize(env.size());
    for (size_t k = 0; k < env.size(); k++) {
        rec.env_outcomes[k] = ((index >> env[k]) & 1) ? -1 : 1;
    }
    rec.basis_a = basis_a;
    rec.basis_b = basis_b;
    rec.outcome_a = ((index >> a) & 1) ? -1 : 1;
    rec.outcome_b = ((index >> b) & 1) ? -1 : 1;
    return rec;
}

Statevector rotated_copy(const Statevector &state, int a, int b, Pauli basis_a, Pauli basis_b) {
    Statevector rotated = state;
    apply_single_qubit(rotated, a, basis_rotation(basis_a));
    apply_single_qubit(rotated, b, basis_rotation(basis_b));
    return rotated;
}

}  // namespace

MeasurementRecord make_record(const Statevector &state, int a, int b, Rng &rng) {
    auto [basis_a, basis_b] = draw_bases(rng);
    Statevector rotated = rotated_copy(state, a, b, basis_a, basis_b);
    uint64_t index = sample_all_qubits(rotated, rng);
    return decode_index(index, environment_qubits(state.num_qubits(), a, b), a, b, basis_a, basis_b);
}

RecordSampler::RecordSampler(const Statevector &state, int a, int b)
    : a_(a), b_(b), env_(environment_qubits(state.num_qubits(), a, b)) {
    samplers_.reserve(9);
    for (int pa = 0; pa < 3; pa++) {
        for (int pb = 0; pb < 3; pb++) {
            samplers_.emplace_back(rotated_copy(state, a, b, static_cast<Pauli>(pa), static_cast<Pauli>(pb)));
        }
    }
}

MeasurementRecord RecordSampler::sample(Rng &rng) const {
    auto [basis_a, basis_b] = draw_bases(rng);
    return sample_with_bases(basis_a, basis_b, rng);
}

MeasurementRecord RecordSampler::sample_with_bases(Pauli basis_a, Pauli basis_b, Rng &rng) const {
    const auto &sampler = samplers_[3 * static_cast<int>(basis_a) + static_cast<int>(basis_b)];
    return decode(sampler.sample(rng), basis_a, basis_b);
}

MeasurementRecord RecordSampler::decode(uint64_t index, Pauli basis_a, Pauli basis_b) const {
    return decode_index(index, env_, a_, b_, basis_a, basis_b);
}

MeasurementRecord sample_conditional(const Mat4 &sigma_ab, Rng &rng) {
    auto [basis_a, basis_b] = draw_bases(rng);
    Mat4 v = kron(basis_rotation(basis_a), basis_rotation(basis_b));
    Mat4 rotated = v * sigma_ab * v.adjoint();
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    double target = uniform(rng);
    int k = 0;
    double acc = 0.0;
    for (; k < 3; k++) {
        acc += rotated(k, k).real();
        if (target < acc) {
            break;
        }
    }
    MeasurementRecord rec;
    rec.basis_a = basis_a;
    rec.basis_b = basis_b;
    rec.outcome_a = (k >> 1) ? -1 : 1;
    rec.outcome_b = (k & 1) ? -1 : 1;
    return rec;
}

Mat2 observed_projector(Pauli basis, int8_t outcome) {
    // (I ± P)/2 in closed form: every entry is a dyadic rational, so
    // snapshots have trace exactly 1.
    const double h = outcome == 1 ? 0.5 : -0.5;
    Mat2 m = 0.5 * Mat2::Identity();
    switch (basis) {
        case Pauli::X:
            m(0, 1) = m(1, 0) = h;
            break;
        case Pauli::Y:
            m(0, 1) = cd(0.0, -h);
            m(1, 0) = cd(0.0, h);
            break;
        case Pauli::Z:
            m(0, 0) += h;
            m(1, 1) -= h;
            break;
    }
    return m;
}

ShadowSnapshot snapshot(const MeasurementRecord &record) {
    Mat2 fa = 3.0 * observed_projector(record.basis_a, record.outcome_a) - Mat2::Identity();
    Mat2 fb = 3.0 * observed_projector(record.basis_b, record.outcome_b) - Mat2::Identity();
    return ShadowSnapshot{kron(fa, fb)};
}

Mat4 raw_snapshot(const MeasurementRecord &record) {
    return kron(observed_projector(record.basis_a, record.outcome_a),
                observed_projector(record.basis_b, record.outcome_b));
}

Mat4 omega_operator(const Mat4 &sigma_ab) {
    const Mat2 id = Mat2::Identity();
    return sigma_ab + kron(partial_trace_b(sigma_ab), id) + kron(id, partial_trace_a(sigma_ab)) + Mat4::Identity();
}

Mat4 raw_snapshot_expectation(const Mat4 &sigma_ab) {
    return omega_operator(sigma_ab) / 9.0;
}

OmegaFlatness omega_flatness_check(const Vec4 &pure_state) {
    Vec4 psi = pure_state / pure_state.norm();
    Mat2 coeffs;
    coeffs << psi(0), psi(1), psi(2), psi(3);
    Eigen::JacobiSVD<Mat2> svd(coeffs, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // coeffs = U diag(s) V†, so |ψ⟩ = Σ_k s_k |u_k⟩ ⊗ |conj(v_k)⟩.
    const auto &s = svd.singularValues();
    Mat4 omega = omega_operator(psi * psi.adjoint());
    Vec4 applied = omega * psi;
    Vec4 predicted = Vec4::Zero();

    OmegaFlatness out;
    for (int k = 0; k < 2; k++) {
        double lambda = s(k) * s(k);
        Vec2 u = svd.matrixU().col(k);
        Vec2 w = svd.matrixV().col(k).conjugate();
        for (int a = 0; a < 2; a++) {
            for (int b = 0; b < 2; b++) {
                predicted(2 * a + b) += s(k) * (2.0 + 2.0 * lambda) * u(a) * w(b);
            }
        }
        if (lambda > 1e-12) {
            out.schmidt.push_back(lambda);
            out.coefficients.push_back(2.0 + 2.0 * lambda);
        }
    }
    out.formula_error = (applied - predicted).cwiseAbs().maxCoeff();
    out.is_eigenvector = true;
    for (double c : out.coefficients) {
        if (std::abs(c - out.coefficients.front()) > 1e-10) {
            out.is_eigenvector = false;
        }
    }
    return out;
}

}  // namespace mie

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

#include <array>
#include <optional>
#include <vector>

#include "mie/linalg.hpp"
#include "mie/quantum_sim.hpp"
#include "mie/rng.hpp"

namespace mie {

enum class Pauli : uint8_t { X = 0, Y = 1, Z = 2 };

char pauli_char(Pauli p);
Pauli parse_pauli(char c);

/// One experimental shot: environment outcomes plus the two probe qubits'
/// measurement bases and outcomes. Outcomes are ±1, bit b mapping to (−1)^b.
struct MeasurementRecord {
    std::vector<int8_t> env_outcomes;
    Pauli basis_a = Pauli::Z;
    Pauli basis_b = Pauli::Z;
    int8_t outcome_a = 1;
    int8_t outcome_b = 1;

    /// Throws ShapeMismatch/UnknownSymbol. Pass expected_env < 0 to skip the
    /// length check.
    void validate(int expected_env = -1) const;
};

struct ShadowSnapshot {
    Mat4 matrix;
};

std::pair<Pauli, Pauli> draw_bases(Rng &rng);

/// V with V P V† = Z: V(Z) = I, V(X) = H, V(Y) = H·S†.
Mat2 basis_rotation(Pauli basis);

/// Single preparation: random bases, rotation of the probes, full sample.
MeasurementRecord make_record(const Statevector &state, int a, int b, Rng &rng);

/// Same distribution and random-stream consumption as make_record, with the
/// nine rotated states' samplers built once.
class RecordSampler {
   public:
    RecordSampler(const Statevector &state, int a, int b);
    MeasurementRecord sample(Rng &rng) const;
    /// Record with the bases fixed instead of drawn.
    MeasurementRecord sample_with_bases(Pauli basis_a, Pauli basis_b, Rng &rng) const;

   private:
    MeasurementRecord decode(uint64_t index, Pauli basis_a, Pauli basis_b) const;
    int a_;
    int b_;
    std::vector<int> env_;
    std::vector<OutcomeSampler> samplers_;  // indexed 3*basis_a + basis_b
};

/// Probe-only record drawn from a known two-qubit state, with no
/// environment; used to test the estimators conditionally on an outcome.
MeasurementRecord sample_conditional(const Mat4 &sigma_ab, Rng &rng);

/// |φ⟩⟨φ| for the observed eigenstate |φ⟩ = V†|b⟩.
Mat2 observed_projector(Pauli basis, int8_t outcome);

/// (3P_A − I) ⊗ (3P_B − I).
ShadowSnapshot snapshot(const MeasurementRecord &record);

/// P_A ⊗ P_B, the un-inverted rank-1 projector.
Mat4 raw_snapshot(const MeasurementRecord &record);

/// σ_AB + σ_A⊗I + I⊗σ_B + I⊗I.
Mat4 omega_operator(const Mat4 &sigma_ab);

/// E_s of the raw snapshot, Ω/9.
Mat4 raw_snapshot_expectation(const Mat4 &sigma_ab);

struct OmegaFlatness {
    bool is_eigenvector = false;
    /// 2 + 2λ_k for each Schmidt coefficient λ_k > 1e−12, descending λ.
    std::vector<double> coefficients;
    std::vector<double> schmidt;
    /// max |Ω|ψ⟩ − Σ_k √λ_k (2+2λ_k)|k⟩|k⟩| entrywise.
    double formula_error = 0.0;
};

OmegaFlatness omega_flatness_check(const Vec4 &pure_state);

}  // namespace mie

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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mie/linalg.hpp"
#include "mie/nn_core.hpp"
#include "mie/quantum_sim.hpp"
#include "mie/shadows.hpp"

namespace mie {

// All entropies are in nats.

/// −Σ λ log λ. Throws NotPSD if an eigenvalue is below −1e−8 (or the trace
/// is off by more than 1e−8).
double von_neumann_entropy(const Mat2 &rho);
double von_neumann_entropy(const Mat4 &rho);

/// log of a positive-definite Hermitian matrix via its eigenbasis.
Mat4 hermitian_log(const Mat4 &rho);

/// Eigenvalues of an estimator below this floor signal corrupted output.
inline constexpr double kDefaultEigenFloor = 1e-4 / 8.0;

/// −Re Tr(σˢ log ρ); individual values can be negative. Throws
/// InvariantViolation if min eig(ρ) < min_eigenvalue.
double shadow_classical_entropy(const ShadowSnapshot &snap, const DensityMatrix &rho,
                                double min_eigenvalue = kDefaultEigenFloor);

/// −Re Tr(σ log ρ). Throws SingularEstimator if min eig(ρ) < 1e−14.
double qc_entropy(const Mat2 &sigma, const Mat2 &rho);
double qc_entropy(const Mat4 &sigma, const Mat4 &rho);

struct BoundsCheck {
    double s_a = 0.0;
    double upper = 0.0;
    double lower = 0.0;
    bool holds = false;
};

/// S_A against the interval [S^QC_A − S^QC_AB, S^QC_A].
BoundsCheck bounds_check(const Mat4 &sigma_ab, const Mat4 &rho_ab);

struct EvalReport {
    double delta_mean = 0.0;
    double delta_stderr = 0.0;
    size_t num_eval_records = 0;
    /// Mean S(ρ_AB) of the 4×4 outputs.
    double mean_output_entropy = 0.0;
    /// Mean S(Tr_B ρ_AB), the reduced single-qubit reading of the same statistic.
    double mean_output_entropy_a = 0.0;
    double depth = 0.0;
    uint64_t seed = 0;
    std::string circuit_id;
};

/// Maps environment outcomes (±1, ascending qubit order) to an estimate.
using Estimator = std::function<DensityMatrix(std::span<const int8_t> env_outcomes)>;

EvalReport estimate_delta(const Model &model, std::span<const MeasurementRecord> records);
EvalReport estimate_delta(const Estimator &estimator, std::span<const MeasurementRecord> records);

/// Σ_m p_m S^QC_AB,m over every environment outcome. Throws SystemTooLarge.
double exact_delta(const Model &model, const Statevector &state, int a, int b, int cap = kDefaultEnumerationCap);
double exact_delta(const Estimator &estimator, const Statevector &state, int a, int b,
                   int cap = kDefaultEnumerationCap);

/// Σ_m p_m S(Tr_B σ_AB,m). Throws SystemTooLarge.
double exact_mie(const Statevector &state, int a, int b, int cap = kDefaultEnumerationCap);

struct ExactBounds {
    double mie = 0.0;
    double delta = 0.0;
    double upper = 0.0;
    double lower = 0.0;
    bool all_hold = true;
    size_t num_outcomes = 0;
};

/// Outcome-averaged MIE, Δ and bound triple for a model.
ExactBounds exact_bounds(const Model &model, const Statevector &state, int a, int b,
                         int cap = kDefaultEnumerationCap);

/// ±1 outcomes for environment bits (bit 1 → −1).
std::vector<int8_t> outcomes_from_bits(const EnvOutcome &bits);
EnvOutcome bits_from_outcomes(std::span<const int8_t> outcomes);

/// Estimator returning the exact conditional state mixed with ε·I/4.
Estimator oracle_estimator(const Statevector &state, int a, int b, double epsilon);

}  // namespace mie

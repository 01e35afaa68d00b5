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
#include "mie/rng.hpp"

namespace mie {

/// Memory guard on dense statevectors.
inline constexpr int kMaxStatevectorQubits = 26;
/// Default cap for exact enumeration over environment outcomes.
inline constexpr int kDefaultEnumerationCap = 16;

enum class Geometry { AllToAll1D, Square2D };

std::string geometry_name(Geometry g);
Geometry parse_geometry(const std::string &name);

struct CircuitSpec {
    int num_qubits = 0;
    Geometry geometry = Geometry::AllToAll1D;
    // Lattice shape for Square2D; sites are flattened row-major.
    int rows = 0;
    int cols = 0;
    double depth = 0.0;
    int probe_a = 0;
    int probe_b = 0;
    uint64_t seed = 0;

    /// round(L · t).
    size_t gate_count() const;
    /// Throws InvalidCircuit.
    void validate() const;
};

/// All-to-all circuit with the probes at qubits 0 and L−1.
CircuitSpec make_all_to_all_spec(int num_qubits, double depth, uint64_t seed);
/// Periodic square lattice with probes at (0,0) and (⌊R/2⌋,⌊C/2⌋).
CircuitSpec make_square_spec(int rows, int cols, double depth, uint64_t seed);

struct Gate {
    int q0 = 0;
    int q1 = 0;
    // Acts on the local index 2*bit(q0) + bit(q1).
    Mat4 unitary;
};

using GateSequence = std::vector<Gate>;

/// Dense pure state; qubit k is bit k of the basis-state index.
class Statevector {
   public:
    /// |0…0⟩.
    explicit Statevector(int num_qubits);
    static Statevector from_amplitudes(std::vector<cd> amplitudes);

    int num_qubits() const { return num_qubits_; }
    size_t dimension() const { return amps_.size(); }
    std::span<const cd> amplitudes() const { return amps_; }
    std::span<cd> amplitudes() { return amps_; }
    double norm() const;

   private:
    Statevector(int num_qubits, std::vector<cd> amps) : num_qubits_(num_qubits), amps_(std::move(amps)) {}
    int num_qubits_;
    std::vector<cd> amps_;
};

/// Environment bits, one per non-probe qubit in ascending qubit order.
using EnvOutcome = std::vector<uint8_t>;

struct OracleState {
    Mat4 sigma_ab;
    double probability = 0.0;
    EnvOutcome m_env;
};

Mat4 haar_two_qubit_gate(Rng &rng);
GateSequence build_circuit(const CircuitSpec &spec, Rng &rng);

void apply_gate(Statevector &state, int q0, int q1, const Mat4 &u);
void apply_single_qubit(Statevector &state, int qubit, const Mat2 &u);
void apply_circuit(Statevector &state, const GateSequence &gates);

/// Builds the circuit from spec.seed and runs it on |0…0⟩.
Statevector prepare_state(const CircuitSpec &spec);

/// Repeated Born-rule sampling from a fixed state. Each draw stands for a
/// fresh preparation followed by a computational-basis measurement of all
/// qubits; the result is the measured basis-state index.
class OutcomeSampler {
   public:
    explicit OutcomeSampler(const Statevector &state);
    uint64_t sample(Rng &rng) const;

   private:
    std::vector<double> cumulative_;
    uint64_t last_nonzero_ = 0;
};

uint64_t sample_all_qubits(const Statevector &state, Rng &rng);

/// Non-probe qubits in ascending order.
std::vector<int> environment_qubits(int num_qubits, int a, int b);

/// Basis-state index of (env bits, bit a, bit b).
uint64_t compose_index(const std::vector<int> &env_qubits, const EnvOutcome &m_env, int a, int bit_a, int b,
                       int bit_b);

/// Throws ZeroProbabilityOutcome when p_m < 1e−14.
OracleState project_environment(const Statevector &state, const EnvOutcome &m_env, int a, int b);

/// Visits every environment outcome with p_m ≥ 1e−14. Throws SystemTooLarge
/// when the state has more than `cap` qubits.
void for_each_outcome(const Statevector &state, int a, int b, const std::function<void(const OracleState &)> &visit,
                      int cap = kDefaultEnumerationCap);

std::vector<OracleState> enumerate_outcomes(const Statevector &state, int a, int b,
                                            int cap = kDefaultEnumerationCap);

/// Tr_env |ψ⟩⟨ψ| on (a, b), a the significant factor.
Mat4 reduced_density_matrix(const Statevector &state, int a, int b);

}  // namespace mie

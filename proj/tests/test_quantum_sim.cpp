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

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "mie/errors.hpp"
#include "test_util.hpp"

using namespace mie;
using mie::test_util::max_diff;

namespace {

Statevector basis_state(int num_qubits, uint64_t index) {
    std::vector<cd> amps(size_t{1} << num_qubits);
    amps[index] = 1.0;
    return Statevector::from_amplitudes(std::move(amps));
}

Statevector ghz3() {
    std::vector<cd> amps(8);
    amps[0] = amps[7] = 1.0 / std::sqrt(2.0);
    return Statevector::from_amplitudes(std::move(amps));
}

/// Dense 2^L matrix of a two-qubit gate, built entry by entry.
Eigen::MatrixXcd embed_dense(int num_qubits, int q0, int q1, const Mat4 &u) {
    const int dim = 1 << num_qubits;
    Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(dim, dim);
    for (int col = 0; col < dim; col++) {
        int in_local = 2 * ((col >> q0) & 1) + ((col >> q1) & 1);
        for (int out_local = 0; out_local < 4; out_local++) {
            int row = col & ~(1 << q0) & ~(1 << q1);
            row |= ((out_local >> 1) & 1) << q0;
            row |= (out_local & 1) << q1;
            full(row, col) += u(out_local, in_local);
        }
    }
    return full;
}

}  // namespace

TEST(haar, unitary_and_deterministic) {
    Rng rng(123);
    for (int k = 0; k < 200; k++) {
        Mat4 u = haar_two_qubit_gate(rng);
        ASSERT_LE(unitarity_error(u), 1e-12);
    }
    Rng a(77), b(77);
    ASSERT_EQ(max_abs(haar_two_qubit_gate(a) - haar_two_qubit_gate(b)), 0.0);
}

TEST(haar, moments) {
    // Haar moments on U(4): E|U_00|^2 = 1/4, E|U_00|^4 = 2/(d(d+1)) = 1/10,
    // E|Tr U|^2 = 1. The last one fails without the QR phase correction.
    Rng rng(2024);
    const int n = 20000;
    double m2 = 0, m4 = 0, tr2 = 0, tr2_sq = 0;
    cd first = 0;
    for (int k = 0; k < n; k++) {
        Mat4 u = haar_two_qubit_gate(rng);
        double p = std::norm(u(0, 0));
        m2 += p;
        m4 += p * p;
        double t = std::norm(u.trace());
        tr2 += t;
        tr2_sq += t * t;
        first += u(1, 2);
    }
    m2 /= n;
    m4 /= n;
    tr2 /= n;
    // Var|U00|^2 = 1/10 − 1/16.
    EXPECT_NEAR(m2, 0.25, 4 * std::sqrt((0.1 - 0.0625) / n));
    EXPECT_NEAR(m4, 0.1, 0.006);
    double tr_sd = std::sqrt(tr2_sq / n - tr2 * tr2);
    EXPECT_NEAR(tr2, 1.0, 4 * tr_sd / std::sqrt(n));
    EXPECT_LT(std::abs(first / double(n)), 4 * 0.5 / std::sqrt(n));
}

TEST(circuit, gate_counts) {
    Rng rng(1);
    EXPECT_EQ(build_circuit(make_all_to_all_spec(20, 1.0, 0), rng).size(), 20u);
    EXPECT_EQ(build_circuit(make_all_to_all_spec(20, 0.0, 0), rng).size(), 0u);
    EXPECT_EQ(build_circuit(make_all_to_all_spec(12, 0.25, 0), rng).size(), 3u);
    EXPECT_EQ(make_all_to_all_spec(10, 1.25, 0).gate_count(), 13u);  // 12.5 rounds away from zero
    auto sq = make_square_spec(5, 5, 6.4, 0);
    EXPECT_EQ(sq.num_qubits, 25);
    EXPECT_EQ(sq.gate_count(), 160u);
}

TEST(circuit, square_gates_on_periodic_edges) {
    Rng rng(5);
    auto spec = make_square_spec(5, 5, 6.4, 3);
    auto gates = build_circuit(spec, rng);
    ASSERT_EQ(gates.size(), 160u);
    std::set<std::pair<int, int>> seen;
    for (const auto &g : gates) {
        int r0 = g.q0 / 5, c0 = g.q0 % 5, r1 = g.q1 / 5, c1 = g.q1 % 5;
        int dr = std::min((r0 - r1 + 5) % 5, (r1 - r0 + 5) % 5);
        int dc = std::min((c0 - c1 + 5) % 5, (c1 - c0 + 5) % 5);
        ASSERT_EQ(dr + dc, 1) << g.q0 << "-" << g.q1;
        seen.insert({std::min(g.q0, g.q1), std::max(g.q0, g.q1)});
    }
    // 160 draws over 50 edges should reach nearly all of them.
    EXPECT_GE(seen.size(), 45u);
    EXPECT_EQ(spec.probe_a, 0);
    EXPECT_EQ(spec.probe_b, 2 * 5 + 2);
}

TEST(circuit, all_to_all_pairs_uniform) {
    Rng rng(9);
    auto spec = make_all_to_all_spec(4, 3000.0, 0);
    auto gates = build_circuit(spec, rng);
    std::map<std::pair<int, int>, int> counts;
    for (const auto &g : gates) {
        ASSERT_NE(g.q0, g.q1);
        counts[{std::min(g.q0, g.q1), std::max(g.q0, g.q1)}]++;
    }
    ASSERT_EQ(counts.size(), 6u);
    const double n = 12000.0, p = 1.0 / 6.0;
    for (const auto &[pair, c] : counts) {
        EXPECT_NEAR(c / n, p, 4 * std::sqrt(p * (1 - p) / n));
    }
}

TEST(circuit, validation) {
    EXPECT_THROW(make_all_to_all_spec(2, 1.0, 0).validate(), InvalidCircuit);
    auto bad = make_all_to_all_spec(6, 1.0, 0);
    bad.probe_b = bad.probe_a;
    EXPECT_THROW(bad.validate(), InvalidCircuit);
    bad = make_all_to_all_spec(6, 1.0, 0);
    bad.probe_b = 6;
    EXPECT_THROW(bad.validate(), InvalidCircuit);
    auto sq = make_square_spec(3, 3, 1.0, 0);
    sq.num_qubits = 10;
    EXPECT_THROW(sq.validate(), InvalidCircuit);
    auto neg = make_all_to_all_spec(6, -1.0, 0);
    EXPECT_THROW(neg.validate(), InvalidCircuit);
    EXPECT_THROW(Statevector(kMaxStatevectorQubits + 1), SystemTooLarge);
}

TEST(apply_gate, identity_swap_and_norm) {
    Rng rng(3);
    Statevector s = test_util::random_statevector(5, rng);
    Statevector t = s;
    apply_gate(t, 1, 3, Mat4::Identity());
    EXPECT_EQ(max_diff(s.amplitudes(), t.amplitudes()), 0.0);

    Mat4 swap = Mat4::Zero();
    swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
    // |01⟩ read as qubit1=0, qubit0=1: index 1. SWAP gives index 2.
    Statevector b = basis_state(2, 1);
    apply_gate(b, 0, 1, swap);
    EXPECT_EQ(std::abs(b.amplitudes()[2] - 1.0), 0.0);

    for (int k = 0; k < 20; k++) {
        apply_gate(s, k % 5, (k + 2) % 5, haar_two_qubit_gate(rng));
    }
    EXPECT_NEAR(s.norm(), 1.0, 1e-10);
}

TEST(apply_gate, matches_dense_embedding) {
    Rng rng(11);
    for (auto [q0, q1] : std::vector<std::pair<int, int>>{{0, 1}, {1, 0}, {0, 3}, {3, 1}, {2, 0}}) {
        Statevector s = test_util::random_statevector(4, rng);
        Mat4 u = haar_two_qubit_gate(rng);
        Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(s.amplitudes().data(), 16);
        Eigen::VectorXcd expected = embed_dense(4, q0, q1, u) * v;
        apply_gate(s, q0, q1, u);
        EXPECT_LE(max_diff(s.amplitudes(), std::span<const cd>(expected.data(), 16)), 1e-13);
    }
}

TEST(apply_gate, disjoint_gates_commute) {
    Rng rng(12);
    Statevector s = test_util::random_statevector(6, rng);
    Mat4 u = haar_two_qubit_gate(rng), v = haar_two_qubit_gate(rng);
    Statevector x = s, y = s;
    apply_gate(x, 0, 4, u);
    apply_gate(x, 2, 5, v);
    apply_gate(y, 2, 5, v);
    apply_gate(y, 0, 4, u);
    EXPECT_LE(max_diff(x.amplitudes(), y.amplitudes()), 1e-12);
}

TEST(apply_single_qubit, examples) {
    const double r = 1.0 / std::sqrt(2.0);
    Mat2 h;
    h << r, r, r, -r;
    Statevector s(1);
    apply_single_qubit(s, 0, h);
    EXPECT_NEAR(std::abs(s.amplitudes()[0] - r), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s.amplitudes()[1] - r), 0.0, 1e-15);

    Mat2 z;
    z << 1, 0, 0, -1;
    Statevector one = basis_state(1, 1);
    apply_single_qubit(one, 0, z);
    EXPECT_EQ(one.amplitudes()[1], cd(-1.0));

    Rng rng(4);
    Statevector w = test_util::random_statevector(4, rng);
    Mat2 rot;
    double th = 0.7;
    rot << std::cos(th), cd(0, -std::sin(th)), cd(0, -std::sin(th)), std::cos(th);
    apply_single_qubit(w, 3, rot);
    EXPECT_NEAR(w.norm(), 1.0, 1e-10);
}

TEST(circuit, deep_norm_preserved_and_reproducible) {
    auto spec = make_all_to_all_spec(10, 8.0, 42);
    Statevector a = prepare_state(spec), b = prepare_state(spec);
    EXPECT_NEAR(a.norm(), 1.0, 1e-9);
    EXPECT_EQ(max_diff(a.amplitudes(), b.amplitudes()), 0.0);
    Rng rng(42);
    Statevector c(10);
    apply_circuit(c, build_circuit(spec, rng));
    EXPECT_EQ(max_diff(a.amplitudes(), c.amplitudes()), 0.0);
}

TEST(sampling, product_and_bell) {
    Rng rng(5);
    Statevector zero(6);
    for (int k = 0; k < 100; k++) {
        ASSERT_EQ(sample_all_qubits(zero, rng), 0u);
    }
    std::vector<cd> amps(4);
    amps[0] = amps[3] = 1.0 / std::sqrt(2.0);
    Statevector bell = Statevector::from_amplitudes(amps);
    OutcomeSampler sampler(bell);
    int zeros = 0;
    const int n = 10000;
    for (int k = 0; k < n; k++) {
        uint64_t x = sampler.sample(rng);
        ASSERT_TRUE(x == 0 || x == 3);
        zeros += x == 0;
    }
    EXPECT_NEAR(zeros / double(n), 0.5, 0.02);

    Rng r1(8), r2(8);
    for (int k = 0; k < 50; k++) {
        ASSERT_EQ(sampler.sample(r1), sampler.sample(r2));
    }
}

TEST(sampling, frequencies_match_enumeration) {
    auto spec = make_all_to_all_spec(5, 3.0, 17);
    Statevector s = prepare_state(spec);
    auto outcomes = enumerate_outcomes(s, spec.probe_a, spec.probe_b);
    auto env = environment_qubits(5, spec.probe_a, spec.probe_b);
    Rng rng(99);
    const int n = 40000;
    std::map<EnvOutcome, int> counts;
    OutcomeSampler sampler(s);
    for (int k = 0; k < n; k++) {
        uint64_t x = sampler.sample(rng);
        EnvOutcome m;
        for (int q : env) {
            m.push_back((x >> q) & 1);
        }
        counts[m]++;
    }
    for (const auto &o : outcomes) {
        if (o.probability < 0.01) {
            continue;
        }
        double f = counts[o.m_env] / double(n);
        EXPECT_NEAR(f, o.probability, 4 * std::sqrt(o.probability * (1 - o.probability) / n));
    }
}

TEST(project_environment, ghz_collapse) {
    Statevector g = ghz3();
    OracleState o = project_environment(g, {0}, 0, 2);
    EXPECT_NEAR(o.probability, 0.5, 1e-15);
    Mat4 expected = Mat4::Zero();
    expected(0, 0) = 1.0;
    EXPECT_LE(max_abs(o.sigma_ab - expected), 1e-15);
    EXPECT_THROW(project_environment(Statevector(3), {1}, 0, 2), ZeroProbabilityOutcome);
    EXPECT_THROW(project_environment(g, {0, 1}, 0, 2), ShapeMismatch);
}

TEST(project_environment, bell_from_entangled_environment) {
    // A = qubit 2 (significant), B = qubit 1, environment = qubit 0.
    // (|00⟩|0⟩ + |11⟩|0⟩ + |01⟩|1⟩ + |10⟩|1⟩)/2.
    std::vector<cd> amps(8);
    auto idx = [](int a, int b, int e) { return (a << 2) | (b << 1) | e; };
    amps[idx(0, 0, 0)] = amps[idx(1, 1, 0)] = amps[idx(0, 1, 1)] = amps[idx(1, 0, 1)] = 0.5;
    Statevector s = Statevector::from_amplitudes(amps);
    OracleState o = project_environment(s, {0}, 2, 1);
    EXPECT_NEAR(o.probability, 0.5, 1e-15);
    Mat4 bell = Mat4::Zero();
    bell(0, 0) = bell(0, 3) = bell(3, 0) = bell(3, 3) = 0.5;
    EXPECT_LE(max_abs(o.sigma_ab - bell), 1e-15);
}

TEST(project_environment, random_state_is_pure_psd) {
    auto spec = make_all_to_all_spec(10, 4.0, 3);
    Statevector s = prepare_state(spec);
    Rng rng(1);
    auto env = environment_qubits(10, spec.probe_a, spec.probe_b);
    for (int k = 0; k < 20; k++) {
        uint64_t x = sample_all_qubits(s, rng);
        EnvOutcome m;
        for (int q : env) {
            m.push_back((x >> q) & 1);
        }
        OracleState o = project_environment(s, m, spec.probe_a, spec.probe_b);
        EXPECT_LE(hermiticity_error(o.sigma_ab), 1e-12);
        EXPECT_NEAR(o.sigma_ab.trace().real(), 1.0, 1e-10);
        auto eig = hermitian_eigen(o.sigma_ab);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
        EXPECT_GE(eig.eigenvalues().maxCoeff(), 1.0 - 1e-8);
    }
}

TEST(enumerate_outcomes, examples_and_completeness) {
    auto ghz = enumerate_outcomes(ghz3(), 0, 2);
    ASSERT_EQ(ghz.size(), 2u);
    EXPECT_NEAR(ghz[0].probability, 0.5, 1e-15);
    EXPECT_NEAR(ghz[1].probability, 0.5, 1e-15);

    auto prod = enumerate_outcomes(Statevector(6), 0, 5);
    ASSERT_EQ(prod.size(), 1u);
    EXPECT_NEAR(prod[0].probability, 1.0, 1e-15);
    EXPECT_EQ(prod[0].m_env, EnvOutcome(4, 0));

    Rng rng(21);
    Statevector s = test_util::random_statevector(9, rng);
    double total = 0.0;
    Mat4 mix = Mat4::Zero();
    for (const auto &o : enumerate_outcomes(s, 3, 7)) {
        total += o.probability;
        mix += o.probability * o.sigma_ab;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_LE(max_abs(mix - reduced_density_matrix(s, 3, 7)), 1e-9);
}

TEST(enumerate_outcomes, reduced_matrix_oracle) {
    // Independent partial trace: ρ_{(a b),(a' b')} = Σ_e ψ(a,b,e) ψ*(a',b',e).
    Rng rng(31);
    Statevector s = test_util::random_statevector(4, rng);
    const int a = 1, b = 3;
    Mat4 rho = Mat4::Zero();
    auto amps = s.amplitudes();
    for (uint64_t x = 0; x < 16; x++) {
        for (uint64_t y = 0; y < 16; y++) {
            uint64_t mask = (1u << a) | (1u << b);
            if ((x & ~mask) != (y & ~mask)) {
                continue;
            }
            int i = 2 * ((x >> a) & 1) + ((x >> b) & 1);
            int j = 2 * ((y >> a) & 1) + ((y >> b) & 1);
            rho(i, j) += amps[x] * std::conj(amps[y]);
        }
    }
    EXPECT_LE(max_abs(rho - reduced_density_matrix(s, a, b)), 1e-14);
}

TEST(enumerate_outcomes, cap) {
    EXPECT_THROW(enumerate_outcomes(Statevector(8), 0, 7, 6), SystemTooLarge);
}

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

#include <gtest/gtest.h>

#include "mie/errors.hpp"
#include "test_util.hpp"

using namespace mie;

namespace {

Mat2 pauli_matrix(Pauli p) {
    Mat2 m;
    switch (p) {
        case Pauli::X:
            m << 0, 1, 1, 0;
            break;
        case Pauli::Y:
            m << 0, cd(0, -1), cd(0, 1), 0;
            break;
        case Pauli::Z:
            m << 1, 0, 0, -1;
            break;
    }
    return m;
}

MeasurementRecord probe_record(Pauli ba, Pauli bb, int oa, int ob) {
    MeasurementRecord r;
    r.basis_a = ba;
    r.basis_b = bb;
    r.outcome_a = static_cast<int8_t>(oa);
    r.outcome_b = static_cast<int8_t>(ob);
    return r;
}

/// Conditional states of a fixed L=8 circuit for a few sampled outcomes.
std::vector<OracleState> sample_oracles(int count, uint64_t seed) {
    auto spec = make_all_to_all_spec(8, 3.0, seed);
    Statevector s = prepare_state(spec);
    auto env = environment_qubits(8, spec.probe_a, spec.probe_b);
    Rng rng(seed + 1);
    std::vector<OracleState> out;
    for (int k = 0; k < count; k++) {
        uint64_t x = sample_all_qubits(s, rng);
        EnvOutcome m;
        for (int q : env) {
            m.push_back((x >> q) & 1);
        }
        out.push_back(project_environment(s, m, spec.probe_a, spec.probe_b));
    }
    return out;
}

}  // namespace

TEST(draw_bases, uniform_independent_reproducible) {
    Rng rng(1);
    const int n = 90000;
    int joint[3][3] = {};
    int ma[3] = {}, mb[3] = {};
    for (int k = 0; k < n; k++) {
        auto [a, b] = draw_bases(rng);
        joint[int(a)][int(b)]++;
        ma[int(a)]++;
        mb[int(b)]++;
    }
    for (int i = 0; i < 3; i++) {
        for (int j = 0; j < 3; j++) {
            EXPECT_NEAR(joint[i][j] / double(n), 1.0 / 9.0, 0.005);
            EXPECT_NEAR(joint[i][j] / double(n), (ma[i] / double(n)) * (mb[j] / double(n)), 0.005);
        }
    }
    Rng r1(5), r2(5);
    for (int k = 0; k < 20; k++) {
        ASSERT_EQ(draw_bases(r1), draw_bases(r2));
    }
}

TEST(basis_rotation, conjugates_to_z) {
    Mat2 z = pauli_matrix(Pauli::Z);
    for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) {
        Mat2 v = basis_rotation(p);
        EXPECT_LE(max_abs(v * pauli_matrix(p) * v.adjoint() - z), 1e-15) << pauli_char(p);
        EXPECT_LE(unitarity_error(v), 1e-15);
    }
    EXPECT_EQ(max_abs(basis_rotation(Pauli::Z) - Mat2::Identity()), 0.0);
}

TEST(pauli, parse) {
    EXPECT_EQ(parse_pauli('X'), Pauli::X);
    EXPECT_EQ(parse_pauli('Y'), Pauli::Y);
    EXPECT_EQ(parse_pauli('Z'), Pauli::Z);
    EXPECT_THROW(parse_pauli('W'), UnknownSymbol);
}

TEST(observed_projector, is_eigenprojector_of_pauli) {
    for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) {
        for (int o : {1, -1}) {
            Mat2 proj = observed_projector(p, static_cast<int8_t>(o));
            EXPECT_LE(max_abs(pauli_matrix(p) * proj - double(o) * proj), 1e-15);
            EXPECT_EQ(proj.trace(), cd(1.0));
            Vec2 ket = Vec2::Zero();
            ket(o == 1 ? 0 : 1) = 1.0;
            Vec2 phi = basis_rotation(p).adjoint() * ket;
            EXPECT_LE(max_abs(phi * phi.adjoint() - proj), 1e-15);
        }
    }
}

TEST(make_record, zero_state_z_bases) {
    Statevector zero(6);
    RecordSampler sampler(zero, 0, 5);
    Rng rng(3);
    for (int k = 0; k < 20; k++) {
        MeasurementRecord r = sampler.sample_with_bases(Pauli::Z, Pauli::Z, rng);
        ASSERT_EQ(r.env_outcomes, std::vector<int8_t>(4, 1));
        ASSERT_EQ(r.outcome_a, 1);
        ASSERT_EQ(r.outcome_b, 1);
    }
}

TEST(make_record, ghz_correlated) {
    std::vector<cd> amps(8);
    amps[0] = amps[7] = 1.0 / std::sqrt(2.0);
    Statevector ghz = Statevector::from_amplitudes(amps);
    RecordSampler sampler(ghz, 0, 2);
    Rng rng(4);
    int ups = 0;
    for (int k = 0; k < 200; k++) {
        MeasurementRecord r = sampler.sample_with_bases(Pauli::Z, Pauli::Z, rng);
        ASSERT_EQ(r.env_outcomes.size(), 1u);
        ASSERT_EQ(r.outcome_a, r.outcome_b);
        ASSERT_EQ(r.env_outcomes[0], r.outcome_a);
        ups += r.outcome_a == 1;
    }
    EXPECT_GT(ups, 60);
    EXPECT_LT(ups, 140);
}

TEST(make_record, sampler_matches_direct_path) {
    auto spec = make_all_to_all_spec(6, 2.0, 8);
    Statevector s = prepare_state(spec);
    RecordSampler sampler(s, spec.probe_a, spec.probe_b);
    Rng r1(10), r2(10);
    for (int k = 0; k < 200; k++) {
        MeasurementRecord a = make_record(s, spec.probe_a, spec.probe_b, r1);
        MeasurementRecord b = sampler.sample(r2);
        ASSERT_EQ(a.env_outcomes, b.env_outcomes);
        ASSERT_EQ(a.basis_a, b.basis_a);
        ASSERT_EQ(a.basis_b, b.basis_b);
        ASSERT_EQ(a.outcome_a, b.outcome_a);
        ASSERT_EQ(a.outcome_b, b.outcome_b);
    }
}

TEST(make_record, basis_marginals) {
    auto spec = make_all_to_all_spec(6, 2.0, 8);
    Statevector s = prepare_state(spec);
    RecordSampler sampler(s, spec.probe_a, spec.probe_b);
    Rng rng(12);
    const int n = 10000;
    int ca[3] = {}, cb[3] = {};
    for (int k = 0; k < n; k++) {
        auto r = sampler.sample(rng);
        r.validate(4);
        ca[int(r.basis_a)]++;
        cb[int(r.basis_b)]++;
    }
    for (int i = 0; i < 3; i++) {
        EXPECT_NEAR(ca[i] / double(n), 1.0 / 3.0, 0.02);
        EXPECT_NEAR(cb[i] / double(n), 1.0 / 3.0, 0.02);
    }
}

TEST(record, validate) {
    MeasurementRecord r = probe_record(Pauli::X, Pauli::Z, 1, -1);
    r.env_outcomes = {1, -1, 1};
    EXPECT_NO_THROW(r.validate(3));
    EXPECT_THROW(r.validate(4), ShapeMismatch);
    r.env_outcomes[1] = 0;
    EXPECT_THROW(r.validate(3), UnknownSymbol);
    r.env_outcomes[1] = 1;
    r.outcome_a = 2;
    EXPECT_THROW(r.validate(3), UnknownSymbol);
}

TEST(snapshot, z_plus_plus) {
    Mat4 s = snapshot(probe_record(Pauli::Z, Pauli::Z, 1, 1)).matrix;
    Mat4 expected = Mat4::Zero();
    expected.diagonal() << 4, -2, -2, 1;
    EXPECT_LE(max_abs(s - expected), 1e-15);
}

TEST(snapshot, factor_order_a_significant) {
    // A measured |1⟩ in Z, B measured |+⟩ in X: 3P−I factors are
    // diag(−1, 2) on A and [[1/2, 3/2], [3/2, 1/2]] on B.
    Mat4 s = snapshot(probe_record(Pauli::Z, Pauli::X, -1, 1)).matrix;
    Mat2 fa, fb;
    fa << -1, 0, 0, 2;
    fb << 0.5, 1.5, 1.5, 0.5;
    EXPECT_LE(max_abs(s - kron(fa, fb)), 1e-15);
    EXPECT_NEAR(s(2, 2).real(), 1.0, 1e-15);  // |10⟩⟨10| entry: 2 · 1/2
}

TEST(snapshot, trace_and_hermiticity) {
    for (Pauli a : {Pauli::X, Pauli::Y, Pauli::Z}) {
        for (Pauli b : {Pauli::X, Pauli::Y, Pauli::Z}) {
            for (int oa : {1, -1}) {
                for (int ob : {1, -1}) {
                    auto rec = probe_record(a, b, oa, ob);
                    Mat4 s = snapshot(rec).matrix;
                    EXPECT_NEAR(std::abs(s.trace() - 1.0), 0.0, 1e-12);
                    EXPECT_LE(hermiticity_error(s), 1e-12);
                    auto eig = hermitian_eigen(s);
                    EXPECT_LT(eig.eigenvalues().minCoeff(), 0.0);  // indefinite by construction
                    Mat4 r = raw_snapshot(rec);
                    EXPECT_LE(max_abs(r * r - r), 1e-12);
                    EXPECT_NEAR(std::abs(r.trace() - 1.0), 0.0, 1e-12);
                    EXPECT_GE(hermitian_eigen(r).eigenvalues().minCoeff(), -1e-12);
                }
            }
        }
    }
    Mat4 r = raw_snapshot(probe_record(Pauli::Z, Pauli::Z, 1, 1));
    Mat4 e = Mat4::Zero();
    e(0, 0) = 1;
    EXPECT_LE(max_abs(r - e), 1e-15);
}

TEST(snapshot, exact_average_over_bases_and_outcomes) {
    // Weighting every (basis, outcome) by its Born probability gives the
    // exact expectation: σ for the snapshot and Ω/9 for the raw one.
    Rng rng(13);
    Mat4 sigma = test_util::random_density_matrix(rng, 2);
    Mat4 mean = Mat4::Zero(), raw_mean = Mat4::Zero();
    for (Pauli a : {Pauli::X, Pauli::Y, Pauli::Z}) {
        for (Pauli b : {Pauli::X, Pauli::Y, Pauli::Z}) {
            for (int oa : {1, -1}) {
                for (int ob : {1, -1}) {
                    auto rec = probe_record(a, b, oa, ob);
                    Mat4 proj = kron(observed_projector(a, rec.outcome_a), observed_projector(b, rec.outcome_b));
                    double p = (proj * sigma).trace().real() / 9.0;
                    mean += p * snapshot(rec).matrix;
                    raw_mean += p * raw_snapshot(rec);
                }
            }
        }
    }
    EXPECT_LE(max_abs(mean - sigma), 1e-13);
    EXPECT_LE(max_abs(raw_mean - raw_snapshot_expectation(sigma)), 1e-13);
    EXPECT_LE(max_abs(raw_snapshot_expectation(sigma) - omega_operator(sigma) / 9.0), 1e-15);
}

TEST(snapshot, conditional_unbiasedness) {
    // Frobenius RMS error of a mean of N snapshots is sqrt((25 − Trσ²)/N),
    // about 0.0155 at N = 10^5; 0.03 leaves room for the fluctuation.
    const int n = 100000;
    for (const auto &o : sample_oracles(3, 50)) {
        Rng rng(7);
        Mat4 mean = Mat4::Zero(), raw = Mat4::Zero();
        for (int k = 0; k < n; k++) {
            auto rec = sample_conditional(o.sigma_ab, rng);
            mean += snapshot(rec).matrix;
            raw += raw_snapshot(rec);
        }
        mean /= double(n);
        raw /= double(n);
        EXPECT_LE((mean - o.sigma_ab).norm(), 0.03);
        EXPECT_LE((raw - raw_snapshot_expectation(o.sigma_ab)).norm(), 0.03);
    }
}

TEST(omega_operator, examples) {
    Mat4 s00 = Mat4::Zero();
    s00(0, 0) = 1;
    Mat4 expected = Mat4::Zero();
    expected.diagonal() << 4, 2, 2, 1;
    EXPECT_LE(max_abs(omega_operator(s00) - expected), 1e-15);
    EXPECT_LE(max_abs(omega_operator(Mat4::Identity() / 4.0) - 2.25 * Mat4::Identity()), 1e-15);

    Vec4 bell = Vec4::Zero();
    bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
    Mat4 sb = bell * bell.adjoint();
    EXPECT_LE((omega_operator(sb) * bell - 3.0 * bell).norm(), 1e-14);
}

TEST(omega_flatness_check, examples) {
    Vec4 bell = Vec4::Zero();
    bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
    auto b = omega_flatness_check(bell);
    EXPECT_TRUE(b.is_eigenvector);
    ASSERT_EQ(b.coefficients.size(), 2u);
    EXPECT_NEAR(b.coefficients[0], 3.0, 1e-10);
    EXPECT_NEAR(b.coefficients[1], 3.0, 1e-10);

    Vec4 uneven = Vec4::Zero();
    uneven(0) = std::sqrt(0.8);
    uneven(3) = std::sqrt(0.2);
    auto u = omega_flatness_check(uneven);
    EXPECT_FALSE(u.is_eigenvector);
    ASSERT_EQ(u.coefficients.size(), 2u);
    EXPECT_NEAR(u.coefficients[0], 3.6, 1e-10);
    EXPECT_NEAR(u.coefficients[1], 2.4, 1e-10);

    Vec4 prod = Vec4::Zero();
    prod(0) = 1;
    auto p = omega_flatness_check(prod);
    EXPECT_TRUE(p.is_eigenvector);
    EXPECT_EQ(p.coefficients.size(), 1u);
}

TEST(omega_flatness_check, schmidt_formula_random_states) {
    Rng rng(17);
    for (int k = 0; k < 200; k++) {
        Vec4 psi = test_util::random_pure_state(rng);
        auto r = omega_flatness_check(psi);
        EXPECT_LE(r.formula_error, 1e-10);
        // Cross-check eigenvector status directly.
        Vec4 w = omega_operator(psi * psi.adjoint()) * psi;
        cd lambda = psi.dot(w);
        bool direct = (w - lambda * psi).norm() <= 1e-10;
        EXPECT_EQ(direct, r.is_eigenvector);
    }
}

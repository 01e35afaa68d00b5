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

#include "mie/evaluation.hpp"

#include <cmath>
#include <memory>

#include "mie/errors.hpp"

namespace mie {

namespace {

constexpr double kPsdTolerance = 1e-8;
constexpr double kTraceTolerance = 1e-8;
constexpr double kSingularFloor = 1e-14;

template <typename M>
double entropy_impl(const M &rho) {
    double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > kTraceTolerance) {
        throw NotPSD("density matrix trace " + std::to_string(tr) + " differs from 1");
    }
    auto eig = hermitian_eigen(rho);
    double s = 0.0;
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); k++) {
        double lam = eig.eigenvalues()(k);
        if (lam < -kPsdTolerance) {
            throw NotPSD("density matrix has eigenvalue " + std::to_string(lam));
        }
        if (lam > 0.0) {
            s -= lam * std::log(lam);
        }
    }
    return s;
}

template <typename M>
double qc_impl(const M &sigma, const M &rho) {
    auto eig = hermitian_eigen(rho);
    if (eig.eigenvalues()(0) < kSingularFloor) {
        throw SingularEstimator("estimator has eigenvalue " + std::to_string(eig.eigenvalues()(0)));
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); k++) {
        auto v = eig.eigenvectors().col(k);
        double weight = (v.adjoint() * sigma * v)(0, 0).real();
        s -= weight * std::log(eig.eigenvalues()(k));
    }
    return s;
}

double sample_stderr(std::span<const double> values, double mean) {
    if (values.size() < 2) {
        return 0.0;
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    double var = ss / static_cast<double>(values.size() - 1);
    return std::sqrt(var / static_cast<double>(values.size()));
}

EvalReport summarize(std::span<const MeasurementRecord> records, std::span<const DensityMatrix> estimates) {
    EvalReport report;
    report.num_eval_records = records.size();
    std::vector<double> terms(records.size());
    double sum = 0.0;
    double entropy = 0.0;
    double entropy_a = 0.0;
    for (size_t i = 0; i < records.size(); i++) {
        terms[i] = shadow_classical_entropy(snapshot(records[i]), estimates[i]);
        sum += terms[i];
        entropy += von_neumann_entropy(estimates[i].matrix);
        entropy_a += von_neumann_entropy(partial_trace_b(estimates[i].matrix));
    }
    const double n = static_cast<double>(records.size());
    report.delta_mean = sum / n;
    report.delta_stderr = sample_stderr(terms, report.delta_mean);
    report.mean_output_entropy = entropy / n;
    report.mean_output_entropy_a = entropy_a / n;
    return report;
}

}  // namespace

double von_neumann_entropy(const Mat2 &rho) {
    return entropy_impl(rho);
}

double von_neumann_entropy(const Mat4 &rho) {
    return entropy_impl(rho);
}

Mat4 hermitian_log(const Mat4 &rho) {
    auto eig = hermitian_eigen(rho);
    if (eig.eigenvalues()(0) < kSingularFloor) {
        throw SingularEstimator("matrix logarithm of a singular matrix");
    }
    Eigen::Vector4d logs = eig.eigenvalues().array().log();
    return eig.eigenvectors() * logs.cast<cd>().asDiagonal() * eig.eigenvectors().adjoint();
}

double shadow_classical_entropy(const ShadowSnapshot &snap, const DensityMatrix &rho, double min_eigenvalue) {
    auto eig = hermitian_eigen(rho.matrix);
    if (eig.eigenvalues()(0) < min_eigenvalue) {
        throw InvariantViolation("estimator eigenvalue " + std::to_string(eig.eigenvalues()(0)) +
                                 " is below the mixing floor");
    }
    double s = 0.0;
    for (int k = 0; k < 4; k++) {
        auto v = eig.eigenvectors().col(k);
        double weight = (v.adjoint() * snap.matrix * v)(0, 0).real();
        s -= weight * std::log(eig.eigenvalues()(k));
    }
    return s;
}

double qc_entropy(const Mat2 &sigma, const Mat2 &rho) {
    return qc_impl(sigma, rho);
}

double qc_entropy(const Mat4 &sigma, const Mat4 &rho) {
    return qc_impl(sigma, rho);
}

BoundsCheck bounds_check(const Mat4 &sigma_ab, const Mat4 &rho_ab) {
    BoundsCheck out;
    Mat2 sigma_a = partial_trace_b(sigma_ab);
    Mat2 rho_a = partial_trace_b(rho_ab);
    out.s_a = von_neumann_entropy(sigma_a);
    out.upper = qc_entropy(sigma_a, rho_a);
    out.lower = out.upper - qc_entropy(sigma_ab, rho_ab);
    out.holds = out.upper + 1e-9 >= out.s_a && out.s_a >= out.lower - 1e-9;
    return out;
}

EvalReport estimate_delta(const Model &model, std::span<const MeasurementRecord> records) {
    if (records.empty()) {
        throw EmptyBatch("no evaluation records");
    }
    const size_t env = records.front().env_outcomes.size();
    std::vector<int> tokens;
    tokens.reserve(records.size() * (env + 1));
    for (const auto &r : records) {
        if (r.env_outcomes.size() != env) {
            throw ShapeMismatch("evaluation records differ in length");
        }
        auto t = tokenize(r.env_outcomes);
        tokens.insert(tokens.end(), t.begin(), t.end());
    }
    auto estimates = predict(model, tokens, static_cast<int>(env + 1));
    return summarize(records, estimates);
}

EvalReport estimate_delta(const Estimator &estimator, std::span<const MeasurementRecord> records) {
    if (records.empty()) {
        throw EmptyBatch("no evaluation records");
    }
    std::vector<DensityMatrix> estimates;
    estimates.reserve(records.size());
    for (size_t i = 0; i < records.size(); i++) {
        try {
            estimates.push_back(estimator(records[i].env_outcomes));
        } catch (const Error &e) {
            throw NumericalFailure("record " + std::to_string(i) + ": " + e.what());
        }
    }
    return summarize(records, estimates);
}

std::vector<int8_t> outcomes_from_bits(const EnvOutcome &bits) {
    std::vector<int8_t> out(bits.size());
    for (size_t k = 0; k < bits.size(); k++) {
        out[k] = bits[k] ? -1 : 1;
    }
    return out;
}

EnvOutcome bits_from_outcomes(std::span<const int8_t> outcomes) {
    EnvOutcome bits(outcomes.size());
    for (size_t k = 0; k < outcomes.size(); k++) {
        bits[k] = outcomes[k] == -1 ? 1 : 0;
    }
    return bits;
}

double exact_delta(const Estimator &estimator, const Statevector &state, int a, int b, int cap) {
    double delta = 0.0;
    for_each_outcome(
        state, a, b,
        [&](const OracleState &o) {
            auto outcomes = outcomes_from_bits(o.m_env);
            delta += o.probability * qc_entropy(o.sigma_ab, estimator(outcomes).matrix);
        },
        cap);
    return delta;
}

namespace {

struct EnumeratedEstimates {
    std::vector<OracleState> outcomes;
    std::vector<DensityMatrix> estimates;
};

EnumeratedEstimates enumerate_with_model(const Model &model, const Statevector &state, int a, int b, int cap) {
    EnumeratedEstimates out;
    out.outcomes = enumerate_outcomes(state, a, b, cap);
    const int seq_len = state.num_qubits() - 1;
    std::vector<int> tokens;
    tokens.reserve(out.outcomes.size() * seq_len);
    for (const auto &o : out.outcomes) {
        auto t = tokenize(outcomes_from_bits(o.m_env));
        tokens.insert(tokens.end(), t.begin(), t.end());
    }
    out.estimates = predict(model, tokens, seq_len);
    return out;
}

}  // namespace

double exact_delta(const Model &model, const Statevector &state, int a, int b, int cap) {
    auto e = enumerate_with_model(model, state, a, b, cap);
    double delta = 0.0;
    for (size_t i = 0; i < e.outcomes.size(); i++) {
        delta += e.outcomes[i].probability * qc_entropy(e.outcomes[i].sigma_ab, e.estimates[i].matrix);
    }
    return delta;
}

double exact_mie(const Statevector &state, int a, int b, int cap) {
    double mie = 0.0;
    for_each_outcome(
        state, a, b,
        [&](const OracleState &o) { mie += o.probability * von_neumann_entropy(partial_trace_b(o.sigma_ab)); }, cap);
    return mie;
}

ExactBounds exact_bounds(const Model &model, const Statevector &state, int a, int b, int cap) {
    auto e = enumerate_with_model(model, state, a, b, cap);
    ExactBounds out;
    out.num_outcomes = e.outcomes.size();
    for (size_t i = 0; i < e.outcomes.size(); i++) {
        const auto &o = e.outcomes[i];
        BoundsCheck check = bounds_check(o.sigma_ab, e.estimates[i].matrix);
        out.mie += o.probability * check.s_a;
        out.upper += o.probability * check.upper;
        out.lower += o.probability * check.lower;
        out.delta += o.probability * (check.upper - check.lower);
        out.all_hold = out.all_hold && check.holds;
    }
    return out;
}

Estimator oracle_estimator(const Statevector &state, int a, int b, double epsilon) {
    auto shared = std::make_shared<const Statevector>(state);
    return [shared, a, b, epsilon](std::span<const int8_t> env) {
        OracleState o = project_environment(*shared, bits_from_outcomes(env), a, b);
        return DensityMatrix{(1.0 - epsilon) * o.sigma_ab + (epsilon / 4.0) * Mat4::Identity()};
    };
}

}  // namespace mie

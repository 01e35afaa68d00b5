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

#include <Eigen/Dense>
#include <complex>

namespace mie {

using cd = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;

// Two-qubit operators use the index 2*a + b, qubit A being the more
// significant tensor factor.

Mat4 kron(const Mat2 &a, const Mat2 &b);

/// Tr_B of a two-qubit operator, leaving the A factor.
Mat2 partial_trace_b(const Mat4 &m);

/// Tr_A of a two-qubit operator, leaving the B factor.
Mat2 partial_trace_a(const Mat4 &m);

double max_abs(const Eigen::MatrixXcd &m);

/// ‖m − m†‖_max.
double hermiticity_error(const Eigen::MatrixXcd &m);

/// ‖U U† − I‖_max.
double unitarity_error(const Eigen::MatrixXcd &u);

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
template <typename M>
Eigen::SelfAdjointEigenSolver<M> hermitian_eigen(const M &m) {
    M h = 0.5 * (m + m.adjoint());
    return Eigen::SelfAdjointEigenSolver<M>(h);
}

}  // namespace mie

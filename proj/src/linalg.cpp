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

#include "mie/linalg.hpp"

namespace mie {

Mat4 kron(const Mat2 &a, const Mat2 &b) {
    Mat4 out;
    for (int i = 0; i < 2; i++) {
        for (int j = 0; j < 2; j++) {
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        }
    }
    return out;
}

Mat2 partial_trace_b(const Mat4 &m) {
    Mat2 out;
    for (int a = 0; a < 2; a++) {
        for (int a2 = 0; a2 < 2; a2++) {
            out(a, a2) = m(2 * a, 2 * a2) + m(2 * a + 1, 2 * a2 + 1);
        }
    }
    return out;
}

Mat2 partial_trace_a(const Mat4 &m) {
    Mat2 out;
    for (int b = 0; b < 2; b++) {
        for (int b2 = 0; b2 < 2; b2++) {
            out(b, b2) = m(b, b2) + m(2 + b, 2 + b2);
        }
    }
    return out;
}

double max_abs(const Eigen::MatrixXcd &m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double hermiticity_error(const Eigen::MatrixXcd &m) {
    return max_abs(m - m.adjoint());
}

double unitarity_error(const Eigen::MatrixXcd &u) {
    return max_abs(u * u.adjoint() - Eigen::MatrixXcd::Identity(u.rows(), u.cols()));
}

}  // namespace mie

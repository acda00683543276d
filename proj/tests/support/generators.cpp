/*
 *   Copyright 2026 The gmmdc Authors
 *
 *   Licensed under the Apache License, Version 2.0 (the "License");
 *   you may not use this file except in compliance with the License.
 *   You may obtain a copy of the License at
 *
 *       http://www.apache.org/licenses/LICENSE-2.0
 *
 *   Unless required by applicable law or agreed to in writing, software
 *   distributed under the License is distributed on an "AS IS" BASIS,
 *   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *   See the License for the specific language governing permissions and
 *   limitations under the License.
 */
#include "generators.hpp"

#include <cmath>

namespace gmmdc::testing {

namespace {

Index uniform_index(Engine& eng, Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(eng);
}

double normal(Engine& eng) { return std::normal_distribution<double>()(eng); }

}  // namespace

Matrix random_normal(Engine& eng, Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(eng);
    return m;
}

Matrix random_spd(Engine& eng, Index d) {
    const Matrix a = random_normal(eng, d, d);
    return a * a.transpose() + 0.5 * static_cast<double>(d) * Matrix::Identity(d, d);
}

IvData random_iv(Engine& eng, const IvShape& shape) {
    const Index n = uniform_index(eng, shape.n_min, shape.n_max);
    const Index k = uniform_index(eng, shape.k_min, shape.k_max);
    const Index q = k + uniform_index(eng, shape.extra_min, shape.extra_max);

    IvData d;
    d.Z = random_normal(eng, n, q);
    const bool constant = k > 1 && std::bernoulli_distribution(0.5)(eng);
    if (constant) d.Z.col(0).setOnes();

    const Matrix pi = 0.5 * random_normal(eng, q, k) + Matrix::Identity(q, k);
    const Vector u = random_normal(eng, n, 1);
    d.X = d.Z * pi + random_normal(eng, n, k);
    d.X.col(k - 1) += u;  // the last regressor is endogenous
    if (constant) d.X.col(0).setOnes();

    const Vector theta = random_normal(eng, k, 1);
    const Vector violation = shape.misspec * random_normal(eng, q, 1);
    const Vector xi = random_normal(eng, n, 1);
    Vector e(n);
    for (Index i = 0; i < n; ++i) {
        const double scale = std::sqrt(0.5 + d.Z(i, q - 1) * d.Z(i, q - 1));
        e(i) = d.Z.row(i).dot(violation) + 0.5 * u(i) + scale * xi(i);
    }
    d.y = d.X * theta + e;
    return d;
}

LinearMomentSystem random_iv_system(Engine& eng, const IvShape& shape) {
    const IvData d = random_iv(eng, shape);
    return build_iv_system(d.y, d.X, d.Z);
}

PanelDataset random_panel(Engine& eng, Index N_min, Index N_max, Index T_min, Index T_max) {
    const Index N = uniform_index(eng, N_min, N_max);
    const Index T = uniform_index(eng, T_min, T_max);
    const double beta = normal(eng);
    const double feedback = 0.3 * normal(eng);
    PanelDataset p;
    p.y.resize(N, T);
    p.x.resize(N, T);
    for (Index i = 0; i < N; ++i) {
        const double eta = normal(eng);
        double v_prev = 0.0;
        for (Index t = 0; t < T; ++t) {
            const double v = normal(eng) * (1.0 + 0.5 * std::fabs(eta));
            p.x(i, t) = 0.5 * eta + feedback * v_prev + normal(eng);
            p.y(i, t) = beta * p.x(i, t) + eta + v;
            v_prev = v;
        }
    }
    return p;
}

LinearMomentSystem random_generic_system(Engine& eng, Index n, Index q, Index k) {
    Matrix h = random_normal(eng, n, q);
    const Matrix base = random_normal(eng, q, k) + Matrix::Identity(q, k);
    Matrix jac(n * q, k), w(n * q, q);
    for (Index i = 0; i < n; ++i) {
        jac.middleRows(i * q, q) = base + 0.5 * random_normal(eng, q, k);
        const Matrix a = random_normal(eng, q, q);
        w.middleRows(i * q, q) = a * a.transpose() / static_cast<double>(q) + 0.1 * Matrix::Identity(q, q);
    }
    return LinearMomentSystem(std::move(h), std::move(jac), std::move(w));
}

}  // namespace gmmdc::testing

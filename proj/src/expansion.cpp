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
#include "gmmdc/expansion.hpp"

#include <cmath>

namespace gmmdc {

Matrix neumann_inverse(const Matrix& X, const Matrix& Y, double n, int order) {
    if (X.rows() != X.cols() || Y.rows() != X.rows() || Y.cols() != X.cols())
        throw Error(ErrorCode::DimensionMismatch, "neumann_inverse needs square X and Y of equal size");
    if (order < 0) throw Error(ErrorCode::InvalidArgument, "expansion order must be non-negative");
    if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale n must be positive");
    const LuFactor lu(X, ErrorCode::RankDeficient, "X is singular");
    const Matrix xinv = lu.solve(Matrix::Identity(X.rows(), X.cols()));
    const Matrix step = -lu.solve(Y) / std::sqrt(n);
    Matrix term = xinv;
    Matrix sum = xinv;
    for (int j = 1; j <= order; ++j) {
        term = step * term;
        sum += term;
    }
    return sum;
}

void ExpansionTruth::validate(Index q, Index k) const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::InvalidArgument, what);
    };
    need(G.rows() == q && G.cols() == k, "truth G must be q x k");
    need(W.rows() == q && W.cols() == q, "truth W must be q x q");
    need(Omega.rows() == q && Omega.cols() == q, "truth Omega must be q x q");
    need(static_cast<Index>(dOmega.size()) == k, "truth needs one dOmega slice per parameter");
    for (const auto& d : dOmega) need(d.rows() == q && d.cols() == q, "dOmega slices must be q x q");
    need(delta.size() == q, "truth delta must have q entries");
    need(theta0.size() == k, "truth theta0 must have k entries");
}

namespace {

// Terms shared by the one-step (Xi = W) and two-step (Xi = Omega) expansions.
struct Pieces {
    Vector eta, psi0, psi1, q_term;
    Matrix B;
    Matrix P;       // (G' Xi^{-1} G)^{-1}
    Matrix xi_inv;  // Xi^{-1}
};

Pieces expand(const Matrix& G, const Matrix& xi, const Vector& delta, const Vector& g_t, const Matrix& G_t,
              const Matrix& xi_t) {
    const SpdFactor f(xi, ErrorCode::SingularWeight, "population weight is not positive definite");
    Pieces p;
    p.xi_inv = f.inverse();
    const Matrix xg = p.xi_inv * G;
    const SpdFactor a(G.transpose() * xg, ErrorCode::SingularNormalMatrix, "population G'Xi^{-1}G is singular");
    p.P = a.inverse();
    const Matrix xxx = xg.transpose() * xi_t * p.xi_inv;  // G'Xi^{-1} Xi~ Xi^{-1}
    p.eta = -p.P * (xg.transpose() * delta);
    p.psi0 = -p.P * (xg.transpose() * g_t);
    p.psi1 = -p.P * (G_t.transpose() * p.xi_inv * delta - xxx * delta);
    p.q_term = -p.P * (G_t.transpose() * p.xi_inv * g_t - xxx * g_t);
    p.B = -p.P * (G_t.transpose() * xg - xxx * G + xg.transpose() * G_t);
    return p;
}

struct Deviations {
    double n;
    Vector g_t;
    Matrix G_t;
    Matrix W_t;
    Matrix W_n;
};

Deviations deviations(const LinearMomentSystem& sample, const ExpansionTruth& truth) {
    truth.validate(sample.q(), sample.k());
    Deviations d;
    d.n = static_cast<double>(sample.n());
    const double rn = std::sqrt(d.n);
    d.g_t = rn * moment_stats(sample, truth.theta0).g_n - truth.delta;
    d.G_t = rn * (sample.jacobian_mean() - truth.G);
    d.W_n = sample.has_obs_weights() ? sample.obs_weight_mean() : Matrix::Identity(sample.q(), sample.q());
    d.W_t = rn * (d.W_n - truth.W);
    return d;
}

}  // namespace

ExpansionTerms onestep_expansion(const LinearMomentSystem& sample, const ExpansionTruth& truth) {
    const Deviations d = deviations(sample, truth);
    const Pieces w = expand(truth.G, truth.W, truth.delta, d.g_t, d.G_t, d.W_t);
    const Index k = sample.k();
    ExpansionTerms t;
    t.eta = w.eta;
    t.psi0 = w.psi0;
    t.psi1 = w.psi1;
    t.q_term = w.q_term;
    t.B_term = w.B;
    t.D = t.C_tilde = t.H_eta = t.H_psi0 = Matrix::Zero(k, k);
    t.eta_w = w.eta;
    t.psi_w0 = w.psi0;
    t.psi_w1 = w.psi1;
    t.predicted = w.eta + w.psi0 + (w.psi1 + w.q_term + w.B * (w.eta + w.psi0)) / std::sqrt(d.n);
    return t;
}

ExpansionTerms twostep_expansion(const LinearMomentSystem& sample, const ExpansionTruth& truth) {
    const Deviations d = deviations(sample, truth);
    const Index k = sample.k();
    const double rn = std::sqrt(d.n);
    const Pieces w = expand(truth.G, truth.W, truth.delta, d.g_t, d.G_t, d.W_t);
    const Matrix omega_t = rn * (moment_stats(sample, truth.theta0).omega - truth.Omega);
    const Pieces o = expand(truth.G, truth.Omega, truth.delta, d.g_t, d.G_t, omega_t);

    // Column j of the returned matrix: P G' Omega^{-1} dOmega_j Omega^{-1} v.
    const Matrix pgo = o.P * truth.G.transpose() * o.xi_inv;
    auto sensitivity = [&](const Vector& v) {
        Matrix m(k, k);
        const Vector ov = o.xi_inv * v;
        for (Index j = 0; j < k; ++j) m.col(j) = pgo * (truth.dOmega[static_cast<std::size_t>(j)] * ov);
        return m;
    };

    ExpansionTerms t;
    t.eta = o.eta;
    t.psi0 = o.psi0;
    t.psi1 = o.psi1;
    t.q_term = o.q_term;
    t.B_term = o.B;
    t.D = sensitivity(truth.delta);
    t.C_tilde = sensitivity(d.g_t);
    t.H_eta = sensitivity(truth.G * o.eta);
    t.H_psi0 = sensitivity(truth.G * o.psi0);
    t.eta_w = w.eta;
    t.psi_w0 = w.psi0;
    t.psi_w1 = w.psi1;

    const Vector bias = o.eta + (t.D + t.H_eta) * w.eta / rn;
    const Vector first = o.psi0 + (o.psi1 + (t.D + t.C_tilde + t.H_eta + t.H_psi0) * w.psi0 + o.q_term +
                                   o.B * (o.eta + o.psi0) + (t.C_tilde + t.H_psi0) * w.eta) / rn;
    t.predicted = bias + first + t.D * w.psi1 / d.n;
    return t;
}

}  // namespace gmmdc

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
#include "gmmdc/variance.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace gmmdc {

namespace {

// Block i of the stacked (n*q) column as row i of an n x q view.
auto unstacked(const double* data, Index n, Index q) { return Eigen::Map<const RowMatrix>(data, n, q); }

Matrix m_rows(const LinearMomentSystem& sys, const Vector& theta, const NormalEquations& ne,
              const WeightSpec& source) {
    const Index n = sys.n(), q = sys.q(), k = sys.k();
    const Matrix g = sys.moments(theta);
    const Vector g_n = g.colwise().mean().transpose();
    const Matrix& xi_g = ne.weighted_jacobian();
    const Vector a = ne.weight().solve(g_n);

    Matrix m = g * xi_g;
    for (Index j = 0; j < k; ++j)
        m.col(j).noalias() += unstacked(sys.stacked_jacobians().col(j).data(), n, q) * a;

    switch (source.kind) {
    case WeightSpec::Kind::Identity:
        break;
    case WeightSpec::Kind::DataAverage: {
        if (!sys.has_obs_weights()) throw Error(ErrorCode::InvalidArgument, "system carries no observation weights");
        const Vector wa = *sys.stacked_obs_weights() * a;
        m.noalias() -= unstacked(wa.data(), n, q) * xi_g;
        break;
    }
    case WeightSpec::Kind::EfficientUncentered:
    case WeightSpec::Kind::EfficientCentered: {
        Matrix gp = sys.moments(source.theta);
        if (source.kind == WeightSpec::Kind::EfficientCentered) gp.rowwise() -= gp.colwise().mean();
        const Vector s = gp * a;
        m.noalias() -= s.asDiagonal() * (gp * xi_g);
        break;
    }
    }
    return m;
}

Matrix d_hat_impl(const LinearMomentSystem& sys, const NormalEquations& ne, const Vector& theta_weight,
                  const Vector& g_n_eval, bool centered) {
    const Index n = sys.n(), q = sys.q(), k = sys.k();
    Matrix g = sys.moments(theta_weight);
    if (centered) g.rowwise() -= g.colwise().mean();
    const Vector b = ne.weight().solve(g_n_eval);
    const Vector gb = g * b;
    Matrix dob(q, k);  // column j: dOmega_j * b
    for (Index j = 0; j < k; ++j) {
        Matrix dg = unstacked(sys.stacked_jacobians().col(j).data(), n, q);
        if (centered) dg.rowwise() -= dg.colwise().mean();
        dob.col(j) = (g.transpose() * (dg * b) + dg.transpose() * gb) / static_cast<double>(n);
    }
    return ne.normal().solve(ne.weighted_jacobian().transpose() * dob);
}

Matrix outer_mean(const Matrix& a, const Matrix& b) { return (a.transpose() * b) / static_cast<double>(a.rows()); }

// A^{-1} M A^{-1} with M = G' Xi^{-1} Omega Xi^{-1} G.
Matrix sandwich(const NormalEquations& ne, const Matrix& omega) {
    const Matrix& xi_g = ne.weighted_jacobian();
    const Matrix inner = xi_g.transpose() * omega * xi_g;
    const Matrix left = ne.normal().solve(inner);
    return symmetrize(ne.normal().solve(left.transpose()));
}

Vector standard_errors(const Matrix& v, double n, std::vector<std::string>& warnings, const char* label) {
    Vector se(v.rows());
    for (Index j = 0; j < v.rows(); ++j) {
        if (v(j, j) < 0.0) warnings.push_back(std::string(label) + " has a negative diagonal entry");
        se(j) = std::sqrt(v(j, j) / n);
    }
    return se;
}

void check_rank(const Matrix& sigma, std::vector<std::string>& warnings) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (!(ev(0) > 1e-12 * std::max(ev(ev.size() - 1), 0.0)))
        warnings.push_back("Sigma_n is rank deficient; standard errors may be unreliable");
}

}  // namespace

Matrix m_contributions(const LinearMomentSystem& sys, const Vector& theta, const Matrix& weight,
                       const WeightSpec& source) {
    return m_rows(sys, theta, NormalEquations(sys.jacobian_mean(), weight), source);
}

Matrix d_hat(const LinearMomentSystem& sys, const Vector& theta_weight, const Vector& theta_eval,
             const Matrix& weight, bool centered) {
    const NormalEquations ne(sys.jacobian_mean(), weight);
    return d_hat_impl(sys, ne, theta_weight, moment_stats(sys, theta_eval).g_n, centered);
}

VarianceReport variance_report(const LinearMomentSystem& sys, const GmmFit& fit) {
    if (fit.steps.empty() || fit.theta.size() != sys.k())
        throw Error(ErrorCode::DimensionMismatch, "fit does not belong to this system");
    const Matrix& G = sys.jacobian_mean();
    const Index k = sys.k();
    const double n = static_cast<double>(sys.n());
    const bool centered = fit.plan.centered;
    const FitStep& first = fit.steps.front();
    VarianceReport r;

    switch (fit.plan.kind) {
    case EstimatorKind::OneStep: {
        const NormalEquations ne1(G, first.weight);
        const Matrix omega1 = weight_matrix(sys, WeightSpec::efficient(first.theta, centered));
        r.V_conv = sandwich(ne1, omega1);
        const Matrix m1 = m_rows(sys, first.theta, ne1, first.source);
        r.Sigma_n = symmetrize(outer_mean(m1, m1));
        r.V_dc = symmetrize(ne1.normal().solve(ne1.normal().solve(r.Sigma_n).transpose()));
        r.D_hat = Matrix::Zero(k, k);
        break;
    }
    case EstimatorKind::TwoStep: {
        const FitStep& second = fit.steps.at(1);
        const NormalEquations ne1(G, first.weight);
        const NormalEquations ne2(G, second.weight);
        const Matrix a1inv = ne1.normal().inverse();
        const Matrix a2inv = ne2.normal().inverse();
        const Matrix vt1 = sandwich(ne1, second.weight);

        r.V_conv = symmetrize(a2inv);
        r.D_hat = d_hat_impl(sys, ne2, first.theta, fit.g_n_hat, centered);
        const Matrix& D = r.D_hat;
        r.V_w = symmetrize(a2inv + D * a2inv + a2inv * D.transpose() + D * vt1 * D.transpose());

        const Matrix m1 = m_rows(sys, first.theta, ne1, first.source);
        const Matrix m2 = m_rows(sys, second.theta, ne2, second.source);
        r.Sigma_n = symmetrize(outer_mean(m2, m2));
        const Matrix v2 = a2inv * r.Sigma_n * a2inv;
        const Matrix vdc1 = a1inv * outer_mean(m1, m1) * a1inv;
        r.C_hat = a1inv * outer_mean(m1, m2) * a2inv;
        const Matrix& C = *r.C_hat;
        r.V_dc = symmetrize(v2 + D * C + C.transpose() * D.transpose() + D * vdc1 * D.transpose());
        break;
    }
    case EstimatorKind::Iterated: {
        const WeightSpec spec = WeightSpec::efficient(fit.theta, centered);
        const NormalEquations ne(G, weight_matrix(sys, spec));
        const Matrix ainv = ne.normal().inverse();
        r.V_conv = symmetrize(ainv);
        r.D_hat = d_hat_impl(sys, ne, fit.theta, fit.g_n_hat, centered);
        const LuFactor imd(Matrix::Identity(k, k) - r.D_hat, ErrorCode::IllConditionedCorrection,
                           "I - D_hat is ill-conditioned");
        // (I-D)^{-1} X (I-D)^{-T}
        auto correct = [&imd](const Matrix& x) {
            const Matrix left = imd.solve(x);
            return symmetrize(imd.solve(left.transpose()).transpose());
        };
        r.V_w = correct(ainv);
        const Matrix m = m_rows(sys, fit.theta, ne, spec);
        r.Sigma_n = symmetrize(outer_mean(m, m));
        // H^{-1} = (I-D)^{-1} A^{-1} for H = A (I-D).
        r.V_dc = correct(ainv * r.Sigma_n * ainv);
        break;
    }
    }

    check_rank(r.Sigma_n, r.warnings);
    r.se_conv = standard_errors(r.V_conv, n, r.warnings, "V_conv");
    if (r.V_w) r.se_w = standard_errors(*r.V_w, n, r.warnings, "V_w");
    r.se_dc = standard_errors(r.V_dc, n, r.warnings, "V_dc");
    return r;
}

}  // namespace gmmdc

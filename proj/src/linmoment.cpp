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
#include "gmmdc/linmoment.hpp"

#include <sstream>
#include <string>

namespace gmmdc {

namespace {

[[noreturn]] void dimension_error(const std::string& what) { throw Error(ErrorCode::DimensionMismatch, what); }

// Row i of the result is the i-th q-block of a stacked (n*q)-vector.
Matrix unstack(const Vector& v, Index n, Index q) {
    return Eigen::Map<const RowMatrix>(v.data(), n, q);
}

}  // namespace

LinearMomentSystem::LinearMomentSystem(Matrix h, Matrix jacobians, std::optional<Matrix> obs_weights,
                                       std::optional<std::vector<int>> cluster_id)
    : h_(std::move(h)), jac_(std::move(jacobians)), w_obs_(std::move(obs_weights)),
      cluster_id_(std::move(cluster_id)) {
    const Index n = h_.rows(), q = h_.cols(), k = jac_.cols();
    if (k < 1 || q < k) {
        std::ostringstream msg;
        msg << "moment system needs q >= k >= 1 (q=" << q << ", k=" << k << ")";
        dimension_error(msg.str());
    }
    if (n <= q) {
        std::ostringstream msg;
        msg << "moment system needs more observations than moments (n=" << n << ", q=" << q << ")";
        dimension_error(msg.str());
    }
    if (jac_.rows() != n * q) dimension_error("stacked Jacobians must have n*q rows");
    if (w_obs_ && (w_obs_->rows() != n * q || w_obs_->cols() != q))
        dimension_error("stacked observation weights must be (n*q) x q");
    if (cluster_id_ && static_cast<Index>(cluster_id_->size()) != n)
        dimension_error("cluster_id must have one label per observation");
    if (!h_.allFinite() || !jac_.allFinite() || (w_obs_ && !w_obs_->allFinite()))
        throw Error(ErrorCode::InvalidArgument, "moment system contains non-finite values");

    h_mean_ = h_.colwise().mean().transpose();
    g_mean_ = Matrix::Zero(q, k);
    for (Index i = 0; i < n; ++i) g_mean_ += jacobian(i);
    g_mean_ /= static_cast<double>(n);
    if (w_obs_) {
        w_mean_ = Matrix::Zero(q, q);
        for (Index i = 0; i < n; ++i) {
            const auto wi = obs_weight(i);
            if ((wi - wi.transpose()).norm() > 1e-12 * (1.0 + wi.norm()))
                throw Error(ErrorCode::InvalidArgument, "observation weight contributions must be symmetric");
            w_mean_ += wi;
        }
        w_mean_ /= static_cast<double>(n);
    }
}

const Matrix& LinearMomentSystem::obs_weight_mean() const {
    if (!w_obs_) throw Error(ErrorCode::InvalidArgument, "system carries no observation weights");
    return w_mean_;
}

Matrix LinearMomentSystem::moments(const Vector& theta) const {
    if (theta.size() != k()) dimension_error("theta has the wrong length");
    const Vector stacked = jac_ * theta;
    return h_ + unstack(stacked, n(), q());
}

LinearMomentSystem LinearMomentSystem::select(std::span<const Index> rows) const {
    const Index m = static_cast<Index>(rows.size()), q_ = q();
    Matrix h(m, q_);
    Matrix jac(m * q_, k());
    std::optional<Matrix> w;
    if (w_obs_) w.emplace(m * q_, q_);
    std::optional<std::vector<int>> ids;
    if (cluster_id_) ids.emplace(rows.size());
    for (Index r = 0; r < m; ++r) {
        const Index i = rows[r];
        if (i < 0 || i >= n()) throw Error(ErrorCode::InvalidArgument, "row index out of range");
        h.row(r) = h_.row(i);
        jac.middleRows(r * q_, q_) = jacobian(i);
        if (w) w->middleRows(r * q_, q_) = obs_weight(i);
        if (ids) (*ids)[r] = (*cluster_id_)[i];
    }
    return LinearMomentSystem(std::move(h), std::move(jac), std::move(w), std::move(ids));
}

LinearMomentSystem LinearMomentSystem::scaled(double c) const {
    std::optional<Matrix> w;
    if (w_obs_) w = (*w_obs_) * (c * c);
    return LinearMomentSystem(h_ * c, jac_ * c, std::move(w), cluster_id_);
}

Matrix weight_matrix(const LinearMomentSystem& sys, const WeightSpec& spec) {
    switch (spec.kind) {
    case WeightSpec::Kind::Identity:
        return Matrix::Identity(sys.q(), sys.q());
    case WeightSpec::Kind::DataAverage:
        return sys.obs_weight_mean();
    case WeightSpec::Kind::EfficientUncentered:
        return moment_stats(sys, spec.theta).omega;
    case WeightSpec::Kind::EfficientCentered:
        return moment_stats(sys, spec.theta).omega_c;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown weight kind");
}

MomentStats moment_stats(const LinearMomentSystem& sys, const Vector& theta) {
    const Matrix g = sys.moments(theta);
    const double n = static_cast<double>(sys.n());
    MomentStats s;
    s.g_n = g.colwise().mean().transpose();
    s.G_n = sys.jacobian_mean();
    s.omega = (g.transpose() * g) / n;
    const Matrix gc = g.rowwise() - s.g_n.transpose();
    s.omega_c = (gc.transpose() * gc) / n;
    return s;
}

Matrix omega_derivative(const LinearMomentSystem& sys, const Vector& theta, Index j, bool centered) {
    if (j < 0 || j >= sys.k()) throw Error(ErrorCode::InvalidArgument, "parameter index out of range");
    Matrix g = sys.moments(theta);
    Matrix dg = unstack(sys.stacked_jacobians().col(j), sys.n(), sys.q());
    if (centered) {
        g.rowwise() -= g.colwise().mean();
        dg.rowwise() -= dg.colwise().mean();
    }
    const Matrix upsilon = (g.transpose() * dg) / static_cast<double>(sys.n());
    return upsilon + upsilon.transpose();
}

LinearMomentSystem build_iv_system(const Vector& y, const Matrix& X, const Matrix& Z) {
    const Index n = y.size(), k = X.cols(), q = Z.cols();
    if (X.rows() != n || Z.rows() != n) dimension_error("y, X and Z must have the same number of rows");
    if (k < 1 || q < k) dimension_error("IV system needs at least as many instruments as regressors");
    if (n <= q) dimension_error("IV system needs more observations than instruments");
    if (!y.allFinite() || !X.allFinite() || !Z.allFinite())
        throw Error(ErrorCode::InvalidArgument, "IV data contains non-finite values");

    const Matrix ztz = Z.transpose() * Z;
    const double cond = condition_number_sym(ztz);
    if (!(cond <= kMaxCondition))
        throw Error(ErrorCode::RankDeficient, "instrument cross-product Z'Z is rank deficient", cond);

    Matrix h(n, q);
    Matrix jac(n * q, k);
    Matrix w(n * q, q);
    for (Index i = 0; i < n; ++i) {
        const auto zi = Z.row(i).transpose();
        h.row(i) = Z.row(i) * y(i);
        jac.middleRows(i * q, q).noalias() = -zi * X.row(i);
        w.middleRows(i * q, q).noalias() = zi * zi.transpose();
    }
    return LinearMomentSystem(std::move(h), std::move(jac), std::move(w));
}

Matrix difference_covariance(Index periods) {
    Matrix H = Matrix::Zero(periods, periods);
    for (Index r = 0; r < periods; ++r) {
        H(r, r) = 2.0;
        if (r + 1 < periods) H(r, r + 1) = H(r + 1, r) = -1.0;
    }
    return H;
}

Index ab_moment_count(Index T, PanelMode mode) {
    const Index p = mode == PanelMode::Ar1 ? T - 1 : T;
    return p * (p - 1) / 2;
}

namespace {

// Predetermined-regressor first-difference moments over P periods of
// (outcome, regressor) columns.
LinearMomentSystem build_predetermined(const Matrix& y, const Matrix& x) {
    const Index N = y.rows(), P = y.cols(), D = P - 1, q = P * (P - 1) / 2;
    const Matrix H = difference_covariance(D);
    Matrix h(N, q);
    Matrix jac(N * q, 1);
    Matrix w(N * q, q);
    std::vector<int> ids(static_cast<std::size_t>(N));
    Matrix Zi(D, q);
    Vector dy(D), dx(D);
    for (Index i = 0; i < N; ++i) {
        Zi.setZero();
        for (Index r = 0; r < D; ++r) {
            dy(r) = y(i, r + 1) - y(i, r);
            dx(r) = x(i, r + 1) - x(i, r);
            const Index off = r * (r + 1) / 2;
            for (Index s = 0; s <= r; ++s) Zi(r, off + s) = x(i, s);
        }
        h.row(i) = (Zi.transpose() * dy).transpose();
        jac.middleRows(i * q, q) = -(Zi.transpose() * dx);
        w.middleRows(i * q, q).noalias() = Zi.transpose() * H * Zi;
        ids[static_cast<std::size_t>(i)] = static_cast<int>(i);
    }
    return LinearMomentSystem(std::move(h), std::move(jac), std::move(w), std::move(ids));
}

}  // namespace

LinearMomentSystem build_ab_system(const PanelDataset& panel, PanelMode mode) {
    const Index N = panel.N(), T = panel.T();
    if (T < 3) throw Error(ErrorCode::InvalidArgument, "panel needs at least 3 periods");
    if (!panel.y.allFinite()) throw Error(ErrorCode::Unbalanced, "panel outcome has missing cells (unbalanced panels are not supported)");
    if (mode == PanelMode::Predetermined) {
        if (panel.x.rows() != N || panel.x.cols() != T) dimension_error("panel x must be N x T like y");
        if (!panel.x.allFinite()) throw Error(ErrorCode::Unbalanced, "panel regressor has missing cells (unbalanced panels are not supported)");
        return build_predetermined(panel.y, panel.x);
    }
    // AR(1): outcome y_t (t = 2..T) on regressor y_{t-1}, i.e. the
    // predetermined layout over T-1 shifted periods.
    const Matrix outcome = panel.y.rightCols(T - 1);
    const Matrix lagged = panel.y.leftCols(T - 1);
    return build_predetermined(outcome, lagged);
}

}  // namespace gmmdc

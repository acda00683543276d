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
#pragma once

#include "gmmdc/linalg.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gmmdc {

/// Linear moment model g_i(theta) = h_i + G_i * theta over n observation
/// blocks. Per-observation Jacobians G_i (q x k) are stored stacked in one
/// (n*q) x k matrix, block i occupying rows [i*q, (i+1)*q); the optional
/// per-observation weight contributions W_i (q x q) are stacked the same way.
///
/// Immutable after construction.
class LinearMomentSystem {
public:
    LinearMomentSystem(Matrix h, Matrix jacobians, std::optional<Matrix> obs_weights = std::nullopt,
                       std::optional<std::vector<int>> cluster_id = std::nullopt);

    Index n() const noexcept { return h_.rows(); }
    Index q() const noexcept { return h_.cols(); }
    Index k() const noexcept { return jac_.cols(); }

    const Matrix& h() const noexcept { return h_; }
    const Matrix& stacked_jacobians() const noexcept { return jac_; }
    auto jacobian(Index i) const { return jac_.middleRows(i * q(), q()); }

    bool has_obs_weights() const noexcept { return w_obs_.has_value(); }
    auto obs_weight(Index i) const { return w_obs_->middleRows(i * q(), q()); }
    const std::optional<Matrix>& stacked_obs_weights() const noexcept { return w_obs_; }

    const std::optional<std::vector<int>>& cluster_id() const noexcept { return cluster_id_; }

    /// Sample means h_n, G_n and (when present) W_n = n^{-1} sum W_i.
    const Vector& h_mean() const noexcept { return h_mean_; }
    const Matrix& jacobian_mean() const noexcept { return g_mean_; }
    const Matrix& obs_weight_mean() const;

    /// n x q matrix whose row i is g_i(theta)'.
    Matrix moments(const Vector& theta) const;

    /// New system made of the given observation blocks (with repetition).
    LinearMomentSystem select(std::span<const Index> rows) const;

    /// Copy with every moment function multiplied by c (h, G and W scaled by
    /// c, c and c^2 respectively).
    LinearMomentSystem scaled(double c) const;

private:
    Matrix h_;
    Matrix jac_;
    std::optional<Matrix> w_obs_;
    std::optional<std::vector<int>> cluster_id_;
    Vector h_mean_;
    Matrix g_mean_;
    Matrix w_mean_;
};

/// Weight matrix recipe.
struct WeightSpec {
    enum class Kind { Identity, DataAverage, EfficientUncentered, EfficientCentered };

    Kind kind = Kind::DataAverage;
    Vector theta;  // evaluation point for the efficient kinds

    static WeightSpec identity() { return {Kind::Identity, {}}; }
    static WeightSpec data_average() { return {Kind::DataAverage, {}}; }
    static WeightSpec efficient(Vector theta, bool centered) {
        return {centered ? Kind::EfficientCentered : Kind::EfficientUncentered, std::move(theta)};
    }

    bool is_efficient() const noexcept {
        return kind == Kind::EfficientUncentered || kind == Kind::EfficientCentered;
    }
};

/// The q x q matrix a WeightSpec denotes for a given system.
Matrix weight_matrix(const LinearMomentSystem& sys, const WeightSpec& spec);

struct MomentStats {
    Vector g_n;       // n^{-1} sum g_i(theta)
    Matrix G_n;       // n^{-1} sum G_i
    Matrix omega;     // n^{-1} sum g_i g_i'
    Matrix omega_c;   // n^{-1} sum (g_i - g_n)(g_i - g_n)'
};

MomentStats moment_stats(const LinearMomentSystem& sys, const Vector& theta);

/// d Omega_n / d theta_j = Upsilon_j + Upsilon_j', with
/// Upsilon_j = n^{-1} sum g_i(theta) (G_i e_j)'. The centered variant uses
/// the centered moments and Jacobian columns.
Matrix omega_derivative(const LinearMomentSystem& sys, const Vector& theta, Index j, bool centered);

/// Moments Z_i (y_i - X_i' theta) for the linear IV model.
/// y: n, X: n x k, Z: n x q. W_i = Z_i Z_i' so DataAverage is Z'Z/n.
LinearMomentSystem build_iv_system(const Vector& y, const Matrix& X, const Matrix& Z);

struct PanelDataset {
    Matrix y;  // N x T
    Matrix x;  // N x T; unused for AR(1) models

    Index N() const noexcept { return y.rows(); }
    Index T() const noexcept { return y.cols(); }
};

enum class PanelMode {
    Predetermined,  // y_it = x_it beta + eta_i + v_it, instruments x_i1..x_i,t-1
    Ar1,            // y_it = rho y_i,t-1 + eta_i + v_it, instruments y_i1..y_i,t-2
};

/// Tridiagonal (2 on the diagonal, -1 next to it) covariance pattern of
/// first-differenced i.i.d. errors.
Matrix difference_covariance(Index periods);

/// First-differenced panel moments with block-diagonal lagged-level
/// instruments. One moment block per individual, so n() == N.
LinearMomentSystem build_ab_system(const PanelDataset& panel, PanelMode mode);

/// Number of instruments q for a balanced panel of T periods.
Index ab_moment_count(Index T, PanelMode mode);

}  // namespace gmmdc

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

#include "gmmdc/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace gmmdc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Condition numbers above this are treated as singular.
inline constexpr double kMaxCondition = 1e12;

/// Ratio of extreme absolute eigenvalues of a symmetric matrix; +inf when the
/// smallest is zero.
double condition_number_sym(const Matrix& a);

/// 2-norm condition number of a general square matrix (via SVD).
double condition_number(const Matrix& a);

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Cholesky factorization of a symmetric positive definite matrix. Solves are
/// followed by one step of iterative refinement against the original matrix.
class SpdFactor {
public:
    SpdFactor() = default;

    /// Throws Error(code) when the matrix is not numerically positive definite
    /// or its condition number exceeds kMaxCondition.
    SpdFactor(const Matrix& a, ErrorCode code, const char* what);

    template <typename Derived>
    Matrix solve(const Eigen::MatrixBase<Derived>& b) const {
        Matrix x = llt_.solve(b);
        Matrix r = b - a_ * x;
        x += llt_.solve(r);
        return x;
    }

    /// The inverse itself; only for reporting and small k x k use.
    Matrix inverse() const { return solve(Matrix::Identity(a_.rows(), a_.cols())); }

    const Matrix& matrix() const noexcept { return a_; }
    double condition() const noexcept { return cond_; }
    Index size() const noexcept { return a_.rows(); }

private:
    Matrix a_;
    Eigen::LLT<Matrix> llt_;
    double cond_ = 1.0;
};

/// LU factorization of a general square matrix with the same refinement step.
class LuFactor {
public:
    LuFactor() = default;
    LuFactor(const Matrix& a, ErrorCode code, const char* what);

    template <typename Derived>
    Matrix solve(const Eigen::MatrixBase<Derived>& b) const {
        Matrix x = lu_.solve(b);
        Matrix r = b - a_ * x;
        x += lu_.solve(r);
        return x;
    }

    /// Solves x * A = b, i.e. returns b * A^{-1}.
    template <typename Derived>
    Matrix solve_right(const Eigen::MatrixBase<Derived>& b) const {
        Matrix bt = b.transpose();
        Matrix xt = lu_t_.solve(bt);
        Matrix r = bt - a_.transpose() * xt;
        xt += lu_t_.solve(r);
        return xt.transpose();
    }

    double condition() const noexcept { return cond_; }

private:
    Matrix a_;
    Eigen::PartialPivLU<Matrix> lu_;
    Eigen::PartialPivLU<Matrix> lu_t_;
    double cond_ = 1.0;
};

}  // namespace gmmdc

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
#include "gmmdc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

namespace gmmdc {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::Unbalanced: return "Unbalanced";
    case ErrorCode::SingularWeight: return "SingularWeight";
    case ErrorCode::SingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorCode::IllConditionedCorrection: return "IllConditionedCorrection";
    case ErrorCode::DegenerateStandardError: return "DegenerateStandardError";
    case ErrorCode::JNotDefined: return "JNotDefined";
    case ErrorCode::TooFewUnits: return "TooFewUnits";
    case ErrorCode::AllResamplesFailed: return "AllResamplesFailed";
    case ErrorCode::AllReplicationsFailed: return "AllReplicationsFailed";
    }
    return "Unknown";
}

double condition_number_sym(const Matrix& a) {
    if (a.rows() == 1) return a(0, 0) != 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    const auto ev = es.eigenvalues().cwiseAbs();
    const double lo = ev.minCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return ev.maxCoeff() / lo;
}

double condition_number(const Matrix& a) {
    if (a.rows() == 1) return a(0, 0) != 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& s = svd.singularValues();
    const double lo = s(s.size() - 1);
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return s(0) / lo;
}

namespace {

[[noreturn]] void fail(ErrorCode code, const char* what, double cond) {
    std::ostringstream msg;
    msg << what << " (condition number " << cond << ")";
    throw Error(code, msg.str(), cond);
}

}  // namespace

SpdFactor::SpdFactor(const Matrix& a, ErrorCode code, const char* what) : a_(symmetrize(a)) {
    if (!a_.allFinite()) fail(code, what, std::numeric_limits<double>::infinity());
    llt_.compute(a_);
    if (a_.rows() == 1) {
        cond_ = 1.0;
        if (!(a_(0, 0) > 0.0)) fail(code, what, std::numeric_limits<double>::infinity());
        return;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a_, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double lo = ev(0);
    const double hi = ev(ev.size() - 1);
    cond_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (llt_.info() != Eigen::Success || !(lo > 0.0) || cond_ > kMaxCondition) fail(code, what, cond_);
}

LuFactor::LuFactor(const Matrix& a, ErrorCode code, const char* what) : a_(a) {
    if (!a_.allFinite()) fail(code, what, std::numeric_limits<double>::infinity());
    cond_ = condition_number(a_);
    if (!(cond_ <= kMaxCondition)) fail(code, what, cond_);
    lu_.compute(a_);
    lu_t_.compute(a_.transpose());
}

}  // namespace gmmdc

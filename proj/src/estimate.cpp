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
#include "gmmdc/estimate.hpp"

namespace gmmdc {

const char* to_string(EstimatorKind kind) noexcept {
    switch (kind) {
    case EstimatorKind::OneStep: return "one-step";
    case EstimatorKind::TwoStep: return "two-step";
    case EstimatorKind::Iterated: return "iterated";
    }
    return "unknown";
}

void FitPlan::validate() const {
    if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "iteration tolerance must be positive");
    if (max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be at least 1");
    if (w0.is_efficient() && w0.theta.size() == 0)
        throw Error(ErrorCode::InvalidArgument, "efficient initial weight needs an evaluation point");
}

NormalEquations::NormalEquations(const Matrix& G_n, const Matrix& weight)
    : weight_(weight, ErrorCode::SingularWeight, "weight matrix is not positive definite") {
    if (weight.rows() != G_n.rows() || weight.cols() != G_n.rows())
        throw Error(ErrorCode::DimensionMismatch, "weight matrix must be q x q");
    xi_g_ = weight_.solve(G_n);
    normal_ = SpdFactor(G_n.transpose() * xi_g_, ErrorCode::SingularNormalMatrix,
                        "normal matrix G'Xi^{-1}G is singular");
}

Vector NormalEquations::minimizer(const Vector& h_n) const {
    return -normal_.solve(xi_g_.transpose() * h_n);
}

Vector solve_weighted(const LinearMomentSystem& sys, const Matrix& weight) {
    return NormalEquations(sys.jacobian_mean(), weight).minimizer(sys.h_mean());
}

GmmFit fit(const LinearMomentSystem& sys, const FitPlan& plan) {
    plan.validate();
    GmmFit out;
    out.plan = plan;

    Matrix w = weight_matrix(sys, plan.w0);
    Vector theta = solve_weighted(sys, w);
    out.steps.push_back({theta, std::move(w), plan.w0});
    out.iterations = 1;

    if (plan.kind == EstimatorKind::TwoStep) {
        WeightSpec spec = WeightSpec::efficient(theta, plan.centered);
        Matrix omega = weight_matrix(sys, spec);
        theta = solve_weighted(sys, omega);
        out.steps.push_back({theta, std::move(omega), std::move(spec)});
        out.iterations = 2;
    } else if (plan.kind == EstimatorKind::Iterated) {
        out.converged = false;
        for (int s = 0; s < plan.max_iter; ++s) {
            const Vector prev = theta;
            WeightSpec spec = WeightSpec::efficient(prev, plan.centered);
            Matrix omega = weight_matrix(sys, spec);
            theta = solve_weighted(sys, omega);
            out.steps.push_back({theta, std::move(omega), std::move(spec)});
            ++out.iterations;
            if ((theta - prev).norm() < plan.tol * (1.0 + prev.norm())) {
                out.converged = true;
                break;
            }
        }
    }

    out.theta = theta;
    out.g_n_hat = moment_stats(sys, theta).g_n;
    return out;
}

}  // namespace gmmdc

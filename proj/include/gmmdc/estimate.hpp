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

#include "gmmdc/linmoment.hpp"

#include <vector>

namespace gmmdc {

enum class EstimatorKind { OneStep, TwoStep, Iterated };

const char* to_string(EstimatorKind kind) noexcept;

struct FitPlan {
    EstimatorKind kind = EstimatorKind::TwoStep;
    WeightSpec w0 = WeightSpec::data_average();
    bool centered = false;  // efficient steps use the centered Omega
    double tol = 1e-8;      // iterated: relative to 1 + ||theta_{s-1}||
    int max_iter = 1000;

    void validate() const;
};

/// One estimation step: the estimate and the weight matrix it minimized with.
struct FitStep {
    Vector theta;
    Matrix weight;
    WeightSpec source;
};

struct GmmFit {
    Vector theta;
    std::vector<FitStep> steps;  // steps[0] is the one-step fit
    Vector g_n_hat;              // g_n(theta)
    bool converged = true;
    int iterations = 0;
    FitPlan plan;

    const FitStep& final_step() const { return steps.back(); }
};

/// Factorized normal equations of the criterion g_n(theta)' Xi^{-1} g_n(theta).
class NormalEquations {
public:
    NormalEquations(const Matrix& G_n, const Matrix& weight);

    const SpdFactor& weight() const noexcept { return weight_; }
    const SpdFactor& normal() const noexcept { return normal_; }
    /// Xi^{-1} G_n (q x k).
    const Matrix& weighted_jacobian() const noexcept { return xi_g_; }

    /// Minimizer -(G' Xi^{-1} G)^{-1} G' Xi^{-1} h_n.
    Vector minimizer(const Vector& h_n) const;

private:
    SpdFactor weight_;
    Matrix xi_g_;
    SpdFactor normal_;
};

/// Exact minimizer of g_n(theta)' Xi^{-1} g_n(theta) for a linear system.
/// Throws SingularWeight / SingularNormalMatrix.
Vector solve_weighted(const LinearMomentSystem& sys, const Matrix& weight);

/// One-step, two-step or iterated GMM. Iterated starts from the one-step
/// estimate; hitting max_iter returns the last iterate with converged=false.
GmmFit fit(const LinearMomentSystem& sys, const FitPlan& plan);

}  // namespace gmmdc

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

#include "gmmdc/estimate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gmmdc {

/// Variance matrices are for sqrt(n)(theta_hat - theta_0); standard errors
/// are sqrt(diag(V / n)).
struct VarianceReport {
    Matrix V_conv;
    std::optional<Matrix> V_w;  // two-step and iterated only
    Matrix V_dc;
    Matrix D_hat;                 // zero for one-step fits
    Matrix Sigma_n;
    std::optional<Matrix> C_hat;  // two-step only
    Vector se_conv;
    std::optional<Vector> se_w;
    Vector se_dc;
    std::vector<std::string> warnings;
};

/// Influence contributions, row i = m_i(theta, Xi)'. The per-observation
/// weight pieces Xi_i come from `source`: dropped for Identity, W_i for
/// DataAverage, (centered) outer products of g_i(phi) for efficient weights.
Matrix m_contributions(const LinearMomentSystem& sys, const Vector& theta, const Matrix& weight,
                       const WeightSpec& source);

/// Column j: (G'Xi^{-1}G)^{-1} G' Xi^{-1} dOmega_j(theta_weight) Xi^{-1} g_n(theta_eval).
Matrix d_hat(const LinearMomentSystem& sys, const Vector& theta_weight, const Vector& theta_eval,
             const Matrix& weight, bool centered);

/// Conventional, Windmeijer and doubly corrected variances for a fit of sys.
/// Throws IllConditionedCorrection when I - D_hat is near singular (iterated).
VarianceReport variance_report(const LinearMomentSystem& sys, const GmmFit& fit);

}  // namespace gmmdc

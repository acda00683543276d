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

/// Truncated geometric series sum_{j=0..order} (-n^{-1/2} X^{-1} Y)^j X^{-1}
/// approximating (X + n^{-1/2} Y)^{-1}.
Matrix neumann_inverse(const Matrix& X, const Matrix& Y, double n, int order);

/// Population quantities of a locally misspecified moment model whose
/// moment mean at theta0 is delta / sqrt(n).
struct ExpansionTruth {
    Matrix G;                     // q x k
    Matrix W;                     // q x q one-step weight limit
    Matrix Omega;                 // q x q
    std::vector<Matrix> dOmega;   // k slices, dOmega/dtheta_j at theta0
    Vector delta;                 // q
    Vector theta0;                // k

    void validate(Index q, Index k) const;
};

/// First-order (eta, psi0) and n^{-1/2} terms of sqrt(n)(theta_hat - theta0).
/// One-step expansions leave D, C_tilde and the H matrices at zero.
struct ExpansionTerms {
    Vector eta;
    Vector psi0;
    Vector psi1;
    Vector q_term;
    Matrix B_term;
    Matrix D;
    Matrix C_tilde;
    Matrix H_eta;
    Matrix H_psi0;
    // Two-step only: the one-step terms that feed the expansion.
    Vector eta_w;
    Vector psi_w0;
    Vector psi_w1;
    Vector predicted;
};

/// One-step terms. The sample's one-step weight is its DataAverage W_n when
/// it carries observation weights, otherwise the identity.
ExpansionTerms onestep_expansion(const LinearMomentSystem& sample, const ExpansionTruth& truth);

/// Two-step terms with the uncentered Omega_n(theta0) deviation.
ExpansionTerms twostep_expansion(const LinearMomentSystem& sample, const ExpansionTruth& truth);

}  // namespace gmmdc

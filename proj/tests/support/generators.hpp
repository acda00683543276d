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

#include <cstdint>
#include <random>

namespace gmmdc::testing {

// Random inputs for property tests. Each generator takes its own engine so a
// failing case can be replayed from the seed alone.
using Engine = std::mt19937_64;

struct IvData {
    Vector y;
    Matrix X;
    Matrix Z;
};

struct IvShape {
    Index n_min = 40, n_max = 300;
    Index k_min = 1, k_max = 3;
    Index extra_min = 0, extra_max = 4;  // q - k
    double misspec = 0.3;                // scale of E[z e] violations
};

IvData random_iv(Engine& eng, const IvShape& shape = {});

/// Over-identified when q > k; just-identified with IvShape{.., extra 0..0}.
LinearMomentSystem random_iv_system(Engine& eng, const IvShape& shape = {});

/// Balanced panel with a predetermined regressor (feedback from past errors).
PanelDataset random_panel(Engine& eng, Index N_min = 60, Index N_max = 200, Index T_min = 3, Index T_max = 6);

/// Generic system with q x k Jacobian blocks and random observation weights.
LinearMomentSystem random_generic_system(Engine& eng, Index n, Index q, Index k);

/// Random symmetric positive definite matrix with moderate condition number.
Matrix random_spd(Engine& eng, Index d);

Matrix random_normal(Engine& eng, Index rows, Index cols);

}  // namespace gmmdc::testing

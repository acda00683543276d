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

#include "gmmdc/inference.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gmmdc {

enum class DesignKind {
    IvLocal,          // cross-section IV with a local instrument violation
    PanelRandomCoef,  // AR(1) panel with individual-specific coefficients
    PanelLagMiss,     // static panel with an omitted lagged regressor
};

const char* to_string(DesignKind kind) noexcept;

struct Design {
    DesignKind kind = DesignKind::IvLocal;
    Index n = 100;  // observations (IV) or individuals (panels)
    Index T = 4;    // panels only
    double alpha0 = 0.0;
};

/// Random stream identity of one replication.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t rep = 0;
};

struct IvSample {
    Vector y;
    Matrix X;  // n x 1
    Matrix Z;  // n x 4
};

inline constexpr double kIvPi0 = 0.25;

/// x = 0.25 * sum(z) + u, e = (alpha0 / sqrt(n)) (z1 - z2 + z3 - z4) + 0.5 u
/// + sqrt(0.75) z1 xi, y = x + e. `fixed` drops the 1/sqrt(n).
IvSample dgp_iv(Index n, double alpha0, StreamKey key, bool fixed = false);

/// rho_i = Phi(alpha0 eta_i), stationary start, y_it = rho_i y_i,t-1 + eta_i + nu_it.
PanelDataset dgp_panel_rc(Index N, Index T, double alpha0, StreamKey key);

/// y_it = x_it + alpha0 x_i,t-1 + eta_i + v_it with heteroskedastic skewed
/// v_it and feedback from v_i,t-1 into x_it; 50 burn-in periods.
PanelDataset dgp_panel_lag(Index N, Index T, double alpha0, StreamKey key);

/// Value the t tests are centred on: the alpha0 = 0 truth of the design.
double design_truth(DesignKind kind) noexcept;

struct BootstrapSpec {
    int B = 499;
    std::array<bool, 3> estimators{true, true, false};  // one, two, iterated
};

struct StudyConfig {
    Design design;
    int replications = 1000;
    std::array<bool, 3> estimators{true, true, true};  // one, two, iterated
    std::optional<BootstrapSpec> bootstrap;
    std::uint64_t seed = 1;
    bool fixed_misspec = false;  // IvLocal: fixed rather than drifting violation
    bool centered = false;

    void validate() const;
};

/// Moment system of replication `rep` under cfg, drawn from stream (seed, rep).
LinearMomentSystem draw_system(const StudyConfig& cfg, std::uint64_t rep);

struct EstimatorSummary {
    EstimatorKind kind = EstimatorKind::TwoStep;
    double mean_theta = 0.0;
    double sd_theta = 0.0;
    double mean_se_conv = 0.0;
    std::optional<double> mean_se_w;
    double mean_se_dc = 0.0;
    double rej_conv = 0.0;
    std::optional<double> rej_w;
    double rej_dc = 0.0;
    std::optional<double> rej_boot;
    std::optional<double> rej_j;  // empty when just-identified
};

struct StudySummary {
    StudyConfig config;
    double truth = 0.0;
    int completed = 0;  // replications that entered the averages
    int failures = 0;
    bool sd_defined = true;     // false with a single completed replication
    bool failure_flag = false;  // failure rate above 0.1%
    std::vector<EstimatorSummary> estimators;
    std::vector<std::string> warnings;

    const EstimatorSummary& at(EstimatorKind kind) const;
};

struct RunOptions {
    int threads = 1;
    /// Called with (done, total) from worker threads, serialized.
    std::function<void(int, int)> progress;
};

/// Runs all replications; the summary does not depend on options.threads.
/// Throws AllReplicationsFailed when no replication succeeds.
StudySummary run_study(const StudyConfig& cfg, const RunOptions& options = {});

}  // namespace gmmdc

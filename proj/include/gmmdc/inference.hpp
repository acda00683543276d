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

#include "gmmdc/variance.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gmmdc {

enum class SeKind { Conventional, Windmeijer, DoublyCorrected };

const char* to_string(SeKind kind) noexcept;

struct TestResult {
    double statistic = 0.0;
    std::optional<int> df;  // chi-square degrees of freedom; empty for t tests
    double p_value = 1.0;
    bool reject_5pct = false;
    double ci_lower = 0.0;  // t tests only; NaN for J
    double ci_upper = 0.0;
};

struct BootstrapResult {
    int B = 0;
    std::vector<double> t_star;  // NaN where the resample failed
    double crit_abs = 0.0;
    double t_original = 0.0;
    bool reject_5pct = false;
    int failures = 0;
    std::vector<std::string> warnings;
};

inline constexpr double kZ975 = 1.959963984540054;

/// Standard error of coefficient `coef` of the given kind; throws
/// InvalidArgument when that kind is not available (V_w for one-step).
double standard_error(const VarianceReport& report, SeKind kind, Index coef);

/// Two-sided normal-reference t test and 95% CI. Zero se raises
/// DegenerateStandardError.
TestResult t_test(const GmmFit& fit, const VarianceReport& report, SeKind kind, Index coef, double null_value);

/// Hansen J statistic with the efficient weight of the final step
/// (Omega_n at the one-step estimate for one-step fits).
TestResult j_test(const LinearMomentSystem& sys, const GmmFit& fit);

/// Upper order-statistic critical value: the ceil((m+1)(1-alpha))-th
/// smallest |t*| over the m finite entries.
double symmetric_critical_value(const std::vector<double>& t_star, double alpha = 0.05);

/// Resampling units: one per cluster (in order of first appearance) when
/// the system carries cluster ids, else one per row.
std::vector<std::vector<Index>> resampling_units(const LinearMomentSystem& sys);

/// Percentile-t bootstrap studentized by the doubly corrected se, without
/// recentering. Replication b draws from the stream keyed by (seed, b), so
/// results do not depend on `threads`.
BootstrapResult mr_bootstrap(const LinearMomentSystem& sys, const FitPlan& plan, Index coef, int B,
                             std::uint64_t seed, double null_value = 0.0, int threads = 1);

}  // namespace gmmdc

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
#include "gmmdc/inference.hpp"

#include "gmmdc/rng.hpp"
#include "parallel.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

namespace gmmdc {

const char* to_string(SeKind kind) noexcept {
    switch (kind) {
    case SeKind::Conventional: return "conv";
    case SeKind::Windmeijer: return "w";
    case SeKind::DoublyCorrected: return "dc";
    }
    return "unknown";
}

double standard_error(const VarianceReport& report, SeKind kind, Index coef) {
    if (coef < 0 || coef >= report.se_dc.size()) throw Error(ErrorCode::InvalidArgument, "coefficient index out of range");
    switch (kind) {
    case SeKind::Conventional: return report.se_conv(coef);
    case SeKind::Windmeijer:
        if (!report.se_w) throw Error(ErrorCode::InvalidArgument, "Windmeijer standard errors are not defined for one-step fits");
        return (*report.se_w)(coef);
    case SeKind::DoublyCorrected: return report.se_dc(coef);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown standard error kind");
}

TestResult t_test(const GmmFit& fit, const VarianceReport& report, SeKind kind, Index coef, double null_value) {
    const double se = standard_error(report, kind, coef);
    if (!(se > 0.0) || !std::isfinite(se)) {
        std::ostringstream msg;
        msg << "standard error of coefficient " << coef << " is degenerate (" << se << ")";
        throw Error(ErrorCode::DegenerateStandardError, msg.str());
    }
    const double est = fit.theta(coef);
    TestResult r;
    r.statistic = (est - null_value) / se;
    r.p_value = std::min(1.0, std::erfc(std::abs(r.statistic) / std::sqrt(2.0)));
    r.reject_5pct = r.p_value < 0.05;
    r.ci_lower = est - kZ975 * se;
    r.ci_upper = est + kZ975 * se;
    return r;
}

TestResult j_test(const LinearMomentSystem& sys, const GmmFit& fit) {
    const int df = static_cast<int>(sys.q() - sys.k());
    if (df == 0) throw Error(ErrorCode::JNotDefined, "J test is not defined for a just-identified system");
    Matrix weight;
    switch (fit.plan.kind) {
    case EstimatorKind::OneStep:
        weight = weight_matrix(sys, WeightSpec::efficient(fit.steps.front().theta, fit.plan.centered));
        break;
    case EstimatorKind::TwoStep:
        weight = fit.steps.at(1).weight;
        break;
    case EstimatorKind::Iterated:
        weight = weight_matrix(sys, WeightSpec::efficient(fit.theta, fit.plan.centered));
        break;
    }
    const SpdFactor xi(weight, ErrorCode::SingularWeight, "J-test weight matrix is not positive definite");
    const Vector& g = fit.g_n_hat;
    TestResult r;
    r.statistic = std::max(0.0, static_cast<double>(sys.n()) * g.dot(xi.solve(g).col(0)));
    r.df = df;
    r.p_value = boost::math::gamma_q(0.5 * df, 0.5 * r.statistic);
    r.reject_5pct = r.p_value < 0.05;
    r.ci_lower = r.ci_upper = std::numeric_limits<double>::quiet_NaN();
    return r;
}

double symmetric_critical_value(const std::vector<double>& t_star, double alpha) {
    std::vector<double> a;
    a.reserve(t_star.size());
    for (double t : t_star)
        if (std::isfinite(t)) a.push_back(std::abs(t));
    if (a.empty()) throw Error(ErrorCode::AllResamplesFailed, "no usable bootstrap statistics");
    const double m = static_cast<double>(a.size());
    auto rank = static_cast<std::size_t>(std::ceil((m + 1.0) * (1.0 - alpha) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, a.size());
    std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(rank - 1), a.end());
    return a[rank - 1];
}

std::vector<std::vector<Index>> resampling_units(const LinearMomentSystem& sys) {
    std::vector<std::vector<Index>> units;
    if (!sys.cluster_id()) {
        units.resize(static_cast<std::size_t>(sys.n()));
        for (Index i = 0; i < sys.n(); ++i) units[static_cast<std::size_t>(i)] = {i};
        return units;
    }
    std::unordered_map<int, std::size_t> slot;
    const auto& ids = *sys.cluster_id();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto [it, fresh] = slot.try_emplace(ids[i], units.size());
        if (fresh) units.emplace_back();
        units[it->second].push_back(static_cast<Index>(i));
    }
    return units;
}

BootstrapResult mr_bootstrap(const LinearMomentSystem& sys, const FitPlan& plan, Index coef, int B,
                             std::uint64_t seed, double null_value, int threads) {
    if (B < 99) throw Error(ErrorCode::InvalidArgument, "bootstrap needs B >= 99");
    if (coef < 0 || coef >= sys.k()) throw Error(ErrorCode::InvalidArgument, "coefficient index out of range");
    const auto units = resampling_units(sys);
    if (units.size() < 10) throw Error(ErrorCode::TooFewUnits, "bootstrap needs at least 10 resampling units");

    const GmmFit base = fit(sys, plan);
    const VarianceReport base_report = variance_report(sys, base);
    const double theta_hat = base.theta(coef);

    BootstrapResult out;
    out.B = B;
    out.t_original = t_test(base, base_report, SeKind::DoublyCorrected, coef, null_value).statistic;
    out.t_star.assign(static_cast<std::size_t>(B), std::numeric_limits<double>::quiet_NaN());

    detail::parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
        CounterRng rng(seed, b);
        std::uniform_int_distribution<std::size_t> pick(0, units.size() - 1);
        std::vector<Index> rows;
        rows.reserve(static_cast<std::size_t>(sys.n()));
        for (std::size_t u = 0; u < units.size(); ++u) {
            const auto& unit = units[pick(rng)];
            rows.insert(rows.end(), unit.begin(), unit.end());
        }
        try {
            const LinearMomentSystem star = sys.select(rows);
            const GmmFit f = fit(star, plan);
            const VarianceReport rep = variance_report(star, f);
            const double se = rep.se_dc(coef);
            if (se > 0.0 && std::isfinite(se)) out.t_star[b] = (f.theta(coef) - theta_hat) / se;
        } catch (const Error& e) {
            if (!e.numerical() && e.code() != ErrorCode::DimensionMismatch) throw;
        }
    });

    for (double t : out.t_star)
        if (!std::isfinite(t)) ++out.failures;
    if (out.failures == B) throw Error(ErrorCode::AllResamplesFailed, "every bootstrap resample was degenerate");
    out.crit_abs = symmetric_critical_value(out.t_star, 0.05);
    out.reject_5pct = std::abs(out.t_original) > out.crit_abs;
    if (out.failures >= 0.05 * B) {
        std::ostringstream msg;
        msg << out.failures << " of " << B << " bootstrap resamples were degenerate; the critical value may be unreliable";
        out.warnings.push_back(msg.str());
    }
    return out;
}

}  // namespace gmmdc

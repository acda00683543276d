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
#include "gmmdc/montecarlo.hpp"

#include "gmmdc/rng.hpp"
#include "parallel.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>

namespace gmmdc {

const char* to_string(DesignKind kind) noexcept {
    switch (kind) {
    case DesignKind::IvLocal: return "iv";
    case DesignKind::PanelRandomCoef: return "panel-rc";
    case DesignKind::PanelLagMiss: return "panel-lag";
    }
    return "unknown";
}

double design_truth(DesignKind kind) noexcept { return kind == DesignKind::PanelRandomCoef ? 0.5 : 1.0; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Variable blocks of the counter-based streams.
enum Block : std::uint32_t { kB0 = 0, kB1, kB2, kB3, kB4 };

CounterRng stream(StreamKey key, std::uint32_t block) { return CounterRng(key.seed, key.rep, block); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Compensated (Neumaier) running sum.
class Sum {
public:
    void add(double x) {
        const double t = s_ + x;
        c_ += std::abs(s_) >= std::abs(x) ? (s_ - t) + x : (x - t) + s_;
        s_ = t;
    }
    double value() const { return s_ + c_; }

private:
    double s_ = 0.0, c_ = 0.0;
};

}  // namespace

IvSample dgp_iv(Index n, double alpha0, StreamKey key, bool fixed) {
    if (n < 10) throw Error(ErrorCode::InvalidArgument, "IV design needs n >= 10");
    CounterRng rz = stream(key, kB0), ru = stream(key, kB1), rv = stream(key, kB2);
    std::normal_distribution<double> nz, nu, nv;
    const double scale = fixed ? alpha0 : alpha0 / std::sqrt(static_cast<double>(n));
    const double sv = std::sqrt(0.75);
    IvSample s;
    s.y.resize(n);
    s.X.resize(n, 1);
    s.Z.resize(n, 4);
    for (Index i = 0; i < n; ++i) {
        for (Index c = 0; c < 4; ++c) s.Z(i, c) = nz(rz);
        const double u = nu(ru);
        const double v = s.Z(i, 0) * nv(rv);
        const double x = kIvPi0 * s.Z.row(i).sum() + u;
        const double e = scale * (s.Z(i, 0) - s.Z(i, 1) + s.Z(i, 2) - s.Z(i, 3)) + 0.5 * u + sv * v;
        s.X(i, 0) = x;
        s.y(i) = x + e;
    }
    return s;
}

PanelDataset dgp_panel_rc(Index N, Index T, double alpha0, StreamKey key) {
    if (T < 3) throw Error(ErrorCode::InvalidArgument, "panel design needs T >= 3");
    if (N < 1) throw Error(ErrorCode::InvalidArgument, "panel design needs N >= 1");
    CounterRng re = stream(key, kB0), rnu = stream(key, kB1), ru = stream(key, kB2);
    std::normal_distribution<double> ne, nnu(0.0, 0.5), nu;
    PanelDataset p;
    p.y.resize(N, T);
    for (Index i = 0; i < N; ++i) {
        const double eta = ne(re);
        const double rho = normal_cdf(alpha0 * eta);
        p.y(i, 0) = eta / (1.0 - rho) + nu(ru) / std::sqrt(1.0 - rho * rho);
        for (Index t = 1; t < T; ++t) p.y(i, t) = rho * p.y(i, t - 1) + eta + nnu(rnu);
    }
    return p;
}

PanelDataset dgp_panel_lag(Index N, Index T, double alpha0, StreamKey key) {
    if (T < 2) throw Error(ErrorCode::InvalidArgument, "panel design needs T >= 2");
    if (N < 1) throw Error(ErrorCode::InvalidArgument, "panel design needs N >= 1");
    constexpr Index burn = 50;
    CounterRng re = stream(key, kB0), reps = stream(key, kB1), rw = stream(key, kB2), rd = stream(key, kB3),
               rx = stream(key, kB4);
    std::normal_distribution<double> ne, neps, nw, nx;
    std::uniform_real_distribution<double> ud(0.5, 1.5);
    const double sx = std::sqrt(1.0 / 0.75);
    PanelDataset p;
    p.y.resize(N, T);
    p.x.resize(N, T);
    for (Index i = 0; i < N; ++i) {
        const double eta = ne(re);
        const double delta = ud(rd);
        // Period index s runs over t = s - burn + 1, i.e. -49..T.
        double x_prev = 0.0, v_prev = 0.0;
        for (Index s = 0; s < burn + T; ++s) {
            const Index t = s - burn + 1;
            const double tau = t >= 1 ? 0.5 + 0.1 * static_cast<double>(t - 1) : 0.5;
            const double z = nw(rw);
            const double v = delta * tau * (z * z - 1.0);
            const double x = s == 0 ? eta / 0.5 + sx * nx(rx) : 0.5 * x_prev + eta + 0.5 * v_prev + neps(reps);
            if (t >= 1) {
                p.x(i, t - 1) = x;
                p.y(i, t - 1) = x + alpha0 * x_prev + eta + v;
            }
            x_prev = x;
            v_prev = v;
        }
    }
    return p;
}

void StudyConfig::validate() const {
    if (replications < 1) throw Error(ErrorCode::InvalidArgument, "replications must be at least 1");
    if (!estimators[0] && !estimators[1] && !estimators[2])
        throw Error(ErrorCode::InvalidArgument, "select at least one estimator");
    if (!std::isfinite(design.alpha0)) throw Error(ErrorCode::InvalidArgument, "alpha0 must be finite");
    if (design.kind == DesignKind::IvLocal) {
        if (design.n < 10) throw Error(ErrorCode::InvalidArgument, "IV design needs n >= 10");
    } else {
        if (design.T < 3) throw Error(ErrorCode::InvalidArgument, "panel designs need T >= 3");
        if (design.n < 10) throw Error(ErrorCode::InvalidArgument, "panel designs need N >= 10");
        const Index q = ab_moment_count(design.T, design.kind == DesignKind::PanelRandomCoef ? PanelMode::Ar1
                                                                                             : PanelMode::Predetermined);
        if (design.n <= q) throw Error(ErrorCode::InvalidArgument, "panel designs need N larger than the instrument count");
    }
    if (bootstrap && bootstrap->B < 99) throw Error(ErrorCode::InvalidArgument, "bootstrap needs B >= 99");
}

LinearMomentSystem draw_system(const StudyConfig& cfg, std::uint64_t rep) {
    const StreamKey key{cfg.seed, rep};
    const Design& d = cfg.design;
    switch (d.kind) {
    case DesignKind::IvLocal: {
        const IvSample s = dgp_iv(d.n, d.alpha0, key, cfg.fixed_misspec);
        return build_iv_system(s.y, s.X, s.Z);
    }
    case DesignKind::PanelRandomCoef:
        return build_ab_system(dgp_panel_rc(d.n, d.T, d.alpha0, key), PanelMode::Ar1);
    case DesignKind::PanelLagMiss:
        return build_ab_system(dgp_panel_lag(d.n, d.T, d.alpha0, key), PanelMode::Predetermined);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown design");
}

const EstimatorSummary& StudySummary::at(EstimatorKind kind) const {
    for (const auto& e : estimators)
        if (e.kind == kind) return e;
    throw Error(ErrorCode::InvalidArgument, std::string("estimator not part of the study: ") + to_string(kind));
}

namespace {

constexpr std::array<EstimatorKind, 3> kKinds{EstimatorKind::OneStep, EstimatorKind::TwoStep, EstimatorKind::Iterated};

// Per-replication, per-estimator values; NaN marks "not defined".
struct Draw {
    double theta = kNaN, se_conv = kNaN, se_w = kNaN, se_dc = kNaN;
    double rej_conv = kNaN, rej_w = kNaN, rej_dc = kNaN, rej_boot = kNaN, rej_j = kNaN;
};

struct RepResult {
    bool ok = false;
    std::array<Draw, 3> draws;
};

double flag(bool b) { return b ? 1.0 : 0.0; }

RepResult run_replication(const StudyConfig& cfg, std::uint64_t rep, double truth) {
    RepResult r;
    try {
        const LinearMomentSystem sys = draw_system(cfg, rep);
        for (std::size_t e = 0; e < kKinds.size(); ++e) {
            if (!cfg.estimators[e]) continue;
            FitPlan plan;
            plan.kind = kKinds[e];
            plan.centered = cfg.centered;
            const GmmFit f = fit(sys, plan);
            const VarianceReport v = variance_report(sys, f);
            Draw& d = r.draws[e];
            d.theta = f.theta(0);
            d.se_conv = v.se_conv(0);
            d.se_dc = v.se_dc(0);
            d.rej_conv = flag(t_test(f, v, SeKind::Conventional, 0, truth).reject_5pct);
            d.rej_dc = flag(t_test(f, v, SeKind::DoublyCorrected, 0, truth).reject_5pct);
            if (v.se_w) {
                d.se_w = (*v.se_w)(0);
                d.rej_w = flag(t_test(f, v, SeKind::Windmeijer, 0, truth).reject_5pct);
            }
            if (sys.q() > sys.k()) d.rej_j = flag(j_test(sys, f).reject_5pct);
            if (cfg.bootstrap && cfg.bootstrap->estimators[e]) {
                const std::uint64_t bseed = splitmix64(splitmix64(cfg.seed ^ 0x5bd1e995ull) + rep * 3 + e);
                d.rej_boot = flag(mr_bootstrap(sys, plan, 0, cfg.bootstrap->B, bseed, truth, 1).reject_5pct);
            }
        }
        r.ok = true;
    } catch (const Error&) {
        r.ok = false;
    }
    return r;
}

double mean_of(const std::vector<RepResult>& reps, std::size_t e, double Draw::*field) {
    Sum s;
    int m = 0;
    for (const auto& r : reps) {
        if (!r.ok) continue;
        s.add(r.draws[e].*field);
        ++m;
    }
    return s.value() / m;
}

std::optional<double> optional_mean(const std::vector<RepResult>& reps, std::size_t e, double Draw::*field) {
    for (const auto& r : reps)
        if (r.ok) {
            if (std::isnan(r.draws[e].*field)) return std::nullopt;
            break;
        }
    return mean_of(reps, e, field);
}

}  // namespace

StudySummary run_study(const StudyConfig& cfg, const RunOptions& options) {
    cfg.validate();
    const double truth = design_truth(cfg.design.kind);
    const auto total = static_cast<std::size_t>(cfg.replications);
    std::vector<RepResult> reps(total);

    std::mutex progress_mu;
    int done = 0;
    detail::parallel_for(total, options.threads, [&](std::size_t rep) {
        reps[rep] = run_replication(cfg, rep, truth);
        if (options.progress) {
            std::lock_guard<std::mutex> lock(progress_mu);
            options.progress(++done, cfg.replications);
        }
    });

    StudySummary s;
    s.config = cfg;
    s.truth = truth;
    for (const auto& r : reps) (r.ok ? s.completed : s.failures) += 1;
    if (s.completed == 0) throw Error(ErrorCode::AllReplicationsFailed, "every replication failed");
    s.sd_defined = s.completed > 1;
    s.failure_flag = s.failures > 0.001 * cfg.replications;
    if (s.failure_flag) {
        std::ostringstream msg;
        msg << s.failures << " of " << cfg.replications << " replications failed and were excluded";
        s.warnings.push_back(msg.str());
    }
    if (!s.sd_defined) s.warnings.push_back("single completed replication: sd reported as 0");

    for (std::size_t e = 0; e < kKinds.size(); ++e) {
        if (!cfg.estimators[e]) continue;
        EstimatorSummary es;
        es.kind = kKinds[e];
        es.mean_theta = mean_of(reps, e, &Draw::theta);
        if (s.sd_defined) {
            Sum ss;
            for (const auto& r : reps)
                if (r.ok) {
                    const double d = r.draws[e].theta - es.mean_theta;
                    ss.add(d * d);
                }
            es.sd_theta = std::sqrt(ss.value() / (s.completed - 1));
        }
        es.mean_se_conv = mean_of(reps, e, &Draw::se_conv);
        es.mean_se_w = optional_mean(reps, e, &Draw::se_w);
        es.mean_se_dc = mean_of(reps, e, &Draw::se_dc);
        es.rej_conv = mean_of(reps, e, &Draw::rej_conv);
        es.rej_w = optional_mean(reps, e, &Draw::rej_w);
        es.rej_dc = mean_of(reps, e, &Draw::rej_dc);
        es.rej_boot = optional_mean(reps, e, &Draw::rej_boot);
        es.rej_j = optional_mean(reps, e, &Draw::rej_j);
        s.estimators.push_back(es);
    }
    return s;
}

}  // namespace gmmdc

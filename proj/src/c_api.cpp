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
#include "gmmdc/gmmdc.h"

#include "gmmdc/montecarlo.hpp"

#include <cmath>
#include <limits>
#include <new>
#include <string>

using namespace gmmdc;

struct gmmdc_system {
    LinearMomentSystem sys;
};

struct gmmdc_fit {
    GmmFit fit;
};

struct gmmdc_report {
    VarianceReport report;
};

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct LastError {
    std::string message;
    double condition = 0.0;
};

thread_local LastError last_error;

gmmdc_status to_status(ErrorCode code) { return static_cast<gmmdc_status>(static_cast<int>(code) + 1); }

gmmdc_status fail(gmmdc_status status, std::string message, double condition = 0.0) {
    last_error.message = std::move(message);
    last_error.condition = condition;
    return status;
}

template <typename F>
gmmdc_status guard(F&& body) {
    try {
        body();
        last_error = {};
        return GMMDC_OK;
    } catch (const Error& e) {
        return fail(to_status(e.code()), e.what(), e.condition());
    } catch (const std::bad_alloc&) {
        return fail(GMMDC_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(GMMDC_E_INTERNAL, e.what());
    } catch (...) {
        return fail(GMMDC_E_INTERNAL, "unknown error");
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

Matrix row_major(const double* data, size_t rows, size_t cols) {
    return Eigen::Map<const RowMatrix>(data, static_cast<Index>(rows), static_cast<Index>(cols));
}

void copy_out(const Matrix& m, double* out, size_t len) {
    require(out != nullptr, "output buffer is NULL");
    if (len < static_cast<size_t>(m.size())) throw Error(ErrorCode::DimensionMismatch, "output buffer is too small");
    Eigen::Map<RowMatrix>(out, m.rows(), m.cols()) = m;
}

FitPlan to_plan(const gmmdc_plan* p) {
    require(p != nullptr, "plan is NULL");
    FitPlan plan;
    switch (p->estimator) {
    case GMMDC_ONE_STEP: plan.kind = EstimatorKind::OneStep; break;
    case GMMDC_TWO_STEP: plan.kind = EstimatorKind::TwoStep; break;
    case GMMDC_ITERATED: plan.kind = EstimatorKind::Iterated; break;
    default: throw Error(ErrorCode::InvalidArgument, "unknown estimator");
    }
    switch (p->weight) {
    case GMMDC_WEIGHT_DATA_AVERAGE: plan.w0 = WeightSpec::data_average(); break;
    case GMMDC_WEIGHT_IDENTITY: plan.w0 = WeightSpec::identity(); break;
    default: throw Error(ErrorCode::InvalidArgument, "unknown weight");
    }
    plan.centered = p->centered != 0;
    plan.tol = p->tol;
    plan.max_iter = p->max_iter;
    return plan;
}

SeKind to_se_kind(gmmdc_se_kind kind) {
    switch (kind) {
    case GMMDC_SE_CONV: return SeKind::Conventional;
    case GMMDC_SE_W: return SeKind::Windmeijer;
    case GMMDC_SE_DC: return SeKind::DoublyCorrected;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown standard error kind");
}

const Matrix* report_matrix(const VarianceReport& r, gmmdc_matrix_id id) {
    switch (id) {
    case GMMDC_V_CONV: return &r.V_conv;
    case GMMDC_V_W: return r.V_w ? &*r.V_w : nullptr;
    case GMMDC_V_DC: return &r.V_dc;
    case GMMDC_D_HAT: return &r.D_hat;
    case GMMDC_SIGMA_N: return &r.Sigma_n;
    case GMMDC_C_HAT: return r.C_hat ? &*r.C_hat : nullptr;
    }
    return nullptr;
}

void fill_test(const TestResult& t, gmmdc_test_result* out) {
    out->statistic = t.statistic;
    out->df = t.df ? *t.df : -1;
    out->p_value = t.p_value;
    out->reject_5pct = t.reject_5pct ? 1 : 0;
    out->ci_lower = t.ci_lower;
    out->ci_upper = t.ci_upper;
}

double or_nan(const std::optional<double>& v) { return v ? *v : kNaN; }

}  // namespace

extern "C" {

GMMDC_API const char* gmmdc_version(void) { return "1.0.0"; }

GMMDC_API const char* gmmdc_status_name(gmmdc_status status) {
    switch (status) {
    case GMMDC_OK: return "OK";
    case GMMDC_E_NOT_AVAILABLE: return "NotAvailable";
    case GMMDC_E_INTERNAL: return "Internal";
    default:
        if (status >= GMMDC_E_INVALID_ARGUMENT && status <= GMMDC_E_ALL_REPLICATIONS_FAILED)
            return to_string(static_cast<ErrorCode>(static_cast<int>(status) - 1));
        return "Unknown";
    }
}

GMMDC_API int gmmdc_status_is_numerical(gmmdc_status status) {
    if (status < GMMDC_E_INVALID_ARGUMENT || status > GMMDC_E_ALL_REPLICATIONS_FAILED) return 0;
    return Error(static_cast<ErrorCode>(static_cast<int>(status) - 1), "").numerical() ? 1 : 0;
}

GMMDC_API const char* gmmdc_last_error(void) { return last_error.message.c_str(); }

GMMDC_API double gmmdc_last_error_condition(void) { return last_error.condition; }

GMMDC_API gmmdc_status gmmdc_system_iv(const double* y, const double* X, const double* Z, size_t n, size_t k,
                                       size_t q, gmmdc_system** out) {
    return guard([&] {
        require(y && X && Z && out, "NULL argument");
        const Vector yv = Eigen::Map<const Vector>(y, static_cast<Index>(n));
        *out = new gmmdc_system{build_iv_system(yv, row_major(X, n, k), row_major(Z, n, q))};
    });
}

GMMDC_API gmmdc_status gmmdc_system_panel(const double* y, const double* x, size_t N, size_t T,
                                          gmmdc_panel_mode mode, gmmdc_system** out) {
    return guard([&] {
        require(y && out, "NULL argument");
        PanelDataset p;
        p.y = row_major(y, N, T);
        PanelMode m = PanelMode::Ar1;
        if (mode == GMMDC_PANEL_PREDETERMINED) {
            require(x != nullptr, "predetermined panels need x");
            p.x = row_major(x, N, T);
            m = PanelMode::Predetermined;
        } else {
            require(mode == GMMDC_PANEL_AR1, "unknown panel mode");
        }
        *out = new gmmdc_system{build_ab_system(p, m)};
    });
}

GMMDC_API gmmdc_status gmmdc_system_new(const double* h, const double* jacobians, const double* obs_weights,
                                        const int* cluster_id, size_t n, size_t q, size_t k, gmmdc_system** out) {
    return guard([&] {
        require(h && jacobians && out, "NULL argument");
        std::optional<Matrix> w;
        if (obs_weights) w = row_major(obs_weights, n * q, q);
        std::optional<std::vector<int>> ids;
        if (cluster_id) ids.emplace(cluster_id, cluster_id + n);
        *out = new gmmdc_system{
            LinearMomentSystem(row_major(h, n, q), row_major(jacobians, n * q, k), std::move(w), std::move(ids))};
    });
}

GMMDC_API void gmmdc_system_free(gmmdc_system* sys) { delete sys; }

GMMDC_API gmmdc_status gmmdc_system_dims(const gmmdc_system* sys, size_t* n, size_t* q, size_t* k) {
    return guard([&] {
        require(sys != nullptr, "system is NULL");
        if (n) *n = static_cast<size_t>(sys->sys.n());
        if (q) *q = static_cast<size_t>(sys->sys.q());
        if (k) *k = static_cast<size_t>(sys->sys.k());
    });
}

GMMDC_API void gmmdc_plan_default(gmmdc_plan* plan) {
    if (!plan) return;
    plan->estimator = GMMDC_TWO_STEP;
    plan->weight = GMMDC_WEIGHT_DATA_AVERAGE;
    plan->centered = 0;
    plan->tol = 1e-8;
    plan->max_iter = 1000;
}

GMMDC_API gmmdc_status gmmdc_fit_new(const gmmdc_system* sys, const gmmdc_plan* plan, gmmdc_fit** out) {
    return guard([&] {
        require(sys && out, "NULL argument");
        *out = new gmmdc_fit{fit(sys->sys, to_plan(plan))};
    });
}

GMMDC_API void gmmdc_fit_free(gmmdc_fit* fit) { delete fit; }

GMMDC_API size_t gmmdc_fit_k(const gmmdc_fit* fit) { return fit ? static_cast<size_t>(fit->fit.theta.size()) : 0; }

GMMDC_API gmmdc_status gmmdc_fit_theta(const gmmdc_fit* fit, double* out, size_t len) {
    return guard([&] {
        require(fit != nullptr, "fit is NULL");
        copy_out(fit->fit.theta, out, len);
    });
}

GMMDC_API gmmdc_status gmmdc_fit_g_n(const gmmdc_fit* fit, double* out, size_t len) {
    return guard([&] {
        require(fit != nullptr, "fit is NULL");
        copy_out(fit->fit.g_n_hat, out, len);
    });
}

GMMDC_API int gmmdc_fit_converged(const gmmdc_fit* fit) { return fit && fit->fit.converged ? 1 : 0; }

GMMDC_API int gmmdc_fit_iterations(const gmmdc_fit* fit) { return fit ? fit->fit.iterations : 0; }

GMMDC_API gmmdc_status gmmdc_report_new(const gmmdc_system* sys, const gmmdc_fit* fit, gmmdc_report** out) {
    return guard([&] {
        require(sys && fit && out, "NULL argument");
        *out = new gmmdc_report{variance_report(sys->sys, fit->fit)};
    });
}

GMMDC_API void gmmdc_report_free(gmmdc_report* report) { delete report; }

GMMDC_API int gmmdc_report_has(const gmmdc_report* report, gmmdc_matrix_id id) {
    return report && report_matrix(report->report, id) ? 1 : 0;
}

GMMDC_API gmmdc_status gmmdc_report_matrix(const gmmdc_report* report, gmmdc_matrix_id id, double* out, size_t len) {
    if (report && !report_matrix(report->report, id))
        return fail(GMMDC_E_NOT_AVAILABLE, "matrix is not defined for this fit");
    return guard([&] {
        require(report != nullptr, "report is NULL");
        copy_out(*report_matrix(report->report, id), out, len);
    });
}

GMMDC_API gmmdc_status gmmdc_report_se(const gmmdc_report* report, gmmdc_se_kind kind, double* out, size_t len) {
    if (report && kind == GMMDC_SE_W && !report->report.se_w)
        return fail(GMMDC_E_NOT_AVAILABLE, "Windmeijer standard errors are not defined for one-step fits");
    return guard([&] {
        require(report != nullptr, "report is NULL");
        const VarianceReport& r = report->report;
        switch (to_se_kind(kind)) {
        case SeKind::Conventional: copy_out(r.se_conv, out, len); break;
        case SeKind::Windmeijer: copy_out(*r.se_w, out, len); break;
        case SeKind::DoublyCorrected: copy_out(r.se_dc, out, len); break;
        }
    });
}

GMMDC_API size_t gmmdc_report_warning_count(const gmmdc_report* report) {
    return report ? report->report.warnings.size() : 0;
}

GMMDC_API const char* gmmdc_report_warning(const gmmdc_report* report, size_t i) {
    if (!report || i >= report->report.warnings.size()) return nullptr;
    return report->report.warnings[i].c_str();
}

GMMDC_API gmmdc_status gmmdc_t_test(const gmmdc_fit* fit, const gmmdc_report* report, gmmdc_se_kind kind,
                                    size_t coef, double null_value, gmmdc_test_result* out) {
    if (report && kind == GMMDC_SE_W && !report->report.se_w)
        return fail(GMMDC_E_NOT_AVAILABLE, "Windmeijer standard errors are not defined for one-step fits");
    return guard([&] {
        require(fit && report && out, "NULL argument");
        fill_test(t_test(fit->fit, report->report, to_se_kind(kind), static_cast<Index>(coef), null_value), out);
    });
}

GMMDC_API gmmdc_status gmmdc_j_test(const gmmdc_system* sys, const gmmdc_fit* fit, gmmdc_test_result* out) {
    return guard([&] {
        require(sys && fit && out, "NULL argument");
        fill_test(j_test(sys->sys, fit->fit), out);
    });
}

GMMDC_API gmmdc_status gmmdc_bootstrap(const gmmdc_system* sys, const gmmdc_plan* plan, size_t coef, int B,
                                       uint64_t seed, double null_value, int threads, gmmdc_bootstrap_result* out,
                                       double* t_star) {
    return guard([&] {
        require(sys && out, "NULL argument");
        const BootstrapResult r =
            mr_bootstrap(sys->sys, to_plan(plan), static_cast<Index>(coef), B, seed, null_value, threads);
        out->B = r.B;
        out->crit_abs = r.crit_abs;
        out->t_original = r.t_original;
        out->reject_5pct = r.reject_5pct ? 1 : 0;
        out->failures = r.failures;
        out->reliability_warning = r.warnings.empty() ? 0 : 1;
        if (t_star)
            for (std::size_t b = 0; b < r.t_star.size(); ++b) t_star[b] = r.t_star[b];
    });
}

GMMDC_API void gmmdc_study_config_default(gmmdc_study_config* cfg) {
    if (!cfg) return;
    const StudyConfig d;
    cfg->design = GMMDC_DESIGN_IV;
    cfg->n = static_cast<size_t>(d.design.n);
    cfg->T = static_cast<size_t>(d.design.T);
    cfg->alpha0 = d.design.alpha0;
    cfg->replications = d.replications;
    for (int e = 0; e < 3; ++e) {
        cfg->estimators[e] = d.estimators[static_cast<std::size_t>(e)] ? 1 : 0;
        cfg->bootstrap_estimators[e] = BootstrapSpec{}.estimators[static_cast<std::size_t>(e)] ? 1 : 0;
    }
    cfg->bootstrap_B = 0;
    cfg->seed = d.seed;
    cfg->fixed_misspec = 0;
    cfg->centered = 0;
}

GMMDC_API gmmdc_status gmmdc_run_study(const gmmdc_study_config* cfg, int threads, gmmdc_progress_fn progress,
                                       void* user, gmmdc_study_summary* out) {
    return guard([&] {
        require(cfg && out, "NULL argument");
        StudyConfig c;
        switch (cfg->design) {
        case GMMDC_DESIGN_IV: c.design.kind = DesignKind::IvLocal; break;
        case GMMDC_DESIGN_PANEL_RC: c.design.kind = DesignKind::PanelRandomCoef; break;
        case GMMDC_DESIGN_PANEL_LAG: c.design.kind = DesignKind::PanelLagMiss; break;
        default: throw Error(ErrorCode::InvalidArgument, "unknown design");
        }
        c.design.n = static_cast<Index>(cfg->n);
        c.design.T = static_cast<Index>(cfg->T);
        c.design.alpha0 = cfg->alpha0;
        c.replications = cfg->replications;
        for (std::size_t e = 0; e < 3; ++e) c.estimators[e] = cfg->estimators[e] != 0;
        if (cfg->bootstrap_B > 0) {
            BootstrapSpec b;
            b.B = cfg->bootstrap_B;
            for (std::size_t e = 0; e < 3; ++e) b.estimators[e] = cfg->bootstrap_estimators[e] != 0;
            c.bootstrap = b;
        }
        c.seed = cfg->seed;
        c.fixed_misspec = cfg->fixed_misspec != 0;
        c.centered = cfg->centered != 0;

        RunOptions opts;
        opts.threads = threads;
        if (progress) opts.progress = [progress, user](int done, int total) { progress(done, total, user); };
        const StudySummary s = run_study(c, opts);

        out->truth = s.truth;
        out->completed = s.completed;
        out->failures = s.failures;
        out->sd_defined = s.sd_defined ? 1 : 0;
        out->failure_flag = s.failure_flag ? 1 : 0;
        for (auto& e : out->estimators) e = gmmdc_estimator_summary{0, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
        for (const auto& e : s.estimators) {
            gmmdc_estimator_summary& o = out->estimators[static_cast<int>(e.kind)];
            o.present = 1;
            o.mean_theta = e.mean_theta;
            o.sd_theta = e.sd_theta;
            o.mean_se_conv = e.mean_se_conv;
            o.mean_se_w = or_nan(e.mean_se_w);
            o.mean_se_dc = e.mean_se_dc;
            o.rej_conv = e.rej_conv;
            o.rej_w = or_nan(e.rej_w);
            o.rej_dc = e.rej_dc;
            o.rej_boot = or_nan(e.rej_boot);
            o.rej_j = or_nan(e.rej_j);
        }
    });
}

}  // extern "C"

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

#include "gmmdc/inference.hpp"
#include "gmmdc/montecarlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <memory>
#include <vector>

using namespace gmmdc;

namespace {

using SystemPtr = std::unique_ptr<gmmdc_system, decltype(&gmmdc_system_free)>;
using FitPtr = std::unique_ptr<gmmdc_fit, decltype(&gmmdc_fit_free)>;
using ReportPtr = std::unique_ptr<gmmdc_report, decltype(&gmmdc_report_free)>;

std::vector<double> row_major(const Matrix& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data(), m.rows(),
                                                                                      m.cols()) = m;
    return out;
}

struct Case {
    IvSample s = dgp_iv(150, 1.0, {21, 3});
    SystemPtr sys{nullptr, gmmdc_system_free};

    Case() {
        const auto X = row_major(s.X), Z = row_major(s.Z);
        gmmdc_system* raw = nullptr;
        EXPECT_EQ(gmmdc_system_iv(s.y.data(), X.data(), Z.data(), 150, 1, 4, &raw), GMMDC_OK);
        sys.reset(raw);
    }
};

gmmdc_plan plan_of(gmmdc_estimator e) {
    gmmdc_plan p;
    gmmdc_plan_default(&p);
    p.estimator = e;
    return p;
}

}  // namespace

TEST(CApi, DefaultsAndNames) {
    gmmdc_plan p;
    gmmdc_plan_default(&p);
    EXPECT_EQ(p.estimator, GMMDC_TWO_STEP);
    EXPECT_EQ(p.weight, GMMDC_WEIGHT_DATA_AVERAGE);
    EXPECT_EQ(p.centered, 0);
    EXPECT_EQ(p.tol, 1e-8);
    EXPECT_EQ(p.max_iter, 1000);
    EXPECT_STRNE(gmmdc_version(), "");
    EXPECT_STREQ(gmmdc_status_name(GMMDC_OK), "OK");
    EXPECT_TRUE(gmmdc_status_is_numerical(GMMDC_E_SINGULAR_WEIGHT));
    EXPECT_FALSE(gmmdc_status_is_numerical(GMMDC_E_INVALID_ARGUMENT));
}

TEST(CApi, MatchesCoreBitForBit) {
    Case c;
    const LinearMomentSystem core = build_iv_system(c.s.y, c.s.X, c.s.Z);
    size_t n = 0, q = 0, k = 0;
    ASSERT_EQ(gmmdc_system_dims(c.sys.get(), &n, &q, &k), GMMDC_OK);
    EXPECT_EQ(n, 150u);
    EXPECT_EQ(q, 4u);
    EXPECT_EQ(k, 1u);
    for (const auto e : {GMMDC_ONE_STEP, GMMDC_TWO_STEP, GMMDC_ITERATED}) {
        const gmmdc_plan p = plan_of(e);
        gmmdc_fit* rf = nullptr;
        ASSERT_EQ(gmmdc_fit_new(c.sys.get(), &p, &rf), GMMDC_OK);
        FitPtr f(rf, gmmdc_fit_free);
        gmmdc_report* rr = nullptr;
        ASSERT_EQ(gmmdc_report_new(c.sys.get(), f.get(), &rr), GMMDC_OK);
        ReportPtr r(rr, gmmdc_report_free);

        FitPlan cp;
        cp.kind = static_cast<EstimatorKind>(e);
        const GmmFit cf = fit(core, cp);
        const VarianceReport cr = variance_report(core, cf);

        double theta = 0.0;
        ASSERT_EQ(gmmdc_fit_theta(f.get(), &theta, 1), GMMDC_OK);
        EXPECT_EQ(theta, cf.theta(0));
        EXPECT_EQ(gmmdc_fit_k(f.get()), 1u);
        EXPECT_EQ(gmmdc_fit_iterations(f.get()), cf.iterations);
        std::vector<double> g(4);
        ASSERT_EQ(gmmdc_fit_g_n(f.get(), g.data(), 4), GMMDC_OK);
        for (int j = 0; j < 4; ++j) EXPECT_EQ(g[static_cast<std::size_t>(j)], cf.g_n_hat(j));

        double v = 0.0;
        ASSERT_EQ(gmmdc_report_matrix(r.get(), GMMDC_V_DC, &v, 1), GMMDC_OK);
        EXPECT_EQ(v, cr.V_dc(0, 0));
        ASSERT_EQ(gmmdc_report_se(r.get(), GMMDC_SE_CONV, &v, 1), GMMDC_OK);
        EXPECT_EQ(v, cr.se_conv(0));
        EXPECT_EQ(gmmdc_report_has(r.get(), GMMDC_V_W) != 0, cr.V_w.has_value());
        EXPECT_EQ(gmmdc_report_has(r.get(), GMMDC_C_HAT) != 0, cr.C_hat.has_value());
        if (!cr.V_w) {
            EXPECT_EQ(gmmdc_report_matrix(r.get(), GMMDC_V_W, &v, 1), GMMDC_E_NOT_AVAILABLE);
        }

        gmmdc_test_result t{};
        ASSERT_EQ(gmmdc_t_test(f.get(), r.get(), GMMDC_SE_DC, 0, 1.0, &t), GMMDC_OK);
        const TestResult ct = t_test(cf, cr, SeKind::DoublyCorrected, 0, 1.0);
        EXPECT_EQ(t.statistic, ct.statistic);
        EXPECT_EQ(t.p_value, ct.p_value);
        EXPECT_EQ(t.df, -1);
        ASSERT_EQ(gmmdc_j_test(c.sys.get(), f.get(), &t), GMMDC_OK);
        EXPECT_EQ(t.statistic, j_test(core, cf).statistic);
        EXPECT_EQ(t.df, 3);
        EXPECT_TRUE(std::isnan(t.ci_lower));
    }
}

TEST(CApi, BootstrapMatchesCore) {
    Case c;
    const LinearMomentSystem core = build_iv_system(c.s.y, c.s.X, c.s.Z);
    const gmmdc_plan p = plan_of(GMMDC_TWO_STEP);
    gmmdc_bootstrap_result b{};
    std::vector<double> t(199);
    ASSERT_EQ(gmmdc_bootstrap(c.sys.get(), &p, 0, 199, 13, 1.0, 2, &b, t.data()), GMMDC_OK);
    FitPlan cp;
    const BootstrapResult cb = mr_bootstrap(core, cp, 0, 199, 13, 1.0, 1);
    EXPECT_EQ(b.B, 199);
    EXPECT_EQ(b.crit_abs, cb.crit_abs);
    EXPECT_EQ(b.t_original, cb.t_original);
    EXPECT_EQ(std::memcmp(t.data(), cb.t_star.data(), t.size() * sizeof(double)), 0);
}

TEST(CApi, ErrorsAreReported) {
    const double y[3] = {1, 2, 3};
    gmmdc_system* out = nullptr;
    EXPECT_EQ(gmmdc_system_iv(y, y, y, 3, 1, 1, nullptr), GMMDC_E_INVALID_ARGUMENT);
    EXPECT_EQ(gmmdc_system_iv(nullptr, y, y, 3, 1, 1, &out), GMMDC_E_INVALID_ARGUMENT);
    EXPECT_EQ(out, nullptr);
    // Constant instrument columns are collinear.
    std::vector<double> Z(40, 1.0), X(20), Y(20);
    for (int i = 0; i < 20; ++i) X[static_cast<std::size_t>(i)] = Y[static_cast<std::size_t>(i)] = i;
    EXPECT_EQ(gmmdc_system_iv(Y.data(), X.data(), Z.data(), 20, 1, 2, &out), GMMDC_E_RANK_DEFICIENT);
    EXPECT_STRNE(gmmdc_last_error(), "");

    Case c;
    gmmdc_plan p = plan_of(GMMDC_ITERATED);
    p.tol = -1.0;
    gmmdc_fit* f = nullptr;
    EXPECT_EQ(gmmdc_fit_new(c.sys.get(), &p, &f), GMMDC_E_INVALID_ARGUMENT);
    gmmdc_system_free(nullptr);
}

TEST(CApi, StudyMatchesCore) {
    gmmdc_study_config cfg;
    gmmdc_study_config_default(&cfg);
    cfg.design = GMMDC_DESIGN_IV;
    cfg.n = 60;
    cfg.alpha0 = 1.0;
    cfg.replications = 20;
    cfg.seed = 9;
    gmmdc_study_summary out{};
    ASSERT_EQ(gmmdc_run_study(&cfg, 2, nullptr, nullptr, &out), GMMDC_OK);

    StudyConfig core;
    core.design.n = 60;
    core.design.alpha0 = 1.0;
    core.replications = 20;
    core.seed = 9;
    core.bootstrap.reset();
    const StudySummary s = run_study(core);
    EXPECT_EQ(out.completed, s.completed);
    EXPECT_EQ(out.truth, 1.0);
    EXPECT_EQ(out.estimators[1].mean_theta, s.at(EstimatorKind::TwoStep).mean_theta);
    EXPECT_EQ(out.estimators[1].rej_dc, s.at(EstimatorKind::TwoStep).rej_dc);
    EXPECT_TRUE(std::isnan(out.estimators[1].rej_boot));
}

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
#include "gmmdc/variance.hpp"

#include "support/generators.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace gmmdc;
using gmmdc::testing::Engine;
using gmmdc::testing::rel_dev;

namespace {

FitPlan plan_of(EstimatorKind kind) {
    FitPlan p;
    p.kind = kind;
    return p;
}

}  // namespace

TEST(MContributions, LiteralThreeTermFormula) {
    Engine eng(31);
    const LinearMomentSystem sys = gmmdc::testing::random_generic_system(eng, 6, 3, 2);
    const Vector theta = Eigen::Vector2d(0.4, -1.1);
    const Matrix xi = gmmdc::testing::random_spd(eng, 3);
    const Matrix xinv = xi.inverse();
    const Matrix& G = sys.jacobian_mean();
    const Matrix g = sys.moments(theta);
    const Vector g_n = g.colwise().mean().transpose();

    const Matrix m = m_contributions(sys, theta, xi, WeightSpec::data_average());
    const Matrix m_id = m_contributions(sys, theta, xi, WeightSpec::identity());
    for (Index i = 0; i < 6; ++i) {
        const Vector t1 = G.transpose() * xinv * g.row(i).transpose();
        const Vector t2 = Matrix(sys.jacobian(i)).transpose() * xinv * g_n;
        const Vector t3 = G.transpose() * xinv * Matrix(sys.obs_weight(i)) * xinv * g_n;
        EXPECT_LT(rel_dev(m.row(i).transpose(), t1 + t2 - t3), 1e-12);
        EXPECT_LT(rel_dev(m_id.row(i).transpose(), t1 + t2), 1e-12);
    }

    // Efficient sources use the outer products of g_i at the evaluation point.
    const Vector phi = Eigen::Vector2d(0.1, 0.2);
    const Matrix gp = sys.moments(phi);
    const Matrix m_eff = m_contributions(sys, theta, xi, WeightSpec::efficient(phi, false));
    for (Index i = 0; i < 6; ++i) {
        const Vector t1 = G.transpose() * xinv * g.row(i).transpose();
        const Vector t2 = Matrix(sys.jacobian(i)).transpose() * xinv * g_n;
        const Vector t3 = G.transpose() * xinv * gp.row(i).transpose() * gp.row(i) * xinv * g_n;
        EXPECT_LT(rel_dev(m_eff.row(i).transpose(), t1 + t2 - t3), 1e-12);
    }
}

TEST(MContributions, ClassicalTermWhenMomentsVanish) {
    Engine eng(32);
    gmmdc::testing::IvShape shape;
    shape.extra_min = shape.extra_max = 0;
    const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng, shape);
    const GmmFit f = fit(sys, plan_of(EstimatorKind::OneStep));
    const Matrix& w = f.steps[0].weight;
    const Matrix m = m_contributions(sys, f.theta, w, WeightSpec::data_average());
    const Matrix classical = sys.moments(f.theta) * w.llt().solve(sys.jacobian_mean());
    EXPECT_LT(rel_dev(m, classical), 1e-9);
}

TEST(VarianceReport, IvClosedFormsOnHundredDatasets) {
    Engine eng(2024);
    double worst = 0.0;
    std::string what;
    for (int rep = 0; rep < 100; ++rep) {
        const auto d = gmmdc::testing::random_iv(eng);
        const LinearMomentSystem sys = build_iv_system(d.y, d.X, d.Z);
        const GmmFit it = fit(sys, plan_of(EstimatorKind::Iterated));
        const auto oracle = gmmdc::testing::iv_oracle(d.y, d.X, d.Z, it.theta);
        std::string w;
        const double dev = gmmdc::testing::compare_with_oracle(sys, oracle, &w);
        if (dev > worst) {
            worst = dev;
            what = w;
        }
        EXPECT_LT((oracle.theta_it_update - it.theta).norm(), 1e-8 * (1.0 + it.theta.norm()));
    }
    EXPECT_LT(worst, 1e-10) << what;
}

TEST(VarianceReport, PanelClosedFormsOnHundredDatasets) {
    Engine eng(4048);
    double worst = 0.0;
    std::string what;
    for (int rep = 0; rep < 100; ++rep) {
        const PanelDataset p = gmmdc::testing::random_panel(eng);
        const LinearMomentSystem sys = build_ab_system(p, PanelMode::Predetermined);
        const GmmFit it = fit(sys, plan_of(EstimatorKind::Iterated));
        const auto oracle = gmmdc::testing::panel_oracle(p.y, p.x, it.theta);
        std::string w;
        const double dev = gmmdc::testing::compare_with_oracle(sys, oracle, &w);
        if (dev > worst) {
            worst = dev;
            what = w;
        }
    }
    EXPECT_LT(worst, 1e-10) << what;
}

TEST(VarianceReport, OneStepShape) {
    Engine eng(33);
    const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng);
    const VarianceReport r = variance_report(sys, fit(sys, plan_of(EstimatorKind::OneStep)));
    EXPECT_FALSE(r.V_w.has_value());
    EXPECT_FALSE(r.se_w.has_value());
    EXPECT_FALSE(r.C_hat.has_value());
    EXPECT_EQ(r.D_hat, Matrix::Zero(sys.k(), sys.k()));
    for (Index j = 0; j < sys.k(); ++j) {
        EXPECT_DOUBLE_EQ(r.se_dc(j), std::sqrt(r.V_dc(j, j) / static_cast<double>(sys.n())));
        EXPECT_DOUBLE_EQ(r.se_conv(j), std::sqrt(r.V_conv(j, j) / static_cast<double>(sys.n())));
    }
}

TEST(VarianceReport, SymmetricOutputs) {
    Engine eng(34);
    for (int rep = 0; rep < 10; ++rep) {
        const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng);
        for (const auto kind : {EstimatorKind::OneStep, EstimatorKind::TwoStep, EstimatorKind::Iterated}) {
            const VarianceReport r = variance_report(sys, fit(sys, plan_of(kind)));
            EXPECT_EQ(r.V_conv, r.V_conv.transpose());
            EXPECT_EQ(r.V_dc, r.V_dc.transpose());
            if (r.V_w) {
                EXPECT_EQ(*r.V_w, r.V_w->transpose());
            }
        }
    }
}

TEST(VarianceReport, RankWarningForDegenerateSigma) {
    // Identical observations: every m_i equals its mean, which is zero.
    Matrix h = Matrix::Ones(12, 2);
    h.col(1) *= 2.0;
    Matrix jac(24, 1);
    for (Index i = 0; i < 12; ++i) jac.middleRows(i * 2, 2) = Eigen::Vector2d(-1.0, -2.0);
    const LinearMomentSystem sys(h, jac, Matrix(Matrix::Identity(2, 2).replicate(12, 1)));
    const GmmFit f = fit(sys, plan_of(EstimatorKind::OneStep));
    const VarianceReport r = variance_report(sys, f);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(DHat, ShrinksLikeRootN) {
    // Median |D_hat| over matched seeds at n = 1000 and n = 10000.
    std::vector<double> small, large;
    for (std::uint64_t rep = 0; rep < 200; ++rep) {
        for (const Index n : {1000, 10000}) {
            const IvSample s = dgp_iv(n, 0.0, {77, rep});
            const LinearMomentSystem sys = build_iv_system(s.y, s.X, s.Z);
            const VarianceReport r = variance_report(sys, fit(sys, plan_of(EstimatorKind::TwoStep)));
            ASSERT_TRUE(r.D_hat.allFinite());
            (n == 1000 ? small : large).push_back(std::fabs(r.D_hat(0, 0)));
        }
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    const double ratio = median(small) / median(large);
    EXPECT_GE(ratio, 2.2);
    EXPECT_LE(ratio, 4.5);
}

TEST(VarianceReport, RejectsForeignFit) {
    Engine eng(35);
    const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng);
    GmmFit f = fit(sys, plan_of(EstimatorKind::Iterated));
    EXPECT_NO_THROW(variance_report(sys, f));
    f.theta.resize(sys.k() + 1);
    EXPECT_THROW(variance_report(sys, f), Error);
}

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
#include "gmmdc/estimate.hpp"
#include "gmmdc/montecarlo.hpp"

#include "support/generators.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

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

TEST(SolveWeighted, JustIdentifiedScalarMean) {
    Matrix h(3, 1), jac(3, 1);
    h << 1, 2, 3;
    jac << -1, -1, -1;
    const LinearMomentSystem sys(h, jac);
    EXPECT_NEAR(solve_weighted(sys, Matrix::Identity(1, 1))(0), 2.0, 1e-15);
    EXPECT_NEAR(solve_weighted(sys, 17.0 * Matrix::Identity(1, 1))(0), 2.0, 1e-15);
}

TEST(SolveWeighted, NoiseFreeIv) {
    Engine eng(2);
    const Matrix Z = gmmdc::testing::random_normal(eng, 50, 4);
    const Matrix X = Z.rowwise().sum();
    const Vector y = X.col(0);
    const LinearMomentSystem sys = build_iv_system(y, X, Z);
    for (int rep = 0; rep < 5; ++rep)
        EXPECT_NEAR(solve_weighted(sys, gmmdc::testing::random_spd(eng, 4))(0), 1.0, 1e-13);
}

TEST(SolveWeighted, GradientVanishesAtOptimum) {
    Engine eng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const LinearMomentSystem sys = gmmdc::testing::random_generic_system(eng, 30, 8, 2);
        const Matrix w = gmmdc::testing::random_spd(eng, 8);
        const Vector theta = solve_weighted(sys, w);
        // d/dtheta g_n' W^{-1} g_n = 2 G_n' W^{-1} g_n
        const Vector g_n = sys.h_mean() + sys.jacobian_mean() * theta;
        const Vector grad = 2.0 * sys.jacobian_mean().transpose() * w.llt().solve(g_n);
        EXPECT_LT(grad.cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(SolveWeighted, Errors) {
    Engine eng(9);
    const LinearMomentSystem sys = gmmdc::testing::random_generic_system(eng, 20, 3, 2);
    Matrix indefinite = Matrix::Identity(3, 3);
    indefinite(2, 2) = -1.0;
    try {
        solve_weighted(sys, indefinite);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularWeight);
    }
    EXPECT_THROW(solve_weighted(sys, Matrix::Identity(2, 2)), Error);

    // Collinear Jacobian columns make G'W^{-1}G singular.
    Matrix jac(20 * 3, 2);
    jac.col(0) = gmmdc::testing::random_normal(eng, 60, 1);
    jac.col(1) = 2.0 * jac.col(0);
    const LinearMomentSystem collinear(gmmdc::testing::random_normal(eng, 20, 3), jac);
    try {
        solve_weighted(collinear, Matrix::Identity(3, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularNormalMatrix);
        EXPECT_GT(e.condition(), 1e12);
    }
}

TEST(Fit, TwoStepMatchesClosedFormOnIvDraw) {
    const IvSample s = dgp_iv(500, 0.0, {1, 0});
    const LinearMomentSystem sys = build_iv_system(s.y, s.X, s.Z);
    const GmmFit f = fit(sys, plan_of(EstimatorKind::TwoStep));
    const auto oracle = gmmdc::testing::iv_oracle(s.y, s.X, s.Z, f.theta);
    EXPECT_LT(rel_dev(f.steps[0].theta, oracle.theta1), 1e-12);
    EXPECT_LT(rel_dev(f.theta, oracle.theta2), 1e-12);
    ASSERT_EQ(f.steps.size(), 2u);
    EXPECT_TRUE(f.converged);
}

TEST(Fit, JustIdentifiedEstimatorsCoincide) {
    Engine eng(12);
    gmmdc::testing::IvShape shape;
    shape.extra_min = shape.extra_max = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng, shape);
        const GmmFit a = fit(sys, plan_of(EstimatorKind::OneStep));
        const GmmFit b = fit(sys, plan_of(EstimatorKind::TwoStep));
        const GmmFit c = fit(sys, plan_of(EstimatorKind::Iterated));
        EXPECT_LT(rel_dev(a.theta, b.theta), 1e-12);
        EXPECT_LT(rel_dev(a.theta, c.theta), 1e-12);
        EXPECT_LT(c.g_n_hat.cwiseAbs().maxCoeff(), 1e-10 * sys.h_mean().norm());
    }
}

TEST(Fit, IteratedFixedPoint) {
    Engine eng(13);
    for (int rep = 0; rep < 20; ++rep) {
        const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng);
        const FitPlan plan = plan_of(EstimatorKind::Iterated);
        const GmmFit f = fit(sys, plan);
        ASSERT_TRUE(f.converged);
        EXPECT_EQ(f.iterations, static_cast<int>(f.steps.size()));
        const Vector again = solve_weighted(sys, weight_matrix(sys, WeightSpec::efficient(f.theta, false)));
        EXPECT_LT((again - f.theta).norm(), plan.tol * (1.0 + f.theta.norm()));
        const auto& prev = f.steps[f.steps.size() - 2].theta;
        EXPECT_LT((f.theta - prev).norm(), plan.tol * (1.0 + prev.norm()));
    }
}

TEST(Fit, IteratedNonConvergenceIsFlagged) {
    Engine eng(14);
    const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng);
    FitPlan plan = plan_of(EstimatorKind::Iterated);
    plan.max_iter = 1;
    plan.tol = 1e-300;
    const GmmFit f = fit(sys, plan);
    EXPECT_FALSE(f.converged);
    EXPECT_EQ(f.iterations, 2);
}

TEST(Fit, FocResidualWithinBound) {
    Engine eng(15);
    for (int rep = 0; rep < 30; ++rep) {
        const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng);
        for (const auto kind : {EstimatorKind::OneStep, EstimatorKind::TwoStep, EstimatorKind::Iterated}) {
            const GmmFit f = fit(sys, plan_of(kind));
            const Matrix& w = f.final_step().weight;
            const Matrix& G = sys.jacobian_mean();
            const double foc = (G.transpose() * w.llt().solve(f.g_n_hat)).norm();
            const double scale = (G.transpose() * w.llt().solve(sys.h_mean())).norm();
            EXPECT_LE(foc, 1e-8 * (1.0 + scale));
        }
    }
}

TEST(Fit, IdentityInitialWeight) {
    Engine eng(16);
    const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng);
    FitPlan plan = plan_of(EstimatorKind::OneStep);
    plan.w0 = WeightSpec::identity();
    const GmmFit f = fit(sys, plan);
    EXPECT_LT(rel_dev(f.theta, solve_weighted(sys, Matrix::Identity(sys.q(), sys.q()))), 1e-14);
}

TEST(Fit, Deterministic) {
    Engine eng(17);
    const LinearMomentSystem sys = gmmdc::testing::random_iv_system(eng);
    const GmmFit a = fit(sys, plan_of(EstimatorKind::Iterated));
    const GmmFit b = fit(sys, plan_of(EstimatorKind::Iterated));
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(FitPlan, Validation) {
    FitPlan p;
    p.tol = 0.0;
    EXPECT_THROW(p.validate(), Error);
    p.tol = 1e-8;
    p.max_iter = 0;
    EXPECT_THROW(p.validate(), Error);
    p.max_iter = 5;
    p.w0 = WeightSpec{WeightSpec::Kind::EfficientUncentered, {}};
    EXPECT_THROW(p.validate(), Error);
}

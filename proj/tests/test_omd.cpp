#include "mnl/omd.hpp"
#include "mnl/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace mnl;

namespace {

MnlContext binary_context() {
    Matrix f(2, 2);
    f << 1.0, 0.2, -0.3, 0.8;
    return MnlContext(f);
}

// Minimizer of q(theta) over the boundary of `set` by a dense angle scan.
template <class F>
Vector boundary_scan(const Ellipsoid& set, F&& q, int n = 400000) {
    const Eigen::LLT<Matrix> llt(set.shape());
    Vector best = set.center();
    double fbest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
        const double t = 2.0 * std::numbers::pi * k / n;
        Vector u(2);
        u << std::cos(t), std::sin(t);
        const Vector x = set.center() + set.radius() * llt.matrixU().solve(u);
        const double fx = q(x);
        if (fx < fbest) {
            fbest = fx;
            best = x;
        }
    }
    return best;
}

} // namespace

TEST(LearningRadius, Values) {
    EXPECT_NEAR(learning_radius(100, 0.1, 2, 1.0, 1.0), 36.9759797557245739, 1e-12);
    EXPECT_EQ(learning_radius(100, 0.1, 2, 1.0, 0.0), 0.0);
    EXPECT_NEAR(learning_radius(100, 0.1, 2, 1.0, 0.01), 0.369759797557245739, 1e-14);
    EXPECT_THROW(learning_radius(0, 0.1, 2, 1.0, 1.0), InvalidInput);
    EXPECT_THROW(learning_radius(1, 0.0, 2, 1.0, 1.0), InvalidInput);
}

TEST(EstimatorState, StartsNearestTheOriginWithRidgeDesign) {
    Vector c(2), far(2), nearest(2);
    c << 0.5, -0.25;
    far << 3.0, 4.0;
    nearest << 2.4, 3.2;
    EstimatorConfig cfg;
    cfg.lambda = 3.0;
    EstimatorState st(2, {Ellipsoid::ball(c, 1.0), Ellipsoid::unbounded(2), Ellipsoid::ball(far, 1.0)}, cfg);
    EXPECT_EQ(st.theta_hat(0), Vector::Zero(2));
    EXPECT_EQ(st.theta_hat(1), Vector::Zero(2));
    EXPECT_LT((st.theta_hat(2) - nearest).norm(), 1e-9);
    EXPECT_TRUE(st.feasible_set(2).contains(st.theta_hat(2)));
    EXPECT_EQ(st.design(1), 3.0 * Matrix::Identity(2, 2));
    cfg.lambda = 0.0;
    EXPECT_THROW(EstimatorState(2, {Ellipsoid::ball(c, 1.0)}, cfg), InvalidInput);
}

TEST(OmdUpdate, StationaryPointIsKept) {
    EstimatorState st(2, {Ellipsoid::unbounded(2)}, EstimatorConfig{});
    Matrix one(1, 2);
    one << 0.4, 0.1;
    const auto step = omd_update(st, 0, MnlContext(one), 0);
    EXPECT_EQ(step.updated, Vector::Zero(2));
    EXPECT_FALSE(step.projected);
}

TEST(OmdUpdate, InteriorStepIsTheClosedFormMinimizer) {
    EstimatorConfig cfg;
    cfg.eta_omd = 2.0;
    EstimatorState st(2, {Ellipsoid::ball(Vector::Zero(2), 100.0)}, cfg);
    const auto ctx = binary_context();
    const Matrix metric = st.design(0) + loss_hessian(Vector::Zero(2), ctx);
    const Vector g = loss_gradient(Vector::Zero(2), ctx, 1);
    const Vector expected = -metric.llt().solve(2.0 * g);
    const auto step = omd_update(st, 0, ctx, 1);
    EXPECT_FALSE(step.projected);
    EXPECT_LT((step.updated - expected).norm(), 1e-14);
    EXPECT_LE(step.surrogate_after, step.surrogate_before);
    const Matrix after = metric - loss_hessian(Vector::Zero(2), ctx) + loss_hessian(expected, ctx);
    EXPECT_LT((st.design(0) - after).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(OmdUpdate, BoundaryStepMatchesGridSearch) {
    Matrix shape(2, 2);
    shape << 2.0, 0.3, 0.3, 1.0;
    const Ellipsoid feasible(Vector::Zero(2), shape, 0.05);
    EstimatorConfig cfg;
    cfg.lambda = 1.0;
    cfg.eta_omd = 20.0;
    EstimatorState st(2, {feasible}, cfg);
    const auto ctx = binary_context();
    const Vector prev = st.theta_hat(0);
    const Vector g = loss_gradient(prev, ctx, 1);
    const Matrix metric = st.design(0) + loss_hessian(prev, ctx);
    const auto step = omd_update(st, 0, ctx, 1);
    ASSERT_TRUE(step.projected);
    EXPECT_TRUE(feasible.contains(step.updated, 1e-9));
    const Vector grid = boundary_scan(feasible, [&](const Vector& x) { return omd_surrogate(x, prev, g, metric, 20.0); });
    EXPECT_LT((step.updated - grid).norm(), 1e-4);
}

TEST(Projection, MatchesGridAcrossMetrics) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix a(2, 2), b(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                a(i, j) = rng.normal();
                b(i, j) = rng.normal();
            }
        const Matrix shape = a * a.transpose() + 0.5 * Matrix::Identity(2, 2);
        const Matrix metric = b * b.transpose() + 0.1 * Matrix::Identity(2, 2);
        Vector c(2), target(2);
        c << rng.normal(), rng.normal();
        target << 5 * rng.normal(), 5 * rng.normal();
        const Ellipsoid set(c, shape, 0.7);
        if (set.contains(target)) continue;
        const Vector p = project_onto_ellipsoid(target, metric, set);
        EXPECT_TRUE(set.contains(p, 1e-9));
        const Vector grid = boundary_scan(set, [&](const Vector& x) { return (x - target).dot(metric * (x - target)); });
        EXPECT_LT((p - grid).norm(), 1e-4);
    }
}

TEST(Projection, InsideAndDegenerateSets) {
    const Ellipsoid set = Ellipsoid::ball(Vector::Ones(2), 1.0);
    const Vector inside = Vector::Constant(2, 1.2);
    EXPECT_EQ(project_onto_ellipsoid(inside, Matrix::Identity(2, 2), set), inside);
    const Ellipsoid point = Ellipsoid::ball(Vector::Ones(2), 0.0);
    EXPECT_EQ(project_onto_ellipsoid(Vector::Zero(2), Matrix::Identity(2, 2), point), Vector::Ones(2));
}

TEST(Projection, EuclideanBallIsRadialScaling) {
    const Ellipsoid set = Ellipsoid::ball(Vector::Zero(3), 2.0);
    Vector t(3);
    t << 3, -4, 12;
    const Vector p = project_onto_ellipsoid(t, Matrix::Identity(3, 3), set);
    EXPECT_LT((p - 2.0 * t / t.norm()).norm(), 1e-9);
}

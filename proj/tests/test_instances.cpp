#include "mnl/instances.hpp"
#include "mnl/mdp.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mnl;

TEST(HardInstance, ConstantsMatchHandValues) {
    const auto c = hard_instance_constants(2, 5, 1000);
    EXPECT_NEAR(c.delta, 0.2, 1e-15);
    EXPECT_NEAR(c.gap, 0.0025, 1e-15);
    EXPECT_NEAR(c.delta_bar, 0.0155524130074848132, 1e-14);
    EXPECT_NEAR(c.p_star, 0.2025, 1e-12);
    EXPECT_NEAR(c.log_offset, std::log(4.0), 1e-15);
}

TEST(HardInstance, AbsorptionProbabilityEqualsDeltaPlusGap) {
    for (int d : {2, 3, 5})
        for (int H : {4, 8, 16}) {
            const long long T = (d - 1) * (d - 1) * H * H * H / 32 + 1;
            const auto c = hard_instance_constants(d, H, T);
            EXPECT_NEAR(c.p_star, c.delta + (d - 1) * c.gap, 1e-12);
            EXPECT_LE(c.p_star, 2.0 / H);
        }
}

TEST(HardInstance, InfeasibleInputsNameTheConstraint) {
    try {
        hard_instance_constants(1, 5, 100);
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("d >= 2"), std::string::npos);
    }
    EXPECT_THROW(hard_instance_constants(2, 2, 100), InvalidInput);
    EXPECT_THROW(hard_instance_constants(2, 5, 0), InvalidInput);
    // (d-1) Delta >= 1 - delta makes the logarithm undefined.
    EXPECT_THROW(hard_instance_constants(400, 3, 1), InvalidInput);
}

TEST(HardInstance, StructureAndOptimalValues) {
    HardInstanceOptions o;
    o.d = 3;
    o.H = 6;
    o.T = 500;
    const auto m = hard_instance(o);
    const int H = o.H, absorbing = H + 1;
    EXPECT_EQ(m.num_states(), H + 2);
    EXPECT_EQ(m.num_actions(), 4);
    const auto t = exact_value_iteration(m);
    const auto c = hard_instance_constants(o.d, o.H, o.T);
    for (int k = 0; k <= H; ++k) EXPECT_NEAR(t.V[k](absorbing), H - k, 1e-12);
    for (int k = 1; k <= H; ++k) {
        const double dv = t.V[k](absorbing) - t.V[k](k);
        EXPECT_NEAR(dv, (1.0 - std::pow(1.0 - c.p_star, H - k)) / c.p_star, 1e-10);
    }
    // The last stage is a tie: V[H] is zero everywhere.
    for (int h = 0; h + 1 < H; ++h) {
        EXPECT_EQ(t.policy[h][h], hard_instance_optimal_action(m, h));
        EXPECT_NEAR(m.true_probs(h, h, t.policy[h][h])(1), c.p_star, 1e-12);
        EXPECT_LE(m.theta_star(h).norm(), m.B() * (1 + 1e-12));
    }
    EXPECT_LE(m.B(), 1.5 * (1.0 + std::log(H - 1.0)));
    EXPECT_LE(m.features().max_feature_norm(), 1.0 + 1e-12);
}

TEST(HardInstance, SeedsAndResampling) {
    HardInstanceOptions o;
    o.d = 4;
    o.H = 12;
    o.seed = 3;
    const auto a = hard_instance(o), b = hard_instance(o);
    for (int h = 0; h < o.H; ++h) EXPECT_EQ(a.theta_star(h), b.theta_star(h));
    o.per_stage_resample = false;
    const auto shared = hard_instance(o);
    for (int h = 1; h < o.H; ++h) EXPECT_EQ(shared.theta_star(h), shared.theta_star(0));
}

TEST(HardInstance, VarianceBoundAlongOptimalPlay) {
    for (int H : {4, 8, 16}) {
        HardInstanceOptions o;
        o.H = H;
        o.T = (H * H * H + 31) / 32;
        const auto m = hard_instance(o);
        const auto t = exact_value_iteration(m);
        std::vector<Trajectory> trajs;
        for (int k = 0; k < 200; ++k) trajs.push_back(rollout(m, [&](int h, int s) { return t.policy[h][s]; }, 1, k));
        EXPECT_LE(sigma_bar_on_trajectory(m, t, trajs), std::sqrt(2.0 / H));
        const auto est = sigma_bar_under_optimal_policy(m, t, 2000, 4);
        EXPECT_LE(est.mean, 2.0 / H + 3.0 * est.std_error);
    }
}

TEST(KlRobust, ZeroEtaRecoversNominal) {
    const auto n = random_kl_nominal(5, 2, 3, 3, false, 2);
    const auto m = kl_robust_instance(n, std::vector<Vector>(3, Vector::Ones(3) * 0.4), 0.0);
    for (int h = 0; h < 3; ++h)
        for (int s = 0; s < 5; ++s)
            for (int a = 0; a < 2; ++a) {
                const Vector p = m.true_probs(h, s, a);
                EXPECT_LT((p - n.nominal[n.index(h, s, a)]).cwiseAbs().maxCoeff(), 1e-15);
            }
    EXPECT_DOUBLE_EQ(m.B(), 1.0);
}

TEST(KlRobust, KernelMatchesNormalizedClosedForm) {
    Rng rng(21);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int k = 1 + static_cast<int>(rng.below(3));
        const auto n = random_kl_nominal(4, 2, 3, k, false, seed);
        std::vector<Vector> alpha;
        for (int h = 0; h < 3; ++h) {
            Vector al(k);
            for (int i = 0; i < k; ++i) al(i) = rng.uniform(-2, 2);
            alpha.push_back(al);
        }
        const double eta = rng.uniform(0, 3);
        const auto m = kl_robust_instance(n, alpha, eta);
        for (int h = 0; h < 3; ++h)
            for (int s = 0; s < 4; ++s)
                for (int a = 0; a < 2; ++a) {
                    const auto idx = n.index(h, s, a);
                    const auto& next = n.next_states[idx];
                    Vector w(static_cast<Eigen::Index>(next.size()));
                    for (std::size_t i = 0; i < next.size(); ++i)
                        w(i) = n.nominal[idx](i) * std::exp(-eta * n.psi.row(next[i]).dot(alpha[h]));
                    w /= w.sum();
                    EXPECT_LT((m.true_probs(h, s, a) - w).cwiseAbs().maxCoeff(), 1e-10);
                }
        EXPECT_LE(m.features().max_feature_norm(), std::sqrt(2.0));
        double norm = 0.0;
        for (const auto& al : alpha) norm = std::max(norm, al.norm());
        if (norm <= 3.0) EXPECT_LE(m.B(), std::sqrt(1.0 + eta * eta * 9.0));
    }
}

TEST(KlRobust, SelfConsistentValuesAndBound) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const int H = 4;
        const double eta = 0.5 + seed * 0.3;
        const auto sc = kl_robust_self_consistent(random_kl_nominal(5, 3, H, 0, true, seed), eta);
        EXPECT_LT(sc.max_residual, 1e-12);
        const auto t = exact_value_iteration(sc.mdp);
        for (int h = 0; h < H; ++h) EXPECT_LT((sc.alpha[h] - t.V[h + 1]).cwiseAbs().maxCoeff(), 1e-10);
        double norm = 0.0;
        for (const auto& al : sc.alpha) norm = std::max(norm, al.norm());
        EXPECT_NEAR(sc.mdp.B(), std::sqrt(1.0 + eta * eta * norm * norm), 1e-12);
        if (norm <= H) EXPECT_LE(sc.mdp.B(), std::sqrt(1.0 + eta * eta * H * H));
    }
}

TEST(KlRobust, PreconditionsAreChecked) {
    auto n = random_kl_nominal(3, 1, 2, 2, false, 1);
    EXPECT_THROW(kl_robust_instance(n, std::vector<Vector>(2, Vector::Zero(2)), -1.0), InvalidInput);
    n.nominal[0] << 0.99, 0.01;
    EXPECT_THROW(kl_robust_instance(n, std::vector<Vector>(2, Vector::Zero(2)), 1.0), InvalidInput);
}

TEST(KlRobust, SingleStateSelfLoops) {
    const auto sc = kl_robust_self_consistent(random_kl_nominal(1, 2, 3, 0, true, 0), 1.0);
    for (int h = 0; h < 3; ++h)
        for (int a = 0; a < 2; ++a) {
            EXPECT_EQ(sc.mdp.transition(h, 0, a).next_states, std::vector<int>{0});
            EXPECT_DOUBLE_EQ(sc.mdp.true_probs(h, 0, a)(0), 1.0);
        }
}

TEST(KlRobust, DeterministicForSeed) {
    const auto a = random_kl_nominal(4, 2, 3, 2, false, 9), b = random_kl_nominal(4, 2, 3, 2, false, 9);
    EXPECT_EQ(a.psi, b.psi);
    EXPECT_EQ(a.next_states, b.next_states);
    EXPECT_EQ(a.rewards, b.rewards);
}

TEST(GeometricSum, HandValues) {
    auto [l1, r1] = geometric_sum_check(1, 0.3);
    EXPECT_EQ(l1, 0.0);
    EXPECT_EQ(r1, 0.0);
    auto [l2, r2] = geometric_sum_check(2, 0.5);
    EXPECT_DOUBLE_EQ(l2, 0.5);
    EXPECT_DOUBLE_EQ(r2, 0.5);
}

TEST(GeometricSum, Grid) {
    for (int N = 1; N <= 50; ++N)
        for (int k = 1; k <= 9; ++k) {
            const auto [l, r] = geometric_sum_check(N, k / 10.0);
            EXPECT_LE(std::abs(l - r), 1e-10) << "N=" << N << " q=" << k / 10.0;
        }
    EXPECT_THROW(geometric_sum_check(0, 0.5), InvalidInput);
    EXPECT_THROW(geometric_sum_check(3, 1.0), InvalidInput);
}

TEST(RandomInstance, AllStatesReachable) {
    const auto m = random_tabular_instance(4, 2, 3, 2, 1.5, 0);
    for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 4; ++s) EXPECT_EQ(m.transition(h, s, 1).next_states.size(), 4u);
    EXPECT_LE(m.features().max_feature_norm(), 1.0);
}

#pragma once

// Exploration routine: plays the action of the most uncertain design point,
// fits a penalized MLE and returns confidence sets with certified diameter.

#include "mnl/core.hpp"
#include "mnl/ellipsoid.hpp"
#include "mnl/mdp.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

namespace mnl {

struct ExplorationConfig {
    int tau = 80;
    double lambda0 = 1.0;
    double kappa = 1.0;
    double rho = 1.0;
    double B = 1.0;
    double delta = 0.1;
};

/// One exploration step at a given stage: the played transition and the
/// virtual design point (s~, a, s~') with its loss weight ||phi~||_{U~^{-1}}.
struct ExplorationRecord {
    int state = 0;
    int action = 0;
    int outcome = 0;            // index into the context of (state, action)
    int virtual_state = 0;
    int virtual_outcome = 0;    // index into the context of (virtual_state, action)
    double virtual_weight = 0.0;
};

struct DesignPoint {
    int action = 0;
    int state = 0;
    int outcome = 0;
    double norm_sq = 0.0;
};

class ExplorationState {
public:
    ExplorationState(const FeatureMap& features, ExplorationConfig cfg) : cfg_(cfg) {
        detail::require(cfg_.kappa >= 1.0 && cfg_.rho > 0.0, "ExplorationState: need kappa >= 1 and rho > 0");
        detail::require(cfg_.lambda0 >= 0.0 && cfg_.tau >= 0, "ExplorationState: need lambda0 >= 0 and tau >= 0");
        detail::require(cfg_.delta > 0.0 && cfg_.delta <= 1.0, "ExplorationState: delta must lie in (0, 1]");
        const int d = features.dim();
        U_.assign(features.horizon(), Matrix::Identity(d, d));
        log_.resize(features.horizon());
    }

    const ExplorationConfig& config() const noexcept { return cfg_; }
    int horizon() const noexcept { return static_cast<int>(U_.size()); }
    int episodes() const noexcept { return episodes_; }
    const Matrix& design(int h) const { return U_.at(h); }
    const std::vector<ExplorationRecord>& records(int h) const { return log_.at(h); }

    /// Rank-one update U~ += (rho/kappa) phi phi^T.
    void add_design(int h, const Vector& phi) { U_.at(h).noalias() += (cfg_.rho / cfg_.kappa) * phi * phi.transpose(); }
    void add_record(int h, const ExplorationRecord& r) { log_.at(h).push_back(r); }
    void finish_episode() { ++episodes_; }

private:
    ExplorationConfig cfg_;
    std::vector<Matrix> U_;
    std::vector<std::vector<ExplorationRecord>> log_;
    int episodes_ = 0;
};

/// Global argmax over (a, s, s') of ||phi(s'|s,a)||^2_{U^{-1}}, scanned in
/// lexicographic (a, s, s') order with ties kept at the first maximizer.
inline DesignPoint exploration_argmax(const FeatureMap& fm, int h, const Matrix& U) {
    const auto llt = detail::robust_llt(U);
    DesignPoint best{0, 0, 0, -1.0};
    for (int a = 0; a < fm.num_actions(); ++a)
        for (int s = 0; s < fm.num_states(); ++s) {
            const auto& ctx = fm.at(h, s, a).context;
            for (Eigen::Index i = 0; i < ctx.size(); ++i) {
                const Vector phi = ctx.feature(i);
                const double w = phi.dot(llt.solve(phi));
                if (w > best.norm_sq) best = {a, s, static_cast<int>(i), w};
            }
        }
    return best;
}

/// Plays one exploration episode in `env`. At every stage the action of the
/// global design argmax is executed from the state actually occupied, and the
/// virtual point (s~, s~') is logged regardless of that state. The design
/// matrices are updated at the end of the episode and each logged weight uses
/// the updated matrix.
inline Trajectory exploration_episode(const MnlMdp& env, ExplorationState& state, std::uint64_t seed,
                                      std::uint64_t episode) {
    const auto& fm = env.features();
    detail::require(fm.horizon() == state.horizon(), "exploration_episode: horizon mismatch");
    std::vector<DesignPoint> chosen(env.horizon());
    for (int h = 0; h < env.horizon(); ++h) chosen[h] = exploration_argmax(fm, h, state.design(h));

    Trajectory traj = rollout(env, [&](int h, int) { return chosen[h].action; }, seed, episode);

    for (int h = 0; h < env.horizon(); ++h) {
        const auto& pick = chosen[h];
        const Vector phi = fm.at(h, pick.state, pick.action).context.feature(pick.outcome);
        state.add_design(h, phi);
        const auto& st = traj.steps[h];
        const auto& next = fm.at(h, st.state, st.action).next_states;
        int outcome = 0;
        while (next[outcome] != st.next_state) ++outcome;
        const double weight = std::sqrt(std::max(0.0, phi.dot(detail::robust_llt(state.design(h)).solve(phi))));
        state.add_record(h, {st.state, st.action, outcome, pick.state, pick.outcome, weight});
    }
    state.finish_episode();
    return traj;
}

/// Penalized objective of the exploration MLE at one stage:
/// sum_t l_t(theta) + (lambda0 + 1)/2 ||theta||^2 + sum_t w_t l~_t(theta).
class ExplorationObjective {
public:
    ExplorationObjective(const FeatureMap& fm, const ExplorationState& state, int h)
        : fm_(fm), records_(state.records(h)), h_(h), ridge_(state.config().lambda0 + 1.0) {}

    double value(const Vector& theta) const {
        double v = 0.5 * ridge_ * theta.squaredNorm();
        for (const auto& r : records_) {
            v += logistic_loss(theta, fm_.at(h_, r.state, r.action).context, r.outcome);
            v += r.virtual_weight * logistic_loss(theta, fm_.at(h_, r.virtual_state, r.action).context,
                                                  r.virtual_outcome);
        }
        return v;
    }

    Vector gradient(const Vector& theta) const {
        Vector g = ridge_ * theta;
        for (const auto& r : records_) {
            g += loss_gradient(theta, fm_.at(h_, r.state, r.action).context, r.outcome);
            g += r.virtual_weight *
                 loss_gradient(theta, fm_.at(h_, r.virtual_state, r.action).context, r.virtual_outcome);
        }
        return g;
    }

    Matrix hessian(const Vector& theta) const {
        Matrix m = ridge_ * Matrix::Identity(theta.size(), theta.size());
        for (const auto& r : records_) {
            m += loss_hessian(theta, fm_.at(h_, r.state, r.action).context);
            m += r.virtual_weight * loss_hessian(theta, fm_.at(h_, r.virtual_state, r.action).context);
        }
        return m;
    }

private:
    const FeatureMap& fm_;
    const std::vector<ExplorationRecord>& records_;
    int h_;
    double ridge_;
};

/// Damped Newton with Armijo backtracking from 0; stops at gradient norm <= tol.
/// Throws NumericalFailure if that is not reached within max_iters.
template <class Objective>
Vector minimize_newton(const Objective& f, Eigen::Index dim, double tol = 1e-8, int max_iters = 200) {
    Vector x = Vector::Zero(dim);
    double fx = f.value(x);
    double gnorm = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        const Vector g = f.gradient(x);
        gnorm = g.norm();
        if (gnorm <= tol) return x;
        const Vector dir = -detail::robust_llt(f.hessian(x)).solve(g);
        const double slope = g.dot(dir);
        double step = 1.0;
        Vector trial = x + dir;
        double ft = f.value(trial);
        // Below roundoff in f the Armijo test is meaningless; take the full step.
        if (-slope <= 1e-12 * (1.0 + std::abs(fx))) {
            x = trial;
            fx = ft;
            continue;
        }
        while (ft > fx + 1e-4 * step * slope && step > 1e-12) {
            step *= 0.5;
            trial = x + step * dir;
            ft = f.value(trial);
        }
        if (!(ft <= fx) && step <= 1e-12) break;
        x = trial;
        fx = ft;
    }
    gnorm = f.gradient(x).norm();
    if (gnorm <= tol) return x;
    throw NumericalFailure("exploration_mle: Newton did not converge", gnorm);
}

/// Per-stage minimizers of the penalized exploration objective.
inline std::vector<Vector> exploration_mle(const FeatureMap& fm, const ExplorationState& state) {
    std::vector<Vector> out;
    out.reserve(state.horizon());
    for (int h = 0; h < state.horizon(); ++h)
        out.push_back(minimize_newton(ExplorationObjective(fm, state, h), fm.dim()));
    return out;
}

/// Squared-norm radius of the post-exploration sets:
/// (1 + 3 sqrt 2) [ (B + 3) sqrt(d log((tau+1) H / delta))
///                  + (tau+2)^{1/4} (kappa/rho)^{3/2} d log(1 + (tau+1)/d) ].
inline double exploration_radius_sq(int tau, int d, double B, int H, double delta, double kappa_over_rho) {
    detail::require(tau >= 0 && d >= 1 && H >= 1 && delta > 0.0 && kappa_over_rho > 0.0,
                    "exploration_radius_sq: invalid arguments");
    const double t1 = tau + 1.0;
    const double first = (B + 3.0) * std::sqrt(d * std::log(t1 * H / delta));
    const double second = std::pow(tau + 2.0, 0.25) * std::pow(kappa_over_rho, 1.5) * d * std::log(1.0 + t1 / d);
    return (1.0 + 3.0 * std::numbers::sqrt2) * (first + second);
}

/// Theta_h = {theta : ||theta - theta_hat_h||^2_{A_h} <= beta0}, with
/// A_h = (1/kappa) sum_t sum_{s'} phi phi^T + (rho/kappa) sum_t phi~ phi~^T + I.
inline std::vector<Ellipsoid> exploration_confidence_sets(const FeatureMap& fm, const ExplorationState& state,
                                                          const std::vector<Vector>& theta_hats) {
    const auto& cfg = state.config();
    detail::require(static_cast<int>(theta_hats.size()) == state.horizon(),
                    "exploration_confidence_sets: need one estimate per stage");
    const int d = fm.dim();
    const double radius_sq =
        exploration_radius_sq(state.episodes(), d, cfg.B, state.horizon(), cfg.delta, cfg.kappa / cfg.rho);
    std::vector<Ellipsoid> sets;
    for (int h = 0; h < state.horizon(); ++h) {
        Matrix A = Matrix::Identity(d, d);
        for (const auto& r : state.records(h)) {
            const Matrix& f = fm.at(h, r.state, r.action).context.features();
            A.noalias() += (1.0 / cfg.kappa) * f.transpose() * f;
            const Vector phi = fm.at(h, r.virtual_state, r.action).context.feature(r.virtual_outcome);
            A.noalias() += (cfg.rho / cfg.kappa) * phi * phi.transpose();
        }
        sets.push_back(Ellipsoid::from_squared_threshold(theta_hats[h], std::move(A), radius_sq));
    }
    return sets;
}

struct TauValue {
    std::uint64_t value = 0;
    bool saturated = false;
};

/// Exploration length guaranteeing diameter <= 1/(3 sqrt 2):
/// 4^5 (kappa/rho)^8 (1 + 3 sqrt 2)^4 d^6 (B+3)^2 log(TH/delta) [log(1 + T/d)]^6,
/// rounded up. Saturates at 2^63 with the flag set when it does not fit.
inline TauValue theoretical_tau(double kappa, double rho, int d, double B, long long T, int H, double delta) {
    detail::require(kappa > 0.0 && rho > 0.0 && d >= 1 && B > 0.0 && T >= 1 && H >= 1 && delta > 0.0,
                    "theoretical_tau: all arguments must be positive");
    const double log_value = 5.0 * std::log(4.0) + 8.0 * std::log(kappa / rho) +
                             4.0 * std::log(1.0 + 3.0 * std::numbers::sqrt2) + 6.0 * std::log(double(d)) +
                             2.0 * std::log(B + 3.0) + std::log(std::log(double(T) * H / delta)) +
                             6.0 * std::log(std::log(1.0 + double(T) / d));
    constexpr double cap = 9223372036854775808.0;   // 2^63
    if (!(log_value < std::log(cap))) return {std::uint64_t{1} << 63, true};
    const double v = std::ceil(std::exp(log_value));
    if (!(v < cap)) return {std::uint64_t{1} << 63, true};
    return {static_cast<std::uint64_t>(v), false};
}

/// diam(Theta) = max over (a, s, s') and theta_1, theta_2 in the set of
/// |(theta_1 - theta_2)^T phi| = 2 radius max ||phi||_{shape^{-1}}.
inline double diameter(const Ellipsoid& set, const FeatureMap& fm, int h) {
    if (set.radius() == 0.0) return 0.0;
    double best = 0.0;
    for (int s = 0; s < fm.num_states(); ++s)
        for (int a = 0; a < fm.num_actions(); ++a) {
            const auto& ctx = fm.at(h, s, a).context;
            for (Eigen::Index i = 0; i < ctx.size(); ++i) best = std::max(best, set.dual_norm(ctx.feature(i)));
        }
    return best == 0.0 ? 0.0 : 2.0 * set.radius() * best;
}

} // namespace mnl

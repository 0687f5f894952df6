#pragma once

// Optimistic planning. LIVAROT maximizes the expected next value over the
// confidence ellipsoid with Frank-Wolfe; the UCRL-MNL-OL baseline adds an
// explicit exploration bonus to the plug-in estimate instead.

#include "mnl/core.hpp"
#include "mnl/ellipsoid.hpp"
#include "mnl/mdp.hpp"
#include "mnl/omd.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mnl {

enum class StepRule { classic, line_search };

struct FwConfig {
    int max_iters = 30;
    StepRule step_rule = StepRule::classic;
    double gap_tolerance = 1e-6;
    bool restart = true;   // second run from the support point at the center's gradient
};

struct FwResult {
    Vector theta;
    double objective = 0.0;
    int iterations = 0;
    double gap = 0.0;
};

struct OptimisticTables {
    std::vector<Vector> V;            // H + 1 stages, last is zero
    std::vector<Matrix> Q;            // H stages, S x A
    std::vector<std::vector<Vector>> maximizers;   // optional, [h][s * A + a]

    int horizon() const noexcept { return static_cast<int>(Q.size()); }
};

namespace detail {

// f(theta) = sum_i p_i(theta) v_i and its gradient F^T (p o (v - f)).
struct ExpectedValue {
    const MnlContext& ctx;
    const Vector& values;

    double value(const Vector& theta) const { return softmax_unchecked(theta, ctx).dot(values); }

    double value_and_gradient(const Vector& theta, Vector& grad) const {
        const Vector p = softmax_unchecked(theta, ctx);
        const double f = p.dot(values);
        grad = ctx.features().transpose() * (p.array() * (values.array() - f)).matrix();
        return f;
    }
};

// Golden-section maximization of f(theta + gamma dir) over gamma in [0, 1].
inline double golden_section_step(const ExpectedValue& f, const Vector& theta, const Vector& dir) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = 0.0, b = 1.0;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f.value(theta + c * dir), fd = f.value(theta + d * dir);
    for (int i = 0; i < 40; ++i) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f.value(theta + c * dir);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f.value(theta + d * dir);
        }
    }
    return 0.5 * (a + b);
}

// One Frank-Wolfe run. Steps that would lower the objective are halved until
// they do not (up to 30 times), so the iterate objectives never decrease.
inline FwResult frank_wolfe(const Ellipsoid& set, const ExpectedValue& f, Vector theta, const FwConfig& cfg) {
    FwResult res;
    Vector grad;
    double ftheta = f.value_and_gradient(theta, grad);
    int k = 0;
    for (; k < cfg.max_iters; ++k) {
        const Vector dir = set.support_point(grad) - theta;
        res.gap = grad.dot(dir);
        if (res.gap <= cfg.gap_tolerance) break;
        double gamma = cfg.step_rule == StepRule::classic ? 2.0 / (k + 2.0) : golden_section_step(f, theta, dir);
        Vector cand = theta + gamma * dir;
        double fc = f.value(cand);
        int halvings = 0;
        while (fc < ftheta && halvings < 30) {
            gamma *= 0.5;
            cand = theta + gamma * dir;
            fc = f.value(cand);
            ++halvings;
        }
        if (fc < ftheta) break;
        theta = std::move(cand);
        ftheta = f.value_and_gradient(theta, grad);
    }
    res.theta = std::move(theta);
    res.objective = ftheta;
    res.iterations = k;
    return res;
}

} // namespace detail

/// Local maximizer of sum_{s'} p^{s'}(theta) values[s'] over the ellipsoid,
/// warm-started at the center. The linear subproblem is the ellipsoid's
/// support point. Returns the best feasible iterate found.
inline FwResult fw_inner_max(const Ellipsoid& set, const MnlContext& ctx, const Vector& values,
                             const FwConfig& cfg = {}) {
    detail::require(values.size() == ctx.size() && values.allFinite(), "fw_inner_max: values must be finite, one per outcome");
    detail::require(set.dim() == ctx.dim(), "fw_inner_max: dimension mismatch");
    detail::require(set.bounded(), "fw_inner_max: the ellipsoid must be bounded");
    detail::require(cfg.max_iters >= 1, "fw_inner_max: max_iters must be >= 1");
    const detail::ExpectedValue f{ctx, values};
    const double spread = values.maxCoeff() - values.minCoeff();
    if (set.radius() == 0.0 || spread == 0.0 || ctx.size() == 1) {
        return {set.center(), f.value(set.center()), 0, 0.0};
    }
    FwResult best = detail::frank_wolfe(set, f, set.center(), cfg);
    if (cfg.restart) {
        Vector grad;
        f.value_and_gradient(set.center(), grad);
        FwResult alt = detail::frank_wolfe(set, f, set.support_point(grad), cfg);
        if (alt.objective > best.objective) best = std::move(alt);
    }
    return best;
}

namespace detail {

inline OptimisticTables empty_tables(const MnlMdp& mdp) {
    OptimisticTables t;
    t.V.assign(mdp.horizon() + 1, Vector::Zero(mdp.num_states()));
    t.Q.assign(mdp.horizon(), Matrix::Zero(mdp.num_states(), mdp.num_actions()));
    return t;
}

inline void finish_stage(OptimisticTables& t, int h, double cap) {
    for (Eigen::Index s = 0; s < t.Q[h].rows(); ++s)
        t.V[h](s) = std::clamp(t.Q[h].row(s).maxCoeff(), 0.0, cap);
}

inline Vector gather(const Transition& tr, const Vector& v) {
    Vector out(static_cast<Eigen::Index>(tr.next_states.size()));
    for (std::size_t i = 0; i < tr.next_states.size(); ++i) out(i) = v(tr.next_states[i]);
    return out;
}

} // namespace detail

/// Backward induction Q~_h(s,a) = r_h(s,a) + max_{theta in sets[h]} E_theta[V~_{h+1}],
/// V~_h(s) = max_a Q~_h(s,a) clipped to [0, H]. Only the features and rewards
/// of `mdp` are read.
inline OptimisticTables optimistic_backward_induction(const MnlMdp& mdp, const std::vector<Ellipsoid>& sets,
                                                      const FwConfig& cfg = {}, bool keep_maximizers = false) {
    detail::require(static_cast<int>(sets.size()) == mdp.horizon(), "optimistic_backward_induction: need one set per stage");
    const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
    OptimisticTables t = detail::empty_tables(mdp);
    if (keep_maximizers) t.maximizers.assign(H, std::vector<Vector>(static_cast<std::size_t>(S) * A));
    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const auto& tr = mdp.transition(h, s, a);
                const FwResult inner = fw_inner_max(sets[h], tr.context, detail::gather(tr, t.V[h + 1]), cfg);
                t.Q[h](s, a) = mdp.reward(h, s, a) + inner.objective;
                if (keep_maximizers) t.maximizers[h][static_cast<std::size_t>(s) * A + a] = inner.theta;
            }
        detail::finish_stage(t, h, H);
    }
    return t;
}

/// Confidence sets C_{t,h} of the estimator with radius
/// learning_radius(t, delta, d, B, beta_scale).
inline std::vector<Ellipsoid> learning_confidence_sets(const EstimatorState& est, long long t, double beta_scale) {
    const auto& cfg = est.config();
    const double radius = learning_radius(t, cfg.delta, est.dim(), cfg.B, beta_scale);
    std::vector<Ellipsoid> sets;
    sets.reserve(est.horizon());
    for (int h = 0; h < est.horizon(); ++h) sets.push_back(est.confidence_set(h, radius));
    return sets;
}

inline OptimisticTables optimistic_backward_induction(const MnlMdp& mdp, const EstimatorState& est, long long t,
                                                      double beta_scale, const FwConfig& cfg = {}) {
    return optimistic_backward_induction(mdp, learning_confidence_sets(est, t, beta_scale), cfg);
}

/// Baseline radius beta_scale sqrt(d) log(U) log(t H / delta).
inline double ucrl_radius(long long t, int H, double delta, int d, int U, double beta_scale) {
    detail::require(t >= 1 && H >= 1 && delta > 0.0 && d >= 1 && U >= 1 && beta_scale >= 0.0,
                    "ucrl_radius: invalid arguments");
    return beta_scale * std::sqrt(static_cast<double>(d)) * std::log(static_cast<double>(U)) *
           std::log(static_cast<double>(t) * H / delta);
}

/// max_{s'} ||phi(s'|s,a) - phi_bar||_{design^{-1}}, phi_bar the p(theta)-mean feature.
inline double centered_feature_width(const MnlContext& ctx, const Vector& theta, const Eigen::LLT<Matrix>& design) {
    const Vector p = detail::softmax_unchecked(theta, ctx);
    const Vector mean = ctx.features().transpose() * p;
    double w = 0.0;
    for (Eigen::Index i = 0; i < ctx.size(); ++i) {
        const Vector c = ctx.feature(i) - mean;
        w = std::max(w, std::sqrt(std::max(0.0, c.dot(design.solve(c)))));
    }
    return w;
}

/// Bonus recursion Q~ = r + E_{theta_hat}[V~_{h+1}] + beta~ H width, clipped
/// to [0, H]; the width is centered_feature_width under H_{t,h}^{-1}.
inline OptimisticTables ucrl_mnl_ol_tables(const MnlMdp& mdp, const EstimatorState& est, long long t,
                                           double beta_scale) {
    detail::require(est.horizon() == mdp.horizon() && est.dim() == mdp.dim(), "ucrl_mnl_ol_tables: estimator does not match the MDP");
    const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
    const double beta =
        ucrl_radius(t, H, est.config().delta, mdp.dim(), mdp.features().max_reachable(), beta_scale);
    OptimisticTables tab = detail::empty_tables(mdp);
    for (int h = H - 1; h >= 0; --h) {
        const Vector& theta = est.theta_hat(h);
        const auto design = detail::robust_llt(est.design(h));
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const auto& tr = mdp.transition(h, s, a);
                const Vector p = detail::softmax_unchecked(theta, tr.context);
                double q = mdp.reward(h, s, a) + expected_next(tr, p, tab.V[h + 1]);
                if (beta > 0.0) q += beta * H * centered_feature_width(tr.context, theta, design);
                tab.Q[h](s, a) = std::clamp(q, 0.0, static_cast<double>(H));
            }
        detail::finish_stage(tab, h, H);
    }
    return tab;
}

/// Lowest-index maximizer of Q~_h(s, .).
inline int act(const OptimisticTables& tables, int h, int s) {
    detail::require(h >= 0 && h < tables.horizon() && s >= 0 && s < tables.Q[h].rows(), "act: (h, s) out of range");
    return argmax_lowest(tables.Q[h].row(s));
}

} // namespace mnl

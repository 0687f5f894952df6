#pragma once

// Learning-phase estimator: one online-mirror-descent step per observed
// transition, with the accumulated Hessians as design matrices.

#include "mnl/core.hpp"
#include "mnl/ellipsoid.hpp"

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace mnl {

/// argmin_{theta in set} ||theta - target||_metric. Outside the set the
/// minimizer is theta(mu) = (G + mu M)^{-1} (G target + mu M c) for the
/// multiplier mu > 0 putting it on the boundary; mu is bracketed by doubling
/// and refined by bisection until the boundary residual is below
/// tol * max(1, radius). The returned point is always feasible.
inline Vector project_onto_ellipsoid(const Vector& target, const Matrix& metric, const Ellipsoid& set,
                                     double tol = 1e-10, int max_iters = 200) {
    if (set.contains(target, 0.0)) return target;
    if (set.radius() == 0.0) return set.center();
    const Matrix& M = set.shape();
    const Vector& c = set.center();
    const double r = set.radius();
    const double scale = metric.trace() / M.trace();
    auto at = [&](double mu) -> Vector {
        return detail::robust_llt(metric + mu * M).solve(metric * target + mu * (M * c));
    };
    auto excess = [&](const Vector& th) { return set.distance(th) - r; };

    double lo = 0.0, hi = scale;
    Vector x_hi = at(hi);
    int it = 0;
    while (excess(x_hi) > 0.0) {
        if (++it > max_iters) throw NumericalFailure("project_onto_ellipsoid: could not bracket multiplier", excess(x_hi));
        lo = hi;
        hi *= 2.0;
        x_hi = at(hi);
    }
    const double band = tol * std::max(1.0, r);
    while (excess(x_hi) < -band) {
        if (++it > max_iters) throw NumericalFailure("project_onto_ellipsoid: bisection did not converge", excess(x_hi));
        if (hi - lo <= 1e-15 * hi) break;
        const double mid = 0.5 * (lo + hi);
        const Vector x_mid = at(mid);
        if (excess(x_mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x_mid;
        }
    }
    return x_hi;
}

struct EstimatorConfig {
    double lambda = 10.0;
    double delta = 0.1;
    double B = 1.0;
    double eta_omd = 1.0;   // gradient multiplier; 1 is the unscaled update
};

/// Per-stage estimate theta_hat_{t,h}, design matrix H_{t,h} (initialized to
/// lambda I) and the fixed feasible set Theta_h. theta_hat starts at the
/// point of Theta_h nearest to the origin.
class EstimatorState {
public:
    EstimatorState(int dim, std::vector<Ellipsoid> feasible_sets, EstimatorConfig cfg) : cfg_(cfg) {
        detail::require(dim >= 1 && !feasible_sets.empty(), "EstimatorState: need dim >= 1 and one set per stage");
        detail::require(cfg_.lambda > 0.0, "EstimatorState: lambda must be positive");
        detail::require(cfg_.delta > 0.0 && cfg_.delta <= 1.0, "EstimatorState: delta must lie in (0, 1]");
        detail::require(cfg_.eta_omd > 0.0, "EstimatorState: eta_omd must be positive");
        for (auto& set : feasible_sets) {
            detail::require(set.dim() == dim, "EstimatorState: feasible set dimension mismatch");
            theta_.push_back(set.bounded() ? project_onto_ellipsoid(Vector::Zero(dim), Matrix::Identity(dim, dim), set)
                                           : Vector::Zero(dim));
            design_.push_back(cfg_.lambda * Matrix::Identity(dim, dim));
        }
        sets_ = std::move(feasible_sets);
    }

    const EstimatorConfig& config() const noexcept { return cfg_; }
    int horizon() const noexcept { return static_cast<int>(theta_.size()); }
    int dim() const noexcept { return static_cast<int>(theta_.front().size()); }
    const Vector& theta_hat(int h) const { return theta_.at(h); }
    const Matrix& design(int h) const { return design_.at(h); }
    const Ellipsoid& feasible_set(int h) const { return sets_.at(h); }

    /// C_{t,h} = {theta : ||theta - theta_hat_h||_{H_h} <= radius}.
    Ellipsoid confidence_set(int h, double radius) const { return Ellipsoid(theta_.at(h), design_.at(h), radius); }

    void set_theta(int h, Vector theta) { theta_.at(h) = std::move(theta); }
    void add_design(int h, const Matrix& m) { design_.at(h) += m; }

private:
    EstimatorConfig cfg_;
    std::vector<Vector> theta_;
    std::vector<Matrix> design_;
    std::vector<Ellipsoid> sets_;
};

/// beta_scale [ sqrt((2/3) d log(t/delta)) + 24 B sqrt(d) ].
inline double learning_radius(long long t, double delta, int d, double B, double beta_scale) {
    detail::require(t >= 1, "learning_radius: t must be >= 1");
    detail::require(delta > 0.0 && delta <= 1.0, "learning_radius: delta must lie in (0, 1]");
    detail::require(d >= 1 && B >= 0.0 && beta_scale >= 0.0, "learning_radius: invalid d, B or beta_scale");
    const double dd = d;
    return beta_scale * (std::sqrt((2.0 / 3.0) * dd * std::log(static_cast<double>(t) / delta)) +
                         24.0 * B * std::sqrt(dd));
}


struct OmdStep {
    Vector previous;
    Vector unconstrained;
    Vector updated;
    bool projected = false;
    double surrogate_before = 0.0;   // surrogate at the previous iterate (always 0)
    double surrogate_after = 0.0;
};

/// eta <grad, theta - theta_hat> + 1/2 ||theta - theta_hat||^2_{metric}.
inline double omd_surrogate(const Vector& theta, const Vector& theta_hat, const Vector& grad, const Matrix& metric,
                            double eta) {
    const Vector diff = theta - theta_hat;
    return eta * grad.dot(diff) + 0.5 * diff.dot(metric * diff);
}

/// One update at stage h after observing `outcome` in `ctx`:
///   H~ = H + hess(theta_hat),
///   theta_next = argmin_{Theta_h} surrogate (projection of the Newton-like
///                candidate theta_hat - H~^{-1} eta grad in the H~ metric),
///   H += hess(theta_next).
inline OmdStep omd_update(EstimatorState& state, int h, const MnlContext& ctx, Eigen::Index outcome) {
    const double eta = state.config().eta_omd;
    OmdStep out;
    out.previous = state.theta_hat(h);
    const Vector grad = loss_gradient(out.previous, ctx, outcome);
    const Matrix metric = state.design(h) + loss_hessian(out.previous, ctx);
    out.unconstrained = out.previous - detail::robust_llt(metric).solve(eta * grad);
    const Ellipsoid& feasible = state.feasible_set(h);
    if (feasible.bounded() && !feasible.contains(out.unconstrained, 0.0)) {
        out.updated = project_onto_ellipsoid(out.unconstrained, metric, feasible);
        out.projected = true;
    } else {
        out.updated = out.unconstrained;
    }
    out.surrogate_after = omd_surrogate(out.updated, out.previous, grad, metric, eta);
    state.add_design(h, loss_hessian(out.updated, ctx));
    state.set_theta(h, out.updated);
    return out;
}

} // namespace mnl

#pragma once

#include "mnl/core.hpp"
#include "mnl/mdp.hpp"
#include "mnl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace mnl {

/// Parameter samples used to estimate kappa: theta = 0 plus `resolution`
/// points on the sphere ||theta|| = B. In d = 1 the sphere is {-B, B}; in
/// d = 2 the points are equally spaced in angle; otherwise directions are
/// normalized Gaussian draws from a fixed stream.
inline std::vector<Vector> kappa_sample_points(int dim, double B, int resolution, std::uint64_t seed = 0) {
    std::vector<Vector> pts;
    pts.push_back(Vector::Zero(dim));
    if (B <= 0.0) return pts;
    Rng rng = Rng::keyed(seed, {0x6b617070ULL});
    for (int k = 0; k < resolution; ++k) {
        Vector u(dim);
        if (dim == 1) {
            u(0) = (k % 2 == 0) ? 1.0 : -1.0;
        } else if (dim == 2) {
            const double angle = 2.0 * std::numbers::pi * k / resolution;
            u << std::cos(angle), std::sin(angle);
        } else {
            for (int i = 0; i < dim; ++i) u(i) = rng.normal();
            while (u.norm() == 0.0) u(0) = rng.normal();
            u.normalize();
        }
        pts.push_back(B * u);
    }
    return pts;
}

/// Smallest p^{s'} p^{s''} over reachable pairs of every (h, s, a) at theta.
/// The pair minimum is (min_i p_i)^2 since s' = s'' is allowed.
inline double min_probability_product(const FeatureMap& fm, int h, const Vector& theta) {
    double m = 1.0;
    for (int s = 0; s < fm.num_states(); ++s)
        for (int a = 0; a < fm.num_actions(); ++a) {
            const double pmin = detail::softmax_unchecked(theta, fm.at(h, s, a).context).minCoeff();
            m = std::min(m, pmin * pmin);
        }
    return m;
}

/// rho exactly; kappa as the largest 1/(p p') seen over the sample points of
/// kappa_sample_points(d, B, grid_resolution). The sample estimate can miss
/// interior minima; kappa_upper_bound is the safe alternative.
inline ModelConstants exact_kappa_rho(const MnlMdp& mdp, int grid_resolution, std::uint64_t seed = 0) {
    detail::require(mdp.num_states() >= 1 && mdp.num_actions() >= 1 && mdp.horizon() >= 1,
                    "exact_kappa_rho: empty MDP");
    detail::require(grid_resolution >= 0, "exact_kappa_rho: grid_resolution must be >= 0");
    const auto& fm = mdp.features();
    ModelConstants c;
    c.B = mdp.B();
    c.rho = fm.stage_max_norm(0);
    for (int h = 1; h < mdp.horizon(); ++h) c.rho = std::min(c.rho, fm.stage_max_norm(h));

    double min_prod = 1.0;
    for (const auto& theta : kappa_sample_points(mdp.dim(), mdp.B(), grid_resolution, seed))
        for (int h = 0; h < mdp.horizon(); ++h) min_prod = std::min(min_prod, min_probability_product(fm, h, theta));
    c.kappa = 1.0 / min_prod;
    return c;
}

} // namespace mnl

#pragma once

// Instance generators: the chain MDP with an absorbing rewarding state,
// KL-constrained robust MDPs written in MNL form, and random tabular MNL
// instances used as fixtures.

#include "mnl/core.hpp"
#include "mnl/mdp.hpp"
#include "mnl/rng.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mnl {

// ---------------------------------------------------------------------------
// Hard chain instance
// ---------------------------------------------------------------------------

/// Closed-form quantities of the chain instance.
struct HardInstanceConstants {
    double delta = 0.0;        // 1/H
    double gap = 0.0;          // Delta = 1 / (4 sqrt(2 H T))
    double delta_bar = 0.0;    // per-coordinate magnitude of theta*
    double log_offset = 0.0;   // log(H - 1)
    double p_star = 0.0;       // absorption probability under the best action
    double B = 0.0;            // max(1, ||theta_h||) for the realized parameters
};

/// Validates (d, H, T) and evaluates the instance constants. `delta_bar_scale`
/// multiplies the log-ratio defining delta_bar; with 1 the optimal absorption
/// probability is exactly delta + (d-1) Delta.
inline HardInstanceConstants hard_instance_constants(int d, int H, long long T, double delta_bar_scale = 1.0) {
    detail::require(d >= 2, "hard_instance: requires d >= 2");
    detail::require(H >= 3, "hard_instance: requires H >= 3");
    detail::require(T >= 1, "hard_instance: requires T >= 1");
    detail::require(delta_bar_scale > 0.0, "hard_instance: delta_bar_scale must be positive");
    HardInstanceConstants c;
    c.delta = 1.0 / H;
    c.gap = 1.0 / (4.0 * std::sqrt(2.0 * H * static_cast<double>(T)));
    const double shift = (d - 1) * c.gap;
    if (!(1.0 - c.delta - shift > 0.0)) {
        std::ostringstream os;
        os << "hard_instance: infeasible (d, H, T): requires 1 - 1/H - (d-1)/(4 sqrt(2 H T)) > 0, got "
           << (1.0 - c.delta - shift);
        throw InvalidInput(os.str());
    }
    const double ratio = (1.0 - c.delta) * (c.delta + shift) / (c.delta * (1.0 - c.delta - shift));
    c.delta_bar = delta_bar_scale / (d - 1) * std::log(ratio);
    c.log_offset = std::log(H - 1.0);
    c.p_star = 1.0 / (1.0 + (H - 1.0) * std::exp(-(d - 1) * c.delta_bar));
    c.B = std::max(1.0, (d - 1) * c.delta_bar + c.log_offset);
    return c;
}

/// Index of the action vector a in {-1, 1}^{d-1}: bit i set means a_i = +1.
inline Vector hard_instance_action(int d, int index) {
    Vector a(d - 1);
    for (int i = 0; i < d - 1; ++i) a(i) = ((index >> i) & 1) ? 1.0 : -1.0;
    return a;
}

struct HardInstanceOptions {
    int d = 2;
    int H = 5;
    long long T = 1000;
    std::uint64_t seed = 0;
    bool per_stage_resample = true;
    double delta_bar_scale = 1.0;
};

/// States 0..H are the chain s_1..s_{H+1}; state H+1 is the absorbing
/// rewarding state s_{H+2}. From chain state i < H every action leads to
/// i+1 or to H+1, with absorption probability 1 / (1 + (H-1) exp(-theta*^T a)).
///
/// The model parameter has d coordinates: d-1 carry the action part of the
/// logit and the last carries the log(H-1) offset through a constant feature.
/// The split between the two feature coordinates minimizes ||theta_h||, which
/// becomes (d-1) delta_bar + log(H-1).
inline MnlMdp hard_instance(const HardInstanceOptions& opt) {
    const int d = opt.d, H = opt.H;
    detail::require(d <= 31, "hard_instance: d too large for the enumerated action set");
    const auto c = hard_instance_constants(d, H, opt.T, opt.delta_bar_scale);
    const int S = H + 2, A = 1 << (d - 1), absorbing = H + 1, terminal = H;

    const double act_mass = (d - 1) * c.delta_bar;
    const double alpha = std::sqrt(act_mass / (act_mass + c.log_offset));
    const double beta = std::sqrt(c.log_offset / (act_mass + c.log_offset));
    const double root = std::sqrt(d - 1.0);

    std::vector<Transition> table;
    table.reserve(static_cast<std::size_t>(H) * S * A);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                if (s == absorbing || s == terminal) {
                    table.push_back({MnlContext(Matrix::Zero(1, d)), {s}});
                    continue;
                }
                Matrix f = Matrix::Zero(2, d);
                f.row(0).head(d - 1) = -(alpha / root) * hard_instance_action(d, a).transpose();
                f(0, d - 1) = beta;
                table.push_back({MnlContext(std::move(f)), {s + 1, absorbing}});
            }

    MnlMdp::Parts parts;
    parts.features = FeatureMap(d, H, S, A, std::move(table));
    Rng shared = Rng::keyed(opt.seed, {0x68617264ULL});
    Vector signs(d - 1);
    for (int i = 0; i < d - 1; ++i) signs(i) = shared.coin() ? 1.0 : -1.0;
    for (int h = 0; h < H; ++h) {
        if (opt.per_stage_resample) {
            Rng rng = Rng::keyed(opt.seed, {0x68617264ULL, static_cast<std::uint64_t>(h) + 1});
            for (int i = 0; i < d - 1; ++i) signs(i) = rng.coin() ? 1.0 : -1.0;
        }
        Vector theta(d);
        theta.head(d - 1) = (c.delta_bar * root / alpha) * signs;
        theta(d - 1) = c.log_offset / beta;
        parts.theta_star.push_back(std::move(theta));
    }
    parts.rewards.assign(static_cast<std::size_t>(H) * S * A, 0.0);
    for (int h = 0; h < H; ++h)
        for (int a = 0; a < A; ++a) parts.rewards[(static_cast<std::size_t>(h) * S + absorbing) * A + a] = 1.0;
    parts.initial_state = 0;
    parts.B = c.B;
    parts.name = "hard";
    return MnlMdp(std::move(parts));
}

/// Sign vector theta*_h restricted to the action coordinates, i.e. the
/// optimal action at stage h.
inline int hard_instance_optimal_action(const MnlMdp& mdp, int h) {
    const int d = mdp.dim();
    int index = 0;
    for (int i = 0; i < d - 1; ++i)
        if (mdp.theta_star(h)(i) > 0.0) index |= 1 << i;
    return index;
}

// ---------------------------------------------------------------------------
// KL-constrained robust instances
// ---------------------------------------------------------------------------

/// Nominal model of a KL-constrained robust MDP: nominal kernel p0 on the
/// reachable sets, state features psi (rows, dimension d-1) and rewards.
struct KlNominal {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    std::vector<std::vector<int>> next_states;   // [h][s][a] row-major
    std::vector<Vector> nominal;                 // aligned with next_states
    Matrix psi;                                  // num_states x (d-1)
    std::vector<double> rewards;                 // [h][s][a] row-major
    int initial_state = 0;

    std::size_t index(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * num_states + s) * num_actions + a;
    }
};

namespace detail {

inline void check_kl_nominal(const KlNominal& n) {
    require(n.num_states >= 1 && n.num_actions >= 1 && n.horizon >= 1, "kl_robust_instance: empty model");
    const std::size_t cells = static_cast<std::size_t>(n.horizon) * n.num_states * n.num_actions;
    require(n.next_states.size() == cells && n.nominal.size() == cells && n.rewards.size() == cells,
            "kl_robust_instance: tables must have H * S * A entries");
    require(n.psi.rows() == n.num_states && n.psi.cols() >= 1, "kl_robust_instance: psi must be S x (d-1)");
    constexpr double tol = 1e-12;
    for (Eigen::Index s = 0; s < n.psi.rows(); ++s)
        require(n.psi.row(s).norm() <= 1.0 + tol, "kl_robust_instance: ||psi(s')||_2 must be <= 1");
    for (std::size_t k = 0; k < cells; ++k) {
        const auto& p = n.nominal[k];
        require(p.size() >= 1 && p.size() == static_cast<Eigen::Index>(n.next_states[k].size()),
                "kl_robust_instance: nominal kernel must align with the reachable set");
        require((p.array() > 0.0).all(), "kl_robust_instance: nominal kernel must be positive on the reachable set");
        require(std::abs(p.sum() - 1.0) <= 1e-9, "kl_robust_instance: nominal kernel must sum to 1");
        require(p.array().log().abs().maxCoeff() <= 1.0 + tol,
                "kl_robust_instance: requires ||log p0(.|s,a)||_inf <= 1");
    }
}

inline Transition kl_transition(const KlNominal& n, std::size_t k) {
    const auto& next = n.next_states[k];
    const Eigen::Index d = n.psi.cols() + 1;
    Matrix f(static_cast<Eigen::Index>(next.size()), d);
    for (std::size_t i = 0; i < next.size(); ++i) {
        f(i, 0) = std::log(n.nominal[k](i));
        f.row(i).tail(d - 1) = n.psi.row(next[i]);
    }
    return {MnlContext(std::move(f)), next};
}

} // namespace detail

/// MNL form of the KL worst-case kernel p0 exp(-eta alpha^T psi):
/// phi(s'|s,a) = (log p0(s'|s,a), psi(s')), theta_h = (1, -eta alpha_{h+1}).
/// alpha[h] is the value representation of the stage after h.
/// Features are bounded by sqrt(2), which is recorded as the feature bound.
inline MnlMdp kl_robust_instance(const KlNominal& nominal, const std::vector<Vector>& alpha, double eta) {
    detail::check_kl_nominal(nominal);
    detail::require(std::isfinite(eta) && eta >= 0.0, "kl_robust_instance: eta must be >= 0");
    detail::require(static_cast<int>(alpha.size()) == nominal.horizon, "kl_robust_instance: need one alpha per stage");
    const Eigen::Index d = nominal.psi.cols() + 1;

    std::vector<Transition> table;
    table.reserve(nominal.next_states.size());
    for (std::size_t k = 0; k < nominal.next_states.size(); ++k) table.push_back(detail::kl_transition(nominal, k));

    MnlMdp::Parts parts;
    parts.features = FeatureMap(static_cast<int>(d), nominal.horizon, nominal.num_states, nominal.num_actions,
                                std::move(table));
    double B = 1.0;
    for (const auto& al : alpha) {
        detail::require(al.size() == d - 1 && al.allFinite(), "kl_robust_instance: alpha must have dimension d-1");
        Vector theta(d);
        theta(0) = 1.0;
        theta.tail(d - 1) = -eta * al;
        B = std::max(B, std::sqrt(1.0 + eta * eta * al.squaredNorm()));
        parts.theta_star.push_back(std::move(theta));
    }
    parts.rewards = nominal.rewards;
    parts.initial_state = nominal.initial_state;
    parts.B = B;
    parts.feature_bound = std::sqrt(2.0);
    parts.name = "kl-robust";
    return MnlMdp(std::move(parts));
}

struct KlSelfConsistent {
    MnlMdp mdp;
    std::vector<Vector> alpha;
    double max_residual = 0.0;   // max |psi alpha_{h+1} - V*_{h+1}|
};

/// Builds the instance whose alpha represents its own optimal values.
/// theta_h only depends on V*_{h+1}, so one backward pass settles the
/// circular dependency: alpha_{H+1} = 0, then for each earlier stage the
/// values are computed under the already-fixed later kernels and fitted by
/// least squares on psi. The fit is exact when psi spans R^S.
inline KlSelfConsistent kl_robust_self_consistent(const KlNominal& nominal, double eta) {
    detail::check_kl_nominal(nominal);
    const int H = nominal.horizon, S = nominal.num_states, A = nominal.num_actions;
    const Eigen::Index k = nominal.psi.cols();
    std::vector<Vector> alpha(H, Vector::Zero(k));
    Vector next_values = Vector::Zero(S);
    double residual = 0.0;
    const auto solver = nominal.psi.completeOrthogonalDecomposition();
    for (int h = H - 1; h >= 0; --h) {
        if (h < H - 1) {
            alpha[h] = solver.solve(next_values);
            residual = std::max(residual, (nominal.psi * alpha[h] - next_values).cwiseAbs().maxCoeff());
        }
        Vector theta(k + 1);
        theta(0) = 1.0;
        theta.tail(k) = -eta * alpha[h];
        Vector values(S);
        for (int s = 0; s < S; ++s) {
            double best = -1.0;
            for (int a = 0; a < A; ++a) {
                const std::size_t idx = nominal.index(h, s, a);
                const Transition tr = detail::kl_transition(nominal, idx);
                const Vector p = detail::softmax_unchecked(theta, tr.context);
                best = std::max(best, nominal.rewards[idx] + expected_next(tr, p, next_values));
            }
            values(s) = best;
        }
        next_values = values;
    }
    KlSelfConsistent out{kl_robust_instance(nominal, alpha, eta), alpha, residual};
    return out;
}

/// Random nominal model. Reachable sets have one or two states (the only sizes
/// compatible with ||log p0||_inf <= 1), nominal probabilities of two-state
/// sets lie in [1/e, 1 - 1/e]. With canonical_psi, psi(s') = e_{s'}; otherwise
/// psi rows are uniform in the unit ball of dimension psi_dim.
inline KlNominal random_kl_nominal(int num_states, int num_actions, int horizon, int psi_dim, bool canonical_psi,
                                   std::uint64_t seed) {
    detail::require(num_states >= 1 && num_actions >= 1 && horizon >= 1, "random_kl_nominal: sizes must be positive");
    Rng rng = Rng::keyed(seed, {0x6b6cULL});
    KlNominal n;
    n.num_states = num_states;
    n.num_actions = num_actions;
    n.horizon = horizon;
    const double lo = std::exp(-1.0);
    for (int h = 0; h < horizon; ++h)
        for (int s = 0; s < num_states; ++s)
            for (int a = 0; a < num_actions; ++a) {
                if (num_states == 1) {
                    n.next_states.push_back({0});
                    n.nominal.push_back(Vector::Ones(1));
                } else {
                    const int first = static_cast<int>(rng.below(num_states));
                    int second = static_cast<int>(rng.below(num_states - 1));
                    if (second >= first) ++second;
                    const double q = rng.uniform(lo, 1.0 - lo);
                    n.next_states.push_back({first, second});
                    Vector p(2);
                    p << q, 1.0 - q;
                    n.nominal.push_back(p);
                }
                n.rewards.push_back(rng.uniform());
            }
    if (canonical_psi) {
        n.psi = Matrix::Identity(num_states, num_states);
    } else {
        detail::require(psi_dim >= 1, "random_kl_nominal: psi_dim must be positive");
        n.psi.resize(num_states, psi_dim);
        for (int s = 0; s < num_states; ++s) {
            Vector u(psi_dim);
            for (int i = 0; i < psi_dim; ++i) u(i) = rng.normal();
            u *= std::pow(rng.uniform(), 1.0 / psi_dim) / u.norm();
            n.psi.row(s) = u.transpose();
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// Random tabular instances
// ---------------------------------------------------------------------------

namespace detail {

inline Vector uniform_in_ball(Rng& rng, int dim, double radius) {
    Vector u(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        for (int i = 0; i < dim; ++i) u(i) = rng.normal();
        norm = u.norm();
    }
    return u * (radius * std::pow(rng.uniform(), 1.0 / dim) / norm);
}

} // namespace detail

/// Every state is reachable from every (h, s, a); features uniform in the
/// unit ball, theta*_h uniform in the ball of radius B, rewards uniform.
inline MnlMdp random_tabular_instance(int num_states, int num_actions, int d, int H, double B, std::uint64_t seed) {
    detail::require(num_states >= 1 && num_actions >= 1 && d >= 1 && H >= 1 && B > 0.0,
                    "random_tabular_instance: all arguments must be positive");
    Rng rng = Rng::keyed(seed, {0x72616e64ULL});
    std::vector<int> all(num_states);
    for (int s = 0; s < num_states; ++s) all[s] = s;
    std::vector<Transition> table;
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < num_states; ++s)
            for (int a = 0; a < num_actions; ++a) {
                Matrix f(num_states, d);
                for (int i = 0; i < num_states; ++i) f.row(i) = detail::uniform_in_ball(rng, d, 1.0).transpose();
                table.push_back({MnlContext(std::move(f)), all});
            }
    MnlMdp::Parts parts;
    parts.features = FeatureMap(d, H, num_states, num_actions, std::move(table));
    for (int h = 0; h < H; ++h) parts.theta_star.push_back(detail::uniform_in_ball(rng, d, B));
    for (std::size_t k = 0; k < static_cast<std::size_t>(H) * num_states * num_actions; ++k)
        parts.rewards.push_back(rng.uniform());
    parts.B = B;
    parts.name = "random";
    return MnlMdp(std::move(parts));
}

// ---------------------------------------------------------------------------

/// Both sides of N - 1 - (1-q) sum_{k<N} q^k (N-1-k) = (1 - q^N)/(1 - q) - 1,
/// the left by direct summation.
inline std::pair<double, double> geometric_sum_check(int N, double q) {
    detail::require(N >= 1, "geometric_sum_check: N must be >= 1");
    detail::require(q > 0.0 && q < 1.0, "geometric_sum_check: q must lie in (0, 1)");
    double sum = 0.0, qk = 1.0;
    for (int k = 0; k < N; ++k) {
        sum += qk * (N - 1 - k);
        qk *= q;
    }
    const double lhs = (N - 1) - (1.0 - q) * sum;
    const double rhs = (1.0 - std::pow(q, N)) / (1.0 - q) - 1.0;
    return {lhs, rhs};
}

} // namespace mnl

#pragma once

// Episodic MNL mixture MDP: model container, simulation, and exact
// dynamic-programming oracles.

#include "mnl/core.hpp"
#include "mnl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mnl {

/// Reachable next states of one (h, s, a) and their features, row-aligned.
struct Transition {
    MnlContext context;
    std::vector<int> next_states;
};

/// Known feature map phi(s' | s, a) at every stage, stored per (h, s, a).
/// Stages are 0-based internally.
class FeatureMap {
public:
    FeatureMap() = default;

    FeatureMap(int dim, int horizon, int num_states, int num_actions, std::vector<Transition> table)
        : dim_(dim), horizon_(horizon), num_states_(num_states), num_actions_(num_actions),
          table_(std::move(table)) {
        detail::require(dim_ >= 1, "FeatureMap: dimension must be positive");
        detail::require(horizon_ >= 1 && num_states_ >= 1 && num_actions_ >= 1,
                        "FeatureMap: horizon, state and action counts must be positive");
        detail::require(table_.size() == static_cast<std::size_t>(horizon_) * num_states_ * num_actions_,
                        "FeatureMap: table size must equal H * S * A");
        for (const auto& tr : table_) {
            detail::require(tr.context.size() >= 1, "FeatureMap: every (h,s,a) needs a nonempty reachable set");
            detail::require(tr.context.dim() == dim_, "FeatureMap: feature dimension mismatch");
            detail::require(static_cast<Eigen::Index>(tr.next_states.size()) == tr.context.size(),
                            "FeatureMap: next-state list must align with feature rows");
            auto sorted = tr.next_states;
            std::sort(sorted.begin(), sorted.end());
            detail::require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                            "FeatureMap: duplicate next state in a reachable set");
            for (int s : sorted)
                detail::require(s >= 0 && s < num_states_, "FeatureMap: next state out of range");
            max_reachable_ = std::max(max_reachable_, static_cast<int>(tr.next_states.size()));
        }
    }

    int dim() const noexcept { return dim_; }
    int horizon() const noexcept { return horizon_; }
    int num_states() const noexcept { return num_states_; }
    int num_actions() const noexcept { return num_actions_; }

    /// U: the largest reachable-set size.
    int max_reachable() const noexcept { return max_reachable_; }

    const Transition& at(int h, int s, int a) const { return table_.at(index(h, s, a)); }

    double stage_max_norm(int h) const {
        double m = 0.0;
        for (int s = 0; s < num_states_; ++s)
            for (int a = 0; a < num_actions_; ++a) m = std::max(m, at(h, s, a).context.max_feature_norm());
        return m;
    }

    double max_feature_norm() const {
        double m = 0.0;
        for (int h = 0; h < horizon_; ++h) m = std::max(m, stage_max_norm(h));
        return m;
    }

private:
    std::size_t index(int h, int s, int a) const {
        detail::require(h >= 0 && h < horizon_ && s >= 0 && s < num_states_ && a >= 0 && a < num_actions_,
                        "FeatureMap: (h, s, a) out of range");
        return (static_cast<std::size_t>(h) * num_states_ + s) * num_actions_ + a;
    }

    int dim_ = 0;
    int horizon_ = 0;
    int num_states_ = 0;
    int num_actions_ = 0;
    int max_reachable_ = 0;
    std::vector<Transition> table_;
};

/// A B-bounded episodic MNL mixture MDP. Immutable after construction.
class MnlMdp {
public:
    struct Parts {
        FeatureMap features;
        std::vector<Vector> theta_star;   // one per stage
        std::vector<double> rewards;      // [h][s][a], row-major
        int initial_state = 0;
        double B = 1.0;                   // known bound on ||theta*_h||
        double feature_bound = 1.0;       // known bound on ||phi||
        std::string name;
    };

    MnlMdp() = default;

    explicit MnlMdp(Parts parts) : p_(std::move(parts)) {
        const auto& f = p_.features;
        const int H = f.horizon();
        detail::require(H >= 1, "MnlMdp: horizon must be >= 1");
        detail::require(static_cast<int>(p_.theta_star.size()) == H, "MnlMdp: need one theta* per stage");
        detail::require(p_.rewards.size() == static_cast<std::size_t>(H) * f.num_states() * f.num_actions(),
                        "MnlMdp: reward table size must equal H * S * A");
        detail::require(p_.initial_state >= 0 && p_.initial_state < f.num_states(),
                        "MnlMdp: initial state out of range");
        detail::require(std::isfinite(p_.B) && p_.B > 0.0, "MnlMdp: B must be positive and finite");
        constexpr double slack = 1e-9;
        for (const auto& th : p_.theta_star) {
            detail::require(th.size() == f.dim() && th.allFinite(), "MnlMdp: theta* must be finite with dimension d");
            detail::require(th.norm() <= p_.B * (1.0 + slack), "MnlMdp: ||theta*_h|| exceeds B");
        }
        for (double r : p_.rewards)
            detail::require(r >= 0.0 && r <= 1.0, "MnlMdp: rewards must lie in [0, 1]");
        detail::require(f.max_feature_norm() <= p_.feature_bound * (1.0 + slack),
                        "MnlMdp: feature norm exceeds the declared bound");
    }

    int num_states() const noexcept { return p_.features.num_states(); }
    int num_actions() const noexcept { return p_.features.num_actions(); }
    int horizon() const noexcept { return p_.features.horizon(); }
    int dim() const noexcept { return p_.features.dim(); }
    int initial_state() const noexcept { return p_.initial_state; }
    double B() const noexcept { return p_.B; }
    double feature_bound() const noexcept { return p_.feature_bound; }
    const std::string& name() const noexcept { return p_.name; }
    const FeatureMap& features() const noexcept { return p_.features; }
    const std::vector<Vector>& theta_star() const noexcept { return p_.theta_star; }
    const Vector& theta_star(int h) const { return p_.theta_star.at(h); }
    const std::vector<double>& rewards() const noexcept { return p_.rewards; }

    double reward(int h, int s, int a) const {
        check(h, s, a);
        return p_.rewards[(static_cast<std::size_t>(h) * num_states() + s) * num_actions() + a];
    }

    const Transition& transition(int h, int s, int a) const { return p_.features.at(h, s, a); }

    /// True transition probabilities, aligned with transition(h,s,a).next_states.
    Vector true_probs(int h, int s, int a) const {
        return detail::softmax_unchecked(theta_star(h), transition(h, s, a).context);
    }

private:
    void check(int h, int s, int a) const {
        detail::require(h >= 0 && h < horizon() && s >= 0 && s < num_states() && a >= 0 && a < num_actions(),
                        "MnlMdp: (h, s, a) out of range");
    }

    Parts p_;
};

/// V has H+1 stages (last is zero); Q and policy have H.
struct ValueTables {
    std::vector<Vector> V;
    std::vector<Matrix> Q;
    std::vector<std::vector<int>> policy;

    int horizon() const noexcept { return static_cast<int>(Q.size()); }
};

struct TrajectoryStep {
    int h = 0;
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;

    double total_reward() const {
        double g = 0.0;
        for (const auto& st : steps) g += st.reward;
        return g;
    }
};

struct StepResult {
    int next_state;
    double reward;
};

/// Samples the next state by inverse CDF over the true kernel.
inline StepResult step(const MnlMdp& mdp, int h, int s, int a, Rng& rng) {
    const double reward = mdp.reward(h, s, a);
    const auto& tr = mdp.transition(h, s, a);
    const Vector p = mdp.true_probs(h, s, a);
    const double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i + 1 < p.size(); ++i) {
        acc += p(i);
        if (u < acc) return {tr.next_states[i], reward};
    }
    return {tr.next_states.back(), reward};
}

/// Runs one episode from the initial state. Stage h draws from the stream
/// keyed by (seed, episode, h), so trajectories do not depend on what else
/// consumed randomness.
template <class Policy>
Trajectory rollout(const MnlMdp& mdp, Policy&& policy, std::uint64_t seed, std::uint64_t episode) {
    Trajectory traj;
    traj.steps.reserve(mdp.horizon());
    int s = mdp.initial_state();
    for (int h = 0; h < mdp.horizon(); ++h) {
        const int a = policy(h, s);
        Rng rng = Rng::keyed(seed, {episode, static_cast<std::uint64_t>(h)});
        const auto [next, r] = step(mdp, h, s, a, rng);
        traj.steps.push_back({h, s, a, r, next});
        s = next;
    }
    return traj;
}

/// Expected value of `values` over the next state of (h, s, a) under weights p.
inline double expected_next(const Transition& tr, const Vector& p, const Vector& values) {
    double e = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) e += p(i) * values(tr.next_states[i]);
    return e;
}

/// Lowest-index maximizer of a row.
inline int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    int best = 0;
    for (int a = 1; a < row.size(); ++a)
        if (row(a) > row(best)) best = a;
    return best;
}

/// Backward induction with the true softmax kernel.
inline ValueTables exact_value_iteration(const MnlMdp& mdp) {
    const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
    ValueTables t;
    t.V.assign(H + 1, Vector::Zero(S));
    t.Q.assign(H, Matrix::Zero(S, A));
    t.policy.assign(H, std::vector<int>(S, 0));
    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const auto& tr = mdp.transition(h, s, a);
                t.Q[h](s, a) = mdp.reward(h, s, a) + expected_next(tr, mdp.true_probs(h, s, a), t.V[h + 1]);
            }
            const int best = argmax_lowest(t.Q[h].row(s));
            t.policy[h][s] = best;
            t.V[h](s) = t.Q[h](s, best);
        }
    }
    return t;
}

/// Var_{s' ~ p*}[V_{h+1}(s') | s, a].
inline double next_value_variance(const MnlMdp& mdp, const ValueTables& tables, int h, int s, int a) {
    const auto& tr = mdp.transition(h, s, a);
    const Vector p = mdp.true_probs(h, s, a);
    const Vector& v = tables.V[h + 1];
    const double mean = expected_next(tr, p, v);
    double var = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double dv = v(tr.next_states[i]) - mean;
        var += p(i) * dv * dv;
    }
    return var;
}

namespace detail {

inline void check_tables(const MnlMdp& mdp, const ValueTables& tables, const char* where) {
    require(tables.horizon() == mdp.horizon() && static_cast<int>(tables.V.size()) == mdp.horizon() + 1,
            std::string(where) + ": value tables do not match the MDP horizon");
}

// Mean over the steps of H^-2 Var[V*_{h+1}] at the visited state under the
// optimal action.
inline double trajectory_normalized_variance(const MnlMdp& mdp, const ValueTables& tables, const Trajectory& tr) {
    const double H = mdp.horizon();
    double acc = 0.0;
    for (const auto& st : tr.steps)
        acc += next_value_variance(mdp, tables, st.h, st.state, tables.policy[st.h][st.state]) / (H * H);
    return acc / H;
}

} // namespace detail

/// sigma_bar_T along the given trajectories: the square root of the average
/// normalized variance of V*_{h+1} at the visited states, each evaluated under
/// the optimal action there (not the action that was played).
inline double sigma_bar_on_trajectory(const MnlMdp& mdp, const ValueTables& tables,
                                      const std::vector<Trajectory>& trajectories) {
    detail::check_tables(mdp, tables, "sigma_bar_on_trajectory");
    detail::require(!trajectories.empty(), "sigma_bar_on_trajectory: no trajectories");
    double acc = 0.0;
    for (const auto& tr : trajectories) {
        detail::require(static_cast<int>(tr.steps.size()) == mdp.horizon(),
                        "sigma_bar_on_trajectory: trajectory length differs from the horizon");
        for (int h = 0; h < mdp.horizon(); ++h)
            detail::require(tr.steps[h].h == h && tr.steps[h].state >= 0 && tr.steps[h].state < mdp.num_states(),
                            "sigma_bar_on_trajectory: malformed trajectory step");
        acc += detail::trajectory_normalized_variance(mdp, tables, tr);
    }
    return std::sqrt(acc / static_cast<double>(trajectories.size()));
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int samples = 0;
};

/// Monte-Carlo estimate of E_{pi*}[sigma_bar^2] from rollouts of the optimal
/// policy; returns the mean of the per-trajectory sigma_bar^2 values.
inline MonteCarloEstimate sigma_bar_under_optimal_policy(const MnlMdp& mdp, const ValueTables& tables,
                                                         int num_rollouts, std::uint64_t seed) {
    detail::check_tables(mdp, tables, "sigma_bar_under_optimal_policy");
    detail::require(num_rollouts >= 1, "sigma_bar_under_optimal_policy: num_rollouts must be >= 1");
    auto optimal = [&](int h, int s) { return tables.policy[h][s]; };
    double sum = 0.0, sum_sq = 0.0;
    for (int k = 0; k < num_rollouts; ++k) {
        const Trajectory tr = rollout(mdp, optimal, seed, static_cast<std::uint64_t>(k));
        const double x = detail::trajectory_normalized_variance(mdp, tables, tr);
        sum += x;
        sum_sq += x * x;
    }
    const double n = num_rollouts;
    MonteCarloEstimate est;
    est.samples = num_rollouts;
    est.mean = sum / n;
    if (num_rollouts > 1) {
        const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
        est.std_error = std::sqrt(var / n);
    }
    return est;
}

} // namespace mnl

#pragma once

// Experiment orchestration: seeded runs, regret accounting, CSV output and
// aggregation.

#include "mnl/constants.hpp"
#include "mnl/exploration.hpp"
#include "mnl/instances.hpp"
#include "mnl/mdp.hpp"
#include "mnl/omd.hpp"
#include "mnl/planner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mnl {

enum class Algo { livarot, ucrl_mnl_ol, oracle };
enum class InstanceKind { hard, kl_robust, random };
enum class KappaMode { upper_bound, estimate };

inline std::string to_string(Algo a) {
    switch (a) {
    case Algo::livarot: return "livarot";
    case Algo::ucrl_mnl_ol: return "ucrl-mnl-ol";
    case Algo::oracle: return "oracle";
    }
    return "?";
}

inline std::string to_string(InstanceKind k) {
    switch (k) {
    case InstanceKind::hard: return "hard";
    case InstanceKind::kl_robust: return "kl-robust";
    case InstanceKind::random: return "random";
    }
    return "?";
}

inline Algo parse_algo(std::string_view s) {
    if (s == "livarot") return Algo::livarot;
    if (s == "ucrl-mnl-ol") return Algo::ucrl_mnl_ol;
    if (s == "oracle") return Algo::oracle;
    throw InvalidInput("unknown algorithm '" + std::string(s) + "'");
}

inline InstanceKind parse_instance(std::string_view s) {
    if (s == "hard") return InstanceKind::hard;
    if (s == "kl-robust") return InstanceKind::kl_robust;
    if (s == "random") return InstanceKind::random;
    throw InvalidInput("unknown instance '" + std::string(s) + "'");
}

/// Learner hyperparameters. Defaults are the LIVAROT settings; see
/// baseline_defaults() for UCRL-MNL-OL.
struct Hyperparameters {
    int tau = 80;
    double lambda0 = 1.0;
    double lambda = 10.0;
    double eta_omd = 20.0;
    double beta_scale = 0.01;
};

inline Hyperparameters baseline_defaults() {
    Hyperparameters h;
    h.tau = 0;
    h.eta_omd = 10.0;
    h.beta_scale = 0.02;
    return h;
}

struct RunConfig {
    std::vector<Algo> algos{Algo::livarot};
    InstanceKind instance = InstanceKind::hard;

    // instance parameters
    int d = 2;
    std::vector<int> horizons{5};
    long long T = 1000;
    int num_states = 4;            // random and kl-robust
    int num_actions = 2;           // random and kl-robust
    double B = 1.0;                // random
    double eta = 1.0;              // kl-robust dual variable
    bool per_stage_resample = true;  // hard
    double delta_bar_scale = 1.0;    // hard

    Hyperparameters livarot{};
    Hyperparameters baseline = baseline_defaults();
    double delta = 0.1;
    KappaMode kappa_mode = KappaMode::upper_bound;
    int kappa_grid = 64;
    FwConfig fw{};

    std::vector<std::uint64_t> seeds;
    bool record_timing = true;
    unsigned threads = 0;          // 0: hardware concurrency
    std::string out_path;
    std::string summary_path;

    const Hyperparameters& hyper(Algo a) const { return a == Algo::ucrl_mnl_ol ? baseline : livarot; }
};

/// Throws InvalidInput naming the first violated constraint.
inline void validate(const RunConfig& c) {
    detail::require(!c.algos.empty(), "config: at least one algorithm is required");
    detail::require(!c.horizons.empty(), "config: the H list must be nonempty");
    detail::require(!c.seeds.empty(), "config: the seed list must be nonempty");
    detail::require(c.T >= 1, "config: T must be >= 1");
    detail::require(c.delta > 0.0 && c.delta <= 1.0, "config: delta must lie in (0, 1]");
    detail::require(c.fw.max_iters >= 1, "config: fw-iters must be >= 1");
    for (int H : c.horizons) detail::require(H >= 1, "config: every H must be >= 1");
    for (Algo a : c.algos) {
        const auto& h = c.hyper(a);
        if (a == Algo::livarot) detail::require(c.T > h.tau && h.tau >= 0, "config: requires T > tau >= 0");
        detail::require(h.lambda > 0.0, "config: lambda must be positive");
        detail::require(h.lambda0 >= 0.0, "config: lambda0 must be >= 0");
        detail::require(h.eta_omd > 0.0, "config: eta-omd must be positive");
        detail::require(h.beta_scale >= 0.0, "config: beta-scale must be >= 0");
    }
    switch (c.instance) {
    case InstanceKind::hard:
        detail::require(c.d >= 2, "config: the hard instance requires d >= 2");
        for (int H : c.horizons) detail::require(H >= 3, "config: the hard instance requires H >= 3");
        break;
    case InstanceKind::random:
        detail::require(c.d >= 1 && c.num_states >= 1 && c.num_actions >= 1 && c.B > 0.0,
                        "config: the random instance needs positive d, states, actions and B");
        break;
    case InstanceKind::kl_robust:
        detail::require(c.num_states >= 1 && c.num_actions >= 1 && c.eta >= 0.0,
                        "config: the kl-robust instance needs positive states and actions and eta >= 0");
        break;
    }
}

/// Builds the instance for one (H, seed). The kl-robust instance uses the
/// canonical state features, so its dimension is num_states + 1.
inline MnlMdp build_instance(const RunConfig& c, int H, std::uint64_t seed) {
    switch (c.instance) {
    case InstanceKind::hard: {
        HardInstanceOptions o;
        o.d = c.d;
        o.H = H;
        o.T = c.T;
        o.seed = seed;
        o.per_stage_resample = c.per_stage_resample;
        o.delta_bar_scale = c.delta_bar_scale;
        return hard_instance(o);
    }
    case InstanceKind::random:
        return random_tabular_instance(c.num_states, c.num_actions, c.d, H, c.B, seed);
    case InstanceKind::kl_robust:
        return kl_robust_self_consistent(random_kl_nominal(c.num_states, c.num_actions, H, 0, true, seed), c.eta).mdp;
    }
    throw InvalidInput("unknown instance kind");
}

struct RegretRecord {
    std::uint64_t seed = 0;
    std::string algo;
    int d = 0;
    int H = 0;
    long long T = 0;
    long long episode = 0;
    double instant_regret = 0.0;
    double cum_regret = 0.0;
    double wall_ms = 0.0;
};

struct RunResult {
    std::vector<RegretRecord> records;
    std::optional<std::string> error;    // set when a numerical failure aborted the run
    double error_residual = 0.0;
};

/// What an observer sees at the start of each learning episode, after
/// planning and before acting.
struct EpisodeView {
    long long episode;
    const MnlMdp& mdp;
    const ValueTables& optimal;
    const EstimatorState* estimator;        // null for the oracle
    const OptimisticTables* tables;         // null for the oracle
};

using EpisodeObserver = std::function<void(const EpisodeView&)>;

namespace detail {

inline int outcome_index(const Transition& tr, int next_state) {
    for (std::size_t i = 0; i < tr.next_states.size(); ++i)
        if (tr.next_states[i] == next_state) return static_cast<int>(i);
    throw InvalidInput("next state is not reachable");
}

inline void learn_from(EstimatorState& est, const MnlMdp& mdp, const Trajectory& traj) {
    for (const auto& st : traj.steps) {
        const auto& tr = mdp.transition(st.h, st.state, st.action);
        omd_update(est, st.h, tr.context, outcome_index(tr, st.next_state));
    }
}

inline double kappa_for(const RunConfig& c, const MnlMdp& mdp) {
    if (c.kappa_mode == KappaMode::estimate) return std::max(1.0, exact_kappa_rho(mdp, c.kappa_grid).kappa);
    return kappa_upper_bound(mdp.features().max_reachable(), mdp.B());
}

} // namespace detail

/// One seeded run of one algorithm at horizon H: exact V* once, then T
/// episodes, each charged V*_1(s_1) minus the realized return. LIVAROT spends
/// its first tau episodes in the exploration routine; those episodes are
/// charged like any other.
inline RunResult run_one(const RunConfig& c, Algo algo, int H, std::uint64_t seed,
                         const EpisodeObserver& observer = {}) {
    validate(c);
    RunResult out;
    const MnlMdp mdp = build_instance(c, H, seed);
    const ValueTables optimal = exact_value_iteration(mdp);
    const double v1 = optimal.V[0](mdp.initial_state());
    const auto& hp = c.hyper(algo);
    const std::string tag = to_string(algo);
    double cum = 0.0;

    auto emit = [&](long long t, const Trajectory& traj, double ms) {
        const double inst = v1 - traj.total_reward();
        cum += inst;
        out.records.push_back({seed, tag, mdp.dim(), H, c.T, t, inst, cum, c.record_timing ? ms : 0.0});
    };
    using clock = std::chrono::steady_clock;
    auto elapsed_ms = [](clock::time_point since) {
        return std::chrono::duration<double, std::milli>(clock::now() - since).count();
    };

    try {
        if (algo == Algo::oracle) {
            for (long long t = 1; t <= c.T; ++t) {
                const auto start = clock::now();
                if (observer) observer({t, mdp, optimal, nullptr, nullptr});
                const Trajectory traj =
                    rollout(mdp, [&](int h, int s) { return optimal.policy[h][s]; }, seed, static_cast<std::uint64_t>(t));
                emit(t, traj, elapsed_ms(start));
            }
            return out;
        }

        const EstimatorConfig ecfg{hp.lambda, c.delta, mdp.B(), hp.eta_omd};
        std::optional<EstimatorState> est;
        long long t = 1;
        if (algo == Algo::livarot) {
            ExplorationConfig xcfg;
            xcfg.tau = hp.tau;
            xcfg.lambda0 = hp.lambda0;
            xcfg.kappa = detail::kappa_for(c, mdp);
            xcfg.rho = exact_kappa_rho(mdp, 0).rho;
            xcfg.B = mdp.B();
            xcfg.delta = c.delta;
            ExplorationState xs(mdp.features(), xcfg);
            for (; t <= hp.tau; ++t) {
                const auto start = clock::now();
                const Trajectory traj = exploration_episode(mdp, xs, seed, static_cast<std::uint64_t>(t));
                emit(t, traj, elapsed_ms(start));
            }
            const auto centers = exploration_mle(mdp.features(), xs);
            est.emplace(mdp.dim(), exploration_confidence_sets(mdp.features(), xs, centers), ecfg);
        } else {
            est.emplace(mdp.dim(), std::vector<Ellipsoid>(H, Ellipsoid::ball(Vector::Zero(mdp.dim()), mdp.B())), ecfg);
        }

        for (; t <= c.T; ++t) {
            const auto start = clock::now();
            const OptimisticTables tables = algo == Algo::livarot
                                                ? optimistic_backward_induction(mdp, *est, t, hp.beta_scale, c.fw)
                                                : ucrl_mnl_ol_tables(mdp, *est, t, hp.beta_scale);
            if (observer) observer({t, mdp, optimal, &*est, &tables});
            const Trajectory traj =
                rollout(mdp, [&](int h, int s) { return act(tables, h, s); }, seed, static_cast<std::uint64_t>(t));
            detail::learn_from(*est, mdp, traj);
            emit(t, traj, elapsed_ms(start));
        }
    } catch (const NumericalFailure& e) {
        out.error = e.what();
        out.error_residual = e.residual();
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader = "seed,algo,d,H,T,episode,instant_regret,cum_regret,wall_ms";

/// Shortest round-trip decimal representation with '.' separator.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline void write_record(std::ostream& os, const RegretRecord& r) {
    os << r.seed << ',' << r.algo << ',' << r.d << ',' << r.H << ',' << r.T << ',' << r.episode << ','
       << format_double(r.instant_regret) << ',' << format_double(r.cum_regret) << ',' << format_double(r.wall_ms)
       << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<RegretRecord>& records) {
    os << kCsvHeader << '\n';
    for (const auto& r : records) write_record(os, r);
}

namespace detail {

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* name) {
    T value{};
    const auto* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw ParseError("line " + std::to_string(line) + ": bad " + name + " '" + std::string(field) + "'", line);
    return value;
}

inline std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(',', pos);
        out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

} // namespace detail

inline std::vector<RegretRecord> read_csv(std::istream& is) {
    std::string line;
    std::size_t n = 1;
    if (!std::getline(is, line)) throw ParseError("line 1: missing header", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ParseError("line 1: unexpected header '" + line + "'", 1);
    std::vector<RegretRecord> out;
    while (std::getline(is, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_commas(line);
        if (f.size() != 9) throw ParseError("line " + std::to_string(n) + ": expected 9 fields", n);
        RegretRecord r;
        r.seed = detail::parse_number<std::uint64_t>(f[0], n, "seed");
        if (f[1].empty()) throw ParseError("line " + std::to_string(n) + ": empty algo", n);
        r.algo = std::string(f[1]);
        r.d = detail::parse_number<int>(f[2], n, "d");
        r.H = detail::parse_number<int>(f[3], n, "H");
        r.T = detail::parse_number<long long>(f[4], n, "T");
        r.episode = detail::parse_number<long long>(f[5], n, "episode");
        r.instant_regret = detail::parse_number<double>(f[6], n, "instant_regret");
        r.cum_regret = detail::parse_number<double>(f[7], n, "cum_regret");
        r.wall_ms = detail::parse_number<double>(f[8], n, "wall_ms");
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct Summary {
    double mean = 0.0;
    double std = 0.0;   // sample standard deviation; 0 for a single value
    int count = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
    Summary s;
    s.count = static_cast<int>(xs.size());
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= s.count;
    if (s.count > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / (s.count - 1));
    }
    return s;
}

struct AggregateRow {
    std::string algo;
    int H = 0;
    long long episode = 0;
    Summary cum_regret;
};

/// Mean, sample std and count of cum_regret per (algo, H, episode). Groups
/// keep the order in which (algo, H) first appears; episodes are ascending.
inline std::vector<AggregateRow> aggregate(const std::vector<RegretRecord>& records) {
    std::vector<std::pair<std::string, int>> order;
    std::map<std::pair<std::string, int>, std::map<long long, std::vector<double>>> groups;
    for (const auto& r : records) {
        const auto key = std::make_pair(r.algo, r.H);
        auto it = groups.find(key);
        if (it == groups.end()) {
            order.push_back(key);
            it = groups.emplace(key, std::map<long long, std::vector<double>>{}).first;
        }
        it->second[r.episode].push_back(r.cum_regret);
    }
    std::vector<AggregateRow> out;
    for (const auto& key : order)
        for (const auto& [ep, xs] : groups.at(key)) out.push_back({key.first, key.second, ep, summarize(xs)});
    return out;
}

inline std::vector<AggregateRow> aggregate(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw InvalidInput("cannot open '" + csv_path + "'");
    return aggregate(read_csv(in));
}

inline void write_aggregate(std::ostream& os, const std::vector<AggregateRow>& rows) {
    os << "algo,H,episode,mean_cum_regret,std_cum_regret,count\n";
    for (const auto& r : rows)
        os << r.algo << ',' << r.H << ',' << r.episode << ',' << format_double(r.cum_regret.mean) << ','
           << format_double(r.cum_regret.std) << ',' << r.cum_regret.count << '\n';
}

/// Final-episode regret per (algo, H): Reg_T and Reg_T / H^{3/2}.
struct ScalingRow {
    std::string algo;
    int H = 0;
    long long T = 0;
    Summary reg_T;
    Summary normalized;
};

inline std::vector<ScalingRow> scaling_summary(const std::vector<RegretRecord>& records) {
    std::vector<std::pair<std::string, int>> order;
    std::map<std::pair<std::string, int>, std::map<std::uint64_t, const RegretRecord*>> last;
    for (const auto& r : records) {
        const auto key = std::make_pair(r.algo, r.H);
        auto it = last.find(key);
        if (it == last.end()) {
            order.push_back(key);
            it = last.emplace(key, std::map<std::uint64_t, const RegretRecord*>{}).first;
        }
        auto& slot = it->second[r.seed];
        if (slot == nullptr || r.episode > slot->episode) slot = &r;
    }
    std::vector<ScalingRow> out;
    for (const auto& key : order) {
        std::vector<double> reg, norm;
        long long T = 0;
        for (const auto& [seed, rec] : last.at(key)) {
            reg.push_back(rec->cum_regret);
            norm.push_back(rec->cum_regret / std::pow(static_cast<double>(key.second), 1.5));
            T = std::max(T, rec->episode);
        }
        out.push_back({key.first, key.second, T, summarize(reg), summarize(norm)});
    }
    return out;
}

inline void write_scaling(std::ostream& os, const std::vector<ScalingRow>& rows) {
    os << "algo,H,T,seeds,mean_reg_T,std_reg_T,mean_reg_T_over_H1.5,std_reg_T_over_H1.5\n";
    for (const auto& r : rows)
        os << r.algo << ',' << r.H << ',' << r.T << ',' << r.reg_T.count << ',' << format_double(r.reg_T.mean) << ','
           << format_double(r.reg_T.std) << ',' << format_double(r.normalized.mean) << ','
           << format_double(r.normalized.std) << '\n';
}

/// Least-squares slope of log(value) against log(episode) over
/// [from, to]. NaN if any value in range is non-positive or fewer than two
/// points are available.
inline double loglog_slope(const std::vector<long long>& episodes, const std::vector<double>& values, long long from,
                           long long to) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        if (episodes[i] < from || episodes[i] > to) continue;
        if (!(values[i] > 0.0)) return std::nan("");
        const double x = std::log(static_cast<double>(episodes[i])), y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return std::nan("");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct RunFailure {
    std::string algo;
    int H = 0;
    std::uint64_t seed = 0;
    std::string message;
};

struct SweepResult {
    std::vector<RegretRecord> records;
    std::vector<RunFailure> failures;
};

/// Runs every (algo, H, seed) combination. Runs may execute concurrently;
/// their records are concatenated in (algo, H, seed) order, so the output does
/// not depend on scheduling. Failed runs keep the records emitted before the
/// failure and are listed in `failures`.
inline SweepResult run_sweep(const RunConfig& c) {
    validate(c);
    struct Job {
        Algo algo;
        int H;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (Algo a : c.algos)
        for (int H : c.horizons)
            for (auto seed : c.seeds) jobs.push_back({a, H, seed});

    std::vector<RunResult> results(jobs.size());
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::max(1u, std::min<unsigned>(c.threads == 0 ? hw : c.threads,
                                                             static_cast<unsigned>(jobs.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = run_one(c, jobs[i].algo, jobs[i].H, jobs[i].seed);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.push_back(std::async(std::launch::async, [&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++)
                    results[i] = run_one(c, jobs[i].algo, jobs[i].H, jobs[i].seed);
            }));
        for (auto& f : pool) f.get();
    }

    SweepResult sweep;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto& r = results[i];
        sweep.records.insert(sweep.records.end(), r.records.begin(), r.records.end());
        if (r.error) sweep.failures.push_back({to_string(jobs[i].algo), jobs[i].H, jobs[i].seed, *r.error});
    }

    if (!c.out_path.empty()) {
        std::ofstream os(c.out_path, std::ios::binary);
        if (!os) throw InvalidInput("cannot write '" + c.out_path + "'");
        write_csv(os, sweep.records);
    }
    if (!c.summary_path.empty()) {
        std::ofstream os(c.summary_path, std::ios::binary);
        if (!os) throw InvalidInput("cannot write '" + c.summary_path + "'");
        write_scaling(os, scaling_summary(sweep.records));
    }
    return sweep;
}

} // namespace mnl

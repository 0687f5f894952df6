#pragma once

// RunConfig <-> JSON. Keys mirror the CLI flag names; any key present
// overrides the value already in the config.

#include "mnl/harness.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace mnl {

namespace detail {

inline std::vector<std::uint64_t> seeds_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) {
        const auto n = j.get<long long>();
        require(n >= 0, "config: seed count must be >= 0");
        std::vector<std::uint64_t> out;
        for (long long i = 0; i < n; ++i) out.push_back(static_cast<std::uint64_t>(i));
        return out;
    }
    return j.get<std::vector<std::uint64_t>>();
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void take_hyper(const nlohmann::json& j, Hyperparameters& h) {
    take(j, "tau", h.tau);
    take(j, "lambda0", h.lambda0);
    take(j, "lambda", h.lambda);
    take(j, "eta-omd", h.eta_omd);
    take(j, "beta-scale", h.beta_scale);
}

} // namespace detail

/// Applies a JSON object to `c`. Top-level hyperparameter keys set both
/// algorithms; "livarot" and "ucrl-mnl-ol" sub-objects set one. "algo" is a
/// string or a list, "H" an integer or a list, "seeds" a count or a list.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
    try {
        detail::require(j.is_object(), "config: top level must be an object");
        if (j.contains("algo")) {
            c.algos.clear();
            if (j["algo"].is_string()) {
                c.algos.push_back(parse_algo(j["algo"].get<std::string>()));
            } else {
                for (const auto& a : j["algo"]) c.algos.push_back(parse_algo(a.get<std::string>()));
            }
        }
        if (j.contains("instance")) c.instance = parse_instance(j["instance"].get<std::string>());
        detail::take(j, "d", c.d);
        if (j.contains("H")) {
            c.horizons = j["H"].is_number() ? std::vector<int>{j["H"].get<int>()} : j["H"].get<std::vector<int>>();
        }
        detail::take(j, "T", c.T);
        detail::take(j, "states", c.num_states);
        detail::take(j, "actions", c.num_actions);
        detail::take(j, "B", c.B);
        detail::take(j, "eta", c.eta);
        detail::take(j, "per-stage-resample", c.per_stage_resample);
        detail::take(j, "delta-bar-scale", c.delta_bar_scale);
        detail::take_hyper(j, c.livarot);
        detail::take_hyper(j, c.baseline);
        if (j.contains("livarot")) detail::take_hyper(j["livarot"], c.livarot);
        if (j.contains("ucrl-mnl-ol")) detail::take_hyper(j["ucrl-mnl-ol"], c.baseline);
        detail::take(j, "delta", c.delta);
        if (j.contains("kappa")) {
            const auto k = j["kappa"].get<std::string>();
            detail::require(k == "bound" || k == "estimate", "config: kappa must be 'bound' or 'estimate'");
            c.kappa_mode = k == "bound" ? KappaMode::upper_bound : KappaMode::estimate;
        }
        detail::take(j, "fw-iters", c.fw.max_iters);
        if (j.contains("fw-step")) {
            const auto s = j["fw-step"].get<std::string>();
            detail::require(s == "classic" || s == "line-search", "config: fw-step must be 'classic' or 'line-search'");
            c.fw.step_rule = s == "classic" ? StepRule::classic : StepRule::line_search;
        }
        if (j.contains("seeds")) c.seeds = detail::seeds_from_json(j["seeds"]);
        detail::take(j, "threads", c.threads);
        if (j.contains("deterministic")) c.record_timing = !j["deterministic"].get<bool>();
        detail::take(j, "out", c.out_path);
        detail::take(j, "summary", c.summary_path);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
}

} // namespace mnl

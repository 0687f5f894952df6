#pragma once

// JSON documents: MDP instances (fixture exchange and golden tests) and
// estimator checkpoints.

#include "mnl/exploration.hpp"
#include "mnl/mdp.hpp"
#include "mnl/omd.hpp"

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace mnl {

using json = nlohmann::json;

namespace detail {

inline json vec_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vec_from_json(const json& j) {
    const auto xs = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

} // namespace detail

/// Instance document:
/// {
///   "format": "mnl-mdp/1", "name", "num_states", "num_actions", "horizon",
///   "dimension", "B", "feature_bound", "initial_state",
///   "theta_star": [[d] x H], "rewards": [[[A] x S] x H],
///   "transitions": [{"h", "s", "a", "next_states": [N], "features": [[d] x N]}, ...]
/// }
/// Stages and states are 0-based.
inline json to_json(const MnlMdp& mdp) {
    json j;
    j["format"] = "mnl-mdp/1";
    j["name"] = mdp.name();
    j["num_states"] = mdp.num_states();
    j["num_actions"] = mdp.num_actions();
    j["horizon"] = mdp.horizon();
    j["dimension"] = mdp.dim();
    j["B"] = mdp.B();
    j["feature_bound"] = mdp.feature_bound();
    j["initial_state"] = mdp.initial_state();
    j["theta_star"] = json::array();
    for (const auto& th : mdp.theta_star()) j["theta_star"].push_back(detail::vec_to_json(th));
    j["rewards"] = json::array();
    j["transitions"] = json::array();
    for (int h = 0; h < mdp.horizon(); ++h) {
        json stage = json::array();
        for (int s = 0; s < mdp.num_states(); ++s) {
            json row = json::array();
            for (int a = 0; a < mdp.num_actions(); ++a) {
                row.push_back(mdp.reward(h, s, a));
                const auto& tr = mdp.transition(h, s, a);
                json feats = json::array();
                for (Eigen::Index i = 0; i < tr.context.size(); ++i)
                    feats.push_back(detail::vec_to_json(tr.context.feature(i)));
                j["transitions"].push_back({{"h", h}, {"s", s}, {"a", a}, {"next_states", tr.next_states},
                                            {"features", std::move(feats)}});
            }
            stage.push_back(std::move(row));
        }
        j["rewards"].push_back(std::move(stage));
    }
    return j;
}

/// Inverse of to_json; the resulting instance is validated like any other.
inline MnlMdp mdp_from_json(const json& j) {
    try {
        detail::require(j.value("format", "") == "mnl-mdp/1", "mdp_from_json: unsupported format");
        const int S = j.at("num_states"), A = j.at("num_actions"), H = j.at("horizon"), d = j.at("dimension");
        detail::require(S >= 1 && A >= 1 && H >= 1 && d >= 1, "mdp_from_json: sizes must be positive");
        std::vector<Transition> table(static_cast<std::size_t>(H) * S * A);
        std::vector<bool> seen(table.size(), false);
        for (const auto& t : j.at("transitions")) {
            const int h = t.at("h"), s = t.at("s"), a = t.at("a");
            detail::require(h >= 0 && h < H && s >= 0 && s < S && a >= 0 && a < A,
                            "mdp_from_json: transition index out of range");
            const auto rows = t.at("features").get<std::vector<std::vector<double>>>();
            Matrix f(static_cast<Eigen::Index>(rows.size()), d);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                detail::require(rows[i].size() == static_cast<std::size_t>(d), "mdp_from_json: feature dimension mismatch");
                for (int k = 0; k < d; ++k) f(static_cast<Eigen::Index>(i), k) = rows[i][k];
            }
            const std::size_t idx = (static_cast<std::size_t>(h) * S + s) * A + a;
            detail::require(!seen[idx], "mdp_from_json: duplicate transition entry");
            seen[idx] = true;
            table[idx] = {MnlContext(std::move(f)), t.at("next_states").get<std::vector<int>>()};
        }
        for (bool b : seen) detail::require(b, "mdp_from_json: missing transition entry");
        MnlMdp::Parts parts;
        parts.features = FeatureMap(d, H, S, A, std::move(table));
        for (const auto& th : j.at("theta_star")) parts.theta_star.push_back(detail::vec_from_json(th));
        const auto& rw = j.at("rewards");
        detail::require(rw.size() == static_cast<std::size_t>(H), "mdp_from_json: rewards need H stages");
        for (int h = 0; h < H; ++h) {
            detail::require(rw[h].size() == static_cast<std::size_t>(S), "mdp_from_json: rewards need S rows per stage");
            for (int s = 0; s < S; ++s) {
                const auto row = rw[h][s].get<std::vector<double>>();
                detail::require(row.size() == static_cast<std::size_t>(A), "mdp_from_json: rewards need A entries per row");
                parts.rewards.insert(parts.rewards.end(), row.begin(), row.end());
            }
        }
        parts.initial_state = j.at("initial_state");
        parts.B = j.at("B");
        parts.feature_bound = j.value("feature_bound", 1.0);
        parts.name = j.value("name", "");
        return MnlMdp(std::move(parts));
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("mdp_from_json: ") + e.what());
    }
}

/// Estimator checkpoint: one entry per stage with ||theta_hat - theta*||_2,
/// the confidence radius, the diameter of the confidence set and log det of
/// the design matrix.
inline json estimator_checkpoint(long long t, const EstimatorState& est, const MnlMdp& mdp, double radius) {
    json out = json::array();
    for (int h = 0; h < est.horizon(); ++h) {
        const Ellipsoid set = est.confidence_set(h, radius);
        out.push_back({{"t", t},
                       {"h", h},
                       {"error_norm", (est.theta_hat(h) - mdp.theta_star(h)).norm()},
                       {"radius", radius},
                       {"diameter", diameter(set, mdp.features(), h)},
                       {"log_det_design", set.log_det()}});
    }
    return out;
}

} // namespace mnl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ddpnas/error.hpp"
#include "ddpnas/random.hpp"
#include "ddpnas/search_space.hpp"

namespace ddpnas {

/// Alive operations of one edge with their probabilities and latest scores.
/// The three vectors are index-aligned; `alive` is kept in ascending order.
struct EdgeDistribution {
    std::vector<int> alive;
    std::vector<double> probs;
    std::vector<double> scores;

    friend bool operator==(const EdgeDistribution&, const EdgeDistribution&) = default;
};

struct CategoricalState {
    std::vector<EdgeDistribution> edges;  // one per flat edge
    int round_index = 0;

    /// The shared K: every edge has the same number of alive operations.
    std::size_t alive_count() const { return edges.empty() ? 0 : edges.front().alive.size(); }

    friend bool operator==(const CategoricalState&, const CategoricalState&) = default;
};

struct PruneEvent {
    std::size_t edge = 0;  // flat edge index
    int op = 0;
    double prob = 0.0;
    int round = 0;  // 1-based round that removed the operation

    friend bool operator==(const PruneEvent&, const PruneEvent&) = default;
};

/// Per flat edge, one score per alive operation, aligned with EdgeDistribution::alive.
using ScoreTable = std::vector<std::vector<double>>;

inline constexpr double kProbabilityTolerance = 1e-9;

/// Throws RuntimeError naming the first violated invariant.
inline void check_invariants(const CategoricalState& state)
{
    if (state.edges.empty()) {
        throw RuntimeError("categorical state has no edges");
    }
    const std::size_t k = state.alive_count();
    if (k == 0) {
        throw RuntimeError("edge 0 has no alive operation");
    }
    for (std::size_t e = 0; e < state.edges.size(); ++e) {
        const auto& d = state.edges[e];
        if (d.alive.size() != k || d.probs.size() != k || d.scores.size() != k) {
            throw RuntimeError("edge " + std::to_string(e) + " has " + std::to_string(d.alive.size()) +
                               " alive operations, expected " + std::to_string(k));
        }
        if (!std::is_sorted(d.alive.begin(), d.alive.end()) ||
            std::adjacent_find(d.alive.begin(), d.alive.end()) != d.alive.end()) {
            throw RuntimeError("edge " + std::to_string(e) + " alive set is not strictly ascending");
        }
        double sum = 0.0;
        for (double p : d.probs) {
            if (!(p > 0.0) || !std::isfinite(p)) {
                throw RuntimeError("edge " + std::to_string(e) + " has a non-positive probability");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbabilityTolerance) {
            throw RuntimeError("edge " + std::to_string(e) + " probabilities sum to " + std::to_string(sum));
        }
    }
}

inline CategoricalState init_uniform(const SearchSpaceSpec& spec)
{
    const int k = spec.num_ops();
    EdgeDistribution d;
    d.alive.resize(static_cast<std::size_t>(k));
    std::iota(d.alive.begin(), d.alive.end(), 0);
    d.probs.assign(static_cast<std::size_t>(k), 1.0 / k);
    d.scores.assign(static_cast<std::size_t>(k), 0.0);
    return CategoricalState{std::vector<EdgeDistribution>(spec.num_flat_edges(), d), 0};
}

/// One independent categorical draw per edge.
inline Architecture sample_onehot(const CategoricalState& state, Rng& rng)
{
    Architecture arch;
    arch.choice.reserve(state.edges.size());
    for (const auto& d : state.edges) {
        if (d.alive.size() == 1) {
            arch.choice.push_back(d.alive.front());
            continue;
        }
        std::discrete_distribution<std::size_t> pick(d.probs.begin(), d.probs.end());
        arch.choice.push_back(d.alive[pick(rng)]);
    }
    return arch;
}

/// K architectures such that, on every edge, each alive operation lands in
/// exactly one slot. Slot-to-operation maps are independent uniform
/// permutations per edge.
inline std::vector<Architecture> disjoint_sample(const CategoricalState& state, Rng& rng)
{
    const std::size_t k = state.alive_count();
    for (std::size_t e = 0; e < state.edges.size(); ++e) {
        if (state.edges[e].alive.size() != k) {
            throw RuntimeError("disjoint sampling needs equal alive counts; edge " + std::to_string(e) + " has " +
                               std::to_string(state.edges[e].alive.size()) + ", edge 0 has " + std::to_string(k));
        }
    }
    std::vector<Architecture> out(k, Architecture{std::vector<int>(state.edges.size())});
    std::vector<int> perm;
    for (std::size_t e = 0; e < state.edges.size(); ++e) {
        perm = state.edges[e].alive;
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t s = 0; s < k; ++s) {
            out[s].choice[e] = perm[s];
        }
    }
    return out;
}

/// Max-subtracted softmax of scores / temperature.
inline std::vector<double> softmax(const std::vector<double>& scores, double temperature)
{
    const double hi = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp((scores[i] - hi) / temperature);
        z += p[i];
    }
    for (double& v : p) {
        v /= z;
    }
    return p;
}

inline CategoricalState update_softmax(CategoricalState state, const ScoreTable& scores, double temperature)
{
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ConfigError("softmax temperature must be a positive finite number");
    }
    if (scores.size() != state.edges.size()) {
        throw RuntimeError("score table covers " + std::to_string(scores.size()) + " edges, state has " +
                           std::to_string(state.edges.size()));
    }
    for (std::size_t e = 0; e < state.edges.size(); ++e) {
        auto& d = state.edges[e];
        const auto& s = scores[e];
        if (s.size() != d.alive.size()) {
            throw RuntimeError("edge " + std::to_string(e) + " has " + std::to_string(s.size()) +
                               " scores for " + std::to_string(d.alive.size()) + " alive operations");
        }
        for (double v : s) {
            if (!std::isfinite(v)) {
                throw RuntimeError("non-finite score on edge " + std::to_string(e));
            }
        }
        d.probs = softmax(s, temperature);
        d.scores = s;
        // exp underflow can zero an entry; keep the support strictly positive
        for (double& p : d.probs) {
            p = std::max(p, 1e-300);
        }
        const double z = std::accumulate(d.probs.begin(), d.probs.end(), 0.0);
        for (double& p : d.probs) {
            p /= z;
        }
    }
    return state;
}

/// Removes the lowest-probability operation from every edge (ties go to the
/// lowest operation index) and renormalizes the survivors.
inline std::pair<CategoricalState, std::vector<PruneEvent>> prune_min(CategoricalState state)
{
    std::vector<PruneEvent> events;
    events.reserve(state.edges.size());
    for (std::size_t e = 0; e < state.edges.size(); ++e) {
        auto& d = state.edges[e];
        if (d.alive.size() < 2) {
            throw RuntimeError("cannot prune edge " + std::to_string(e) + ": only one operation alive");
        }
        // alive is ascending, so the first minimum is the lowest index
        const auto at = static_cast<std::size_t>(std::min_element(d.probs.begin(), d.probs.end()) - d.probs.begin());
        events.push_back({e, d.alive[at], d.probs[at], state.round_index + 1});
        const auto off = static_cast<std::ptrdiff_t>(at);
        d.alive.erase(d.alive.begin() + off);
        d.probs.erase(d.probs.begin() + off);
        d.scores.erase(d.scores.begin() + off);
        const double z = std::accumulate(d.probs.begin(), d.probs.end(), 0.0);
        for (double& p : d.probs) {
            p /= z;
        }
    }
    ++state.round_index;
    return {std::move(state), std::move(events)};
}

inline bool is_converged(const CategoricalState& state)
{
    return std::all_of(state.edges.begin(), state.edges.end(), [](const auto& d) { return d.alive.size() == 1; });
}

inline Architecture final_architecture(const CategoricalState& state)
{
    if (!is_converged(state)) {
        throw RuntimeError("final_architecture called before the distribution converged");
    }
    Architecture arch;
    for (const auto& d : state.edges) {
        arch.choice.push_back(d.alive.front());
    }
    return arch;
}

// Checkpoint snapshot. Probabilities and scores round-trip exactly through
// nlohmann's shortest-representation double formatting.
inline nlohmann::json to_json(const CategoricalState& state)
{
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& d : state.edges) {
        edges.push_back({{"alive", d.alive}, {"probs", d.probs}, {"scores", d.scores}});
    }
    return {{"round_index", state.round_index}, {"edges", std::move(edges)}};
}

inline CategoricalState state_from_json(const nlohmann::json& j)
{
    try {
        CategoricalState state;
        state.round_index = j.at("round_index").get<int>();
        for (const auto& e : j.at("edges")) {
            state.edges.push_back({e.at("alive").get<std::vector<int>>(), e.at("probs").get<std::vector<double>>(),
                                   e.at("scores").get<std::vector<double>>()});
        }
        check_invariants(state);
        return state;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed categorical state snapshot: ") + ex.what());
    }
}

}  // namespace ddpnas

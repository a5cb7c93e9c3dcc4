#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddpnas/distribution.hpp"
#include "ddpnas/error.hpp"
#include "ddpnas/search_space.hpp"

namespace ddpnas {

/// Validation metric of one architecture after local epoch `epoch` (1..T) of
/// a round. The metric is used as a monotone proxy for the validation
/// likelihood, not as a probability.
struct EvaluationRecord {
    Architecture architecture;
    int epoch = 1;
    double metric = 0.0;
};

/// Per-operation scores for one round.
///
/// Each architecture's metric is averaged over its T epochs, and the average
/// is credited to every operation the architecture uses. Disjoint sampling
/// guarantees each alive operation of each edge sits in exactly one
/// architecture, which is checked here. With `ema_coeff` = c the result is
/// (1 - c) * previous score + c * new mean, the previous score being the one
/// stored in `state`.
inline ScoreTable estimate_scores(std::span<const EvaluationRecord> records, const CategoricalState& state, int T,
                                  std::optional<double> ema_coeff = std::nullopt)
{
    if (T < 1) {
        throw ConfigError("T must be >= 1");
    }
    if (ema_coeff && !(*ema_coeff > 0.0 && *ema_coeff <= 1.0)) {
        throw ConfigError("ema coefficient must lie in (0, 1]");
    }

    // Per distinct architecture: metric per epoch, NaN marks "missing".
    std::unordered_map<Architecture, std::vector<double>, ArchitectureHash> by_arch;
    std::vector<const Architecture*> order;
    for (const auto& r : records) {
        if (r.epoch < 1 || r.epoch > T) {
            throw RuntimeError("record epoch " + std::to_string(r.epoch) + " outside 1.." + std::to_string(T));
        }
        if (!std::isfinite(r.metric)) {
            throw RuntimeError("non-finite metric at epoch " + std::to_string(r.epoch));
        }
        if (r.architecture.choice.size() != state.edges.size()) {
            throw RuntimeError("record architecture does not match the state's edge count");
        }
        auto [it, inserted] = by_arch.try_emplace(r.architecture, static_cast<std::size_t>(T), std::nan(""));
        if (inserted) {
            order.push_back(&it->first);
        }
        double& slot = it->second[static_cast<std::size_t>(r.epoch - 1)];
        if (!std::isnan(slot)) {
            throw RuntimeError("duplicate record for epoch " + std::to_string(r.epoch) + " of one architecture");
        }
        slot = r.metric;
    }

    std::unordered_map<Architecture, double, ArchitectureHash> mean;
    for (const auto& [arch, metrics] : by_arch) {
        double sum = 0.0;
        for (std::size_t t = 0; t < metrics.size(); ++t) {
            if (std::isnan(metrics[t])) {
                throw RuntimeError("missing record for epoch " + std::to_string(t + 1) + " of a sampled architecture");
            }
            sum += metrics[t];
        }
        mean.emplace(arch, sum / T);
    }

    ScoreTable table(state.edges.size());
    for (std::size_t e = 0; e < state.edges.size(); ++e) {
        const auto& d = state.edges[e];
        std::vector<double>& row = table[e];
        row.assign(d.alive.size(), 0.0);
        std::vector<int> hits(d.alive.size(), 0);
        for (const Architecture* arch : order) {
            const int op = arch->choice[e];
            std::size_t pos = 0;
            while (pos < d.alive.size() && d.alive[pos] != op) {
                ++pos;
            }
            if (pos == d.alive.size()) {
                throw RuntimeError("edge " + std::to_string(e) + ": sampled operation " + std::to_string(op) +
                                   " is not alive");
            }
            ++hits[pos];
            row[pos] = mean.at(*arch);
        }
        for (std::size_t pos = 0; pos < hits.size(); ++pos) {
            if (hits[pos] != 1) {
                throw RuntimeError("edge " + std::to_string(e) + ": operation " + std::to_string(d.alive[pos]) +
                                   " covered " + std::to_string(hits[pos]) + " times, expected once");
            }
            if (ema_coeff) {
                row[pos] = (1.0 - *ema_coeff) * d.scores[pos] + *ema_coeff * row[pos];
            }
        }
    }
    return table;
}

}  // namespace ddpnas

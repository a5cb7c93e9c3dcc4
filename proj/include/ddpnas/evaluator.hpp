#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "ddpnas/search_space.hpp"

namespace ddpnas {

/// What a search is going to ask of an evaluator, announced once up front.
struct SearchPlan {
    int initial_k = 0;
    int T = 1;
    std::size_t num_edges = 0;
    long total_epochs = 0;  // T * (K0 (K0 + 1) / 2 - 1) for a full search
};

/// Where a train_epoch call sits in the search. `global_epoch` is the shared
/// training clock at the end of this sweep: epochs of earlier rounds plus
/// K * local_epoch. `stream` is the per-(round, slot) RNG substream seed.
struct EpochContext {
    int round = 0;
    int slot = 0;
    int local_epoch = 1;
    long global_epoch = 1;
    std::uint64_t stream = 0;
};

/// Trains sampled architectures and reports a validation metric in [0, 1].
/// Implementations own their weights across rounds. train_epoch must be a
/// deterministic function of the evaluator's seeded state, the call sequence,
/// and the context.
class Evaluator {
public:
    virtual ~Evaluator() = default;

    virtual void begin_search(const SearchPlan& /*plan*/) {}
    virtual void begin_round(int /*round*/, std::span<const Architecture> /*architectures*/) {}
    virtual double train_epoch(const Architecture& arch, const EpochContext& ctx) = 0;
    virtual std::string description() const = 0;

    /// Whether train_epoch may be called concurrently for different
    /// architectures of the same sweep.
    virtual bool supports_concurrent() const { return false; }
};

}  // namespace ddpnas

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ddpnas/distribution.hpp"
#include "ddpnas/error.hpp"
#include "ddpnas/estimator.hpp"
#include "ddpnas/evaluator.hpp"
#include "ddpnas/random.hpp"
#include "ddpnas/search_space.hpp"

namespace ddpnas {

enum class MetricDirection { maximize, minimize };

/// Engine state needed to resume a search between rounds.
struct Checkpoint {
    CategoricalState state;
    int initial_k = 0;
    long epochs_trained = 0;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const Checkpoint& c)
{
    return {{"format", "ddp-checkpoint v1"},
            {"round", c.state.round_index},
            {"initial_k", c.initial_k},
            {"epochs_trained", c.epochs_trained},
            {"seed", c.seed},
            {"state", to_json(c.state)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format").get<std::string>() != "ddp-checkpoint v1") {
            throw ConfigError("unsupported checkpoint format");
        }
        return {state_from_json(j.at("state")), j.at("initial_k").get<int>(), j.at("epochs_trained").get<long>(),
                j.at("seed").get<std::uint64_t>()};
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed checkpoint: ") + ex.what());
    }
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c)
{
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp);
        if (!out) {
            throw RuntimeError("cannot write checkpoint " + tmp.string());
        }
        out << to_json(c).dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

struct SearchConfig {
    int T = 3;
    double temperature = 0.05;
    std::optional<double> ema_coeff;
    std::uint64_t seed = 0;
    int checkpoint_every = 1;
    MetricDirection metric_direction = MetricDirection::maximize;
    int jobs = 1;
    std::optional<std::filesystem::path> checkpoint_path;
    std::optional<Checkpoint> resume;
};

inline void validate(const SearchConfig& c)
{
    if (c.T < 1) {
        throw ConfigError("search.T must be >= 1");
    }
    if (!(c.temperature > 0.0) || !std::isfinite(c.temperature)) {
        throw ConfigError("search.temperature must be > 0");
    }
    if (c.ema_coeff && !(*c.ema_coeff > 0.0 && *c.ema_coeff <= 1.0)) {
        throw ConfigError("search.ema_coeff must lie in (0, 1]");
    }
    if (c.checkpoint_every < 1) {
        throw ConfigError("search.checkpoint_every must be >= 1");
    }
    if (c.jobs < 1) {
        throw ConfigError("jobs must be >= 1");
    }
}

/// T * (K0 (K0 + 1) / 2 - 1): every round with K alive trains K architectures
/// for T epochs, for K = K0 down to 2.
constexpr long total_epoch_budget(int initial_k, int T)
{
    return static_cast<long>(T) * (static_cast<long>(initial_k) * (initial_k + 1) / 2 - 1);
}

struct SearchResult {
    Architecture final;
    std::vector<PruneEvent> prune_log;
    std::vector<ScoreTable> score_history;
    std::vector<int> k_history;  // alive count at the start of each round
    long total_trained_epochs = 0;
    double wall_time = 0.0;  // seconds
};

/// Hooks into each stage of a round. The JSONL event log and the bound
/// validator are both observers. All calls come from the controlling thread.
class SearchObserver {
public:
    virtual ~SearchObserver() = default;
    virtual void on_search_start(const SearchSpaceSpec&, const SearchConfig&, const SearchPlan&,
                                 const std::string& /*evaluator*/)
    {}
    virtual void on_resume(const CategoricalState&) {}
    virtual void on_round_start(int /*round*/, std::size_t /*k*/, long /*epochs_before*/) {}
    virtual void on_samples(int /*round*/, const std::vector<Architecture>&) {}
    /// metrics[slot][t] as returned by the evaluator, before any negation.
    virtual void on_metrics(int /*round*/, const std::vector<std::vector<double>>& /*metrics*/) {}
    virtual void on_scores(int /*round*/, const CategoricalState& /*before*/, const ScoreTable&) {}
    virtual void on_update(int /*round*/, const CategoricalState& /*after*/) {}
    virtual void on_prune(int /*round*/, const std::vector<PruneEvent>&) {}
    virtual void on_final(const Architecture&, long /*total_trained_epochs*/) {}
};

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are
/// collected per index and the lowest-index one is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn)
{
    std::vector<std::exception_ptr> errors(n);
    auto guarded = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            guarded(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    guarded(i);
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace detail

/// Dynamic distribution pruning.
///
/// While more than one operation is alive per edge: draw K architectures by
/// disjoint sampling, train each for T epochs (one sweep over all K per
/// epoch), average each architecture's metrics into per-operation scores,
/// softmax-update the distributions and prune the least likely operation of
/// every edge. Exactly K0 - 1 rounds run.
///
/// All randomness of round r comes from derive(seed, "engine", r) and, per
/// slot, derive(seed, "slot", r, slot), so results do not depend on how the
/// K trainings of a sweep are scheduled.
inline SearchResult run_search(const SearchSpaceSpec& spec, Evaluator& evaluator, const SearchConfig& config,
                               SearchObserver* observer = nullptr)
{
    validate(config);
    const auto started = std::chrono::steady_clock::now();
    SearchObserver null_observer;
    SearchObserver& obs = observer ? *observer : null_observer;

    CategoricalState state;
    int initial_k = spec.num_ops();
    long epochs_trained = 0;
    if (config.resume) {
        state = config.resume->state;
        check_invariants(state);
        if (state.edges.size() != spec.num_flat_edges()) {
            throw ConfigError("checkpoint does not match the search space");
        }
        initial_k = config.resume->initial_k;
        epochs_trained = config.resume->epochs_trained;
    } else {
        state = init_uniform(spec);
    }

    const SearchPlan plan{initial_k, config.T, spec.num_flat_edges(), total_epoch_budget(initial_k, config.T)};
    obs.on_search_start(spec, config, plan, evaluator.description());
    if (config.resume) {
        obs.on_resume(state);
    }
    evaluator.begin_search(plan);

    const int jobs = evaluator.supports_concurrent() ? config.jobs : 1;
    const double sign = config.metric_direction == MetricDirection::minimize ? -1.0 : 1.0;
    SearchResult result;

    auto save = [&](const CategoricalState& s) {
        if (config.checkpoint_path) {
            write_checkpoint(*config.checkpoint_path, {s, initial_k, epochs_trained, config.seed});
        }
    };

    while (!is_converged(state)) {
        const int round = state.round_index + 1;
        const std::size_t k = state.alive_count();
        const long epochs_before = epochs_trained;
        obs.on_round_start(round, k, epochs_before);
        result.k_history.push_back(static_cast<int>(k));

        Rng rng = make_rng(derive(config.seed, "engine", round));
        const std::vector<Architecture> archs = disjoint_sample(state, rng);
        obs.on_samples(round, archs);
        evaluator.begin_round(round, archs);

        std::vector<std::vector<double>> metrics(k, std::vector<double>(static_cast<std::size_t>(config.T)));
        for (int t = 1; t <= config.T; ++t) {
            detail::parallel_for(k, jobs, [&](std::size_t slot) {
                const EpochContext ctx{round, static_cast<int>(slot), t,
                                       epochs_before + static_cast<long>(k) * t,
                                       derive(config.seed, "slot", round, slot)};
                double m = 0.0;
                try {
                    m = evaluator.train_epoch(archs[slot], ctx);
                } catch (const std::exception& ex) {
                    throw RuntimeError("round " + std::to_string(round) + ", slot " + std::to_string(slot) +
                                       ", epoch " + std::to_string(t) + " [" + encode(spec, archs[slot]) +
                                       "]: " + ex.what());
                }
                if (!std::isfinite(m)) {
                    throw RuntimeError("round " + std::to_string(round) + ", slot " + std::to_string(slot) +
                                       ": evaluator returned a non-finite metric");
                }
                metrics[slot][static_cast<std::size_t>(t - 1)] = m;
            });
        }
        epochs_trained += static_cast<long>(k) * config.T;
        obs.on_metrics(round, metrics);

        std::vector<EvaluationRecord> records;
        records.reserve(k * static_cast<std::size_t>(config.T));
        for (std::size_t slot = 0; slot < k; ++slot) {
            for (int t = 1; t <= config.T; ++t) {
                records.push_back({archs[slot], t, sign * metrics[slot][static_cast<std::size_t>(t - 1)]});
            }
        }

        const CategoricalState before = state;
        try {
            const ScoreTable scores = estimate_scores(records, state, config.T, config.ema_coeff);
            obs.on_scores(round, state, scores);
            result.score_history.push_back(scores);
            state = update_softmax(std::move(state), scores, config.temperature);
            check_invariants(state);
            obs.on_update(round, state);
            auto [pruned, events] = prune_min(std::move(state));
            state = std::move(pruned);
            check_invariants(state);
            obs.on_prune(round, events);
            result.prune_log.insert(result.prune_log.end(), events.begin(), events.end());
        } catch (const RuntimeError& ex) {
            epochs_trained = epochs_before;
            save(before);
            throw RuntimeError("round " + std::to_string(round) + ": " + ex.what());
        }

        if (round % config.checkpoint_every == 0 || is_converged(state)) {
            save(state);
        }
    }

    result.final = final_architecture(state);
    result.total_trained_epochs = epochs_trained;
    obs.on_final(result.final, result.total_trained_epochs);
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

struct BaselineResult {
    Architecture best;
    double metric = 0.0;  // mean over T epochs
    std::vector<std::pair<Architecture, double>> evaluated;
};

/// Trains each candidate for T epochs and keeps the best by mean metric
/// (first one wins ties).
inline BaselineResult evaluate_candidates(const SearchSpaceSpec& spec, Evaluator& evaluator,
                                          const std::vector<Architecture>& archs, int T, std::uint64_t seed,
                                          MetricDirection direction = MetricDirection::maximize)
{
    if (archs.empty()) {
        throw ConfigError("baseline budget must be >= 1");
    }
    if (T < 1) {
        throw ConfigError("T must be >= 1");
    }
    for (const auto& a : archs) {
        spec.validate(a);
    }
    const long budget = static_cast<long>(archs.size());
    evaluator.begin_search({spec.num_ops(), T, spec.num_flat_edges(), budget * T});
    evaluator.begin_round(1, archs);

    const double sign = direction == MetricDirection::minimize ? -1.0 : 1.0;
    BaselineResult out;
    long clock = 0;
    for (std::size_t i = 0; i < archs.size(); ++i) {
        double sum = 0.0;
        for (int t = 1; t <= T; ++t) {
            const EpochContext ctx{1, static_cast<int>(i), t, ++clock, derive(seed, "slot", 1, i)};
            const double m = evaluator.train_epoch(archs[i], ctx);
            if (!std::isfinite(m)) {
                throw RuntimeError("baseline sample " + std::to_string(i) + ": non-finite metric");
            }
            sum += m;
        }
        const double mean = sum / T;
        out.evaluated.emplace_back(archs[i], mean);
        if (i == 0 || sign * mean > sign * out.metric) {
            out.best = archs[i];
            out.metric = mean;
        }
    }
    return out;
}

/// Random-sample baseline: `budget` architectures drawn uniformly from
/// derive(seed, "baseline"), scored by evaluate_candidates.
inline BaselineResult run_random_baseline(const SearchSpaceSpec& spec, Evaluator& evaluator, int budget, int T,
                                          std::uint64_t seed,
                                          MetricDirection direction = MetricDirection::maximize)
{
    if (budget < 1) {
        throw ConfigError("baseline budget must be >= 1");
    }
    const CategoricalState uniform = init_uniform(spec);
    Rng rng = make_rng(derive(seed, "baseline"));
    std::vector<Architecture> archs;
    for (int i = 0; i < budget; ++i) {
        archs.push_back(sample_onehot(uniform, rng));
    }
    return evaluate_candidates(spec, evaluator, archs, T, seed, direction);
}

}  // namespace ddpnas

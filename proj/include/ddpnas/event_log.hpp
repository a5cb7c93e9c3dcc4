#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddpnas/engine.hpp"
#include "ddpnas/error.hpp"
#include "ddpnas/search_space.hpp"

namespace ddpnas {

inline nlohmann::json to_json(const SearchSpaceSpec& spec)
{
    std::vector<std::string> ops;
    for (const auto& op : spec.operations()) {
        ops.push_back(op.name);
    }
    return {{"num_nodes", spec.num_nodes()}, {"operations", ops}, {"num_cell_types", spec.num_cell_types()}};
}

inline SearchSpaceSpec spec_from_json(const nlohmann::json& j)
{
    try {
        return build_space(j.at("num_nodes").get<int>(), j.at("operations").get<std::vector<std::string>>(),
                           j.at("num_cell_types").get<int>());
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed search space description: ") + ex.what());
    }
}

/// Writes one JSON object per line. No timestamps, so two runs with the same
/// seed and config produce identical logs.
///
///   search_start {spec, T, K0, seed, temperature, ema_coeff, direction, total_epochs, evaluator}
///   resume       {round, state}
///   round_start  {round, K}
///   sample       {round, slot, arch}
///   epoch        {round, slot, epoch, metric}
///   scores       {round, edge, op, score}
///   update       {round, edge, ops, probs}
///   prune        {round, edge, op, prob}
///   final        {arch, total_trained_epochs}
class JsonlEventLog : public SearchObserver {
public:
    explicit JsonlEventLog(std::ostream& out) : out_(out) {}

    void on_search_start(const SearchSpaceSpec& spec, const SearchConfig& config, const SearchPlan& plan,
                         const std::string& evaluator) override
    {
        spec_ = spec;
        emit({{"event", "search_start"},
              {"spec", to_json(spec)},
              {"T", config.T},
              {"K0", plan.initial_k},
              {"seed", config.seed},
              {"temperature", config.temperature},
              {"ema_coeff", config.ema_coeff ? nlohmann::json(*config.ema_coeff) : nlohmann::json(nullptr)},
              {"direction", config.metric_direction == MetricDirection::minimize ? "minimize" : "maximize"},
              {"total_epochs", plan.total_epochs},
              {"evaluator", evaluator}});
    }

    void on_resume(const CategoricalState& state) override
    {
        emit({{"event", "resume"}, {"round", state.round_index}, {"state", to_json(state)}});
    }

    void on_round_start(int round, std::size_t k, long /*epochs_before*/) override
    {
        emit({{"event", "round_start"}, {"round", round}, {"K", k}});
    }

    void on_samples(int round, const std::vector<Architecture>& archs) override
    {
        for (std::size_t s = 0; s < archs.size(); ++s) {
            emit({{"event", "sample"}, {"round", round}, {"slot", s}, {"arch", encode(spec_, archs[s])}});
        }
    }

    void on_metrics(int round, const std::vector<std::vector<double>>& metrics) override
    {
        if (metrics.empty()) {
            return;
        }
        for (std::size_t t = 0; t < metrics.front().size(); ++t) {
            for (std::size_t s = 0; s < metrics.size(); ++s) {
                emit({{"event", "epoch"}, {"round", round}, {"slot", s}, {"epoch", t + 1}, {"metric", metrics[s][t]}});
            }
        }
    }

    void on_scores(int round, const CategoricalState& before, const ScoreTable& scores) override
    {
        for (std::size_t e = 0; e < scores.size(); ++e) {
            for (std::size_t i = 0; i < scores[e].size(); ++i) {
                emit({{"event", "scores"},
                      {"round", round},
                      {"edge", spec_.edge_label(e)},
                      {"op", spec_.op_name(before.edges[e].alive[i])},
                      {"score", scores[e][i]}});
            }
        }
    }

    void on_update(int round, const CategoricalState& after) override
    {
        for (std::size_t e = 0; e < after.edges.size(); ++e) {
            std::vector<std::string> ops;
            for (int op : after.edges[e].alive) {
                ops.push_back(spec_.op_name(op));
            }
            emit({{"event", "update"},
                  {"round", round},
                  {"edge", spec_.edge_label(e)},
                  {"ops", ops},
                  {"probs", after.edges[e].probs}});
        }
    }

    void on_prune(int round, const std::vector<PruneEvent>& events) override
    {
        for (const auto& ev : events) {
            emit({{"event", "prune"},
                  {"round", round},
                  {"edge", spec_.edge_label(ev.edge)},
                  {"op", spec_.op_name(ev.op)},
                  {"prob", ev.prob}});
        }
    }

    void on_final(const Architecture& arch, long total) override
    {
        emit({{"event", "final"}, {"arch", encode(spec_, arch)}, {"total_trained_epochs", total}});
    }

private:
    void emit(const nlohmann::json& j)
    {
        out_ << j.dump() << '\n';
        out_.flush();
    }

    std::ostream& out_;
    SearchSpaceSpec spec_;
};

/// Raised when a log ends early or contains an unparsable line.
class TruncatedLogError : public Error {
public:
    TruncatedLogError(const std::string& what, std::size_t last_valid_line)
        : Error(what), last_valid_line_(last_valid_line)
    {}
    std::size_t last_valid_line() const noexcept { return last_valid_line_; }

private:
    std::size_t last_valid_line_;
};

struct ReplayedRound {
    int round = 0;
    int k = 0;
    // edge label -> (op names, probabilities) after the softmax update
    std::map<std::string, std::pair<std::vector<std::string>, std::vector<double>>> updates;
    std::vector<std::pair<std::string, std::string>> prunes;  // (edge label, op name)
};

struct LogReplay {
    SearchSpaceSpec spec;
    std::vector<ReplayedRound> rounds;
    Architecture reconstructed;  // survivors after applying every prune event
    std::string logged_final;    // arch string of the final event
    long total_trained_epochs = 0;
};

/// Replays a JSONL event log: starts from every operation alive (or from the
/// resume snapshot), removes each pruned operation and checks that the
/// survivors match the logged final architecture.
inline LogReplay replay_event_log(std::istream& in)
{
    LogReplay replay;
    std::vector<std::vector<int>> alive;
    bool started = false;
    bool finished = false;
    std::size_t line_no = 0;
    std::size_t last_valid = 0;
    std::string line;

    auto label_index = [&](const std::string& label) -> std::size_t {
        for (std::size_t e = 0; e < replay.spec.num_flat_edges(); ++e) {
            if (replay.spec.edge_label(e) == label) {
                return e;
            }
        }
        throw ConfigError("line " + std::to_string(line_no) + ": unknown edge " + label);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw TruncatedLogError("event log line " + std::to_string(line_no) +
                                        " is not valid JSON; last valid line is " + std::to_string(last_valid),
                                    last_valid);
        }
        try {
            const std::string ev = j.at("event").get<std::string>();
            if (ev == "search_start") {
                replay.spec = spec_from_json(j.at("spec"));
                alive.assign(replay.spec.num_flat_edges(), {});
                for (auto& a : alive) {
                    for (int k = 0; k < replay.spec.num_ops(); ++k) {
                        a.push_back(k);
                    }
                }
                started = true;
            } else if (!started) {
                throw ConfigError("line " + std::to_string(line_no) + ": event before search_start");
            } else if (ev == "resume") {
                const CategoricalState s = state_from_json(j.at("state"));
                for (std::size_t e = 0; e < alive.size(); ++e) {
                    alive[e] = s.edges.at(e).alive;
                }
            } else if (ev == "round_start") {
                replay.rounds.push_back({j.at("round").get<int>(), j.at("K").get<int>(), {}, {}});
            } else if (ev == "update") {
                replay.rounds.back().updates[j.at("edge").get<std::string>()] = {
                    j.at("ops").get<std::vector<std::string>>(), j.at("probs").get<std::vector<double>>()};
            } else if (ev == "prune") {
                const auto label = j.at("edge").get<std::string>();
                const auto op = j.at("op").get<std::string>();
                auto& a = alive[label_index(label)];
                const int idx = replay.spec.op_index(op);
                const auto it = std::find(a.begin(), a.end(), idx);
                if (it == a.end()) {
                    throw ConfigError("line " + std::to_string(line_no) + ": prune of non-alive op " + op);
                }
                a.erase(it);
                replay.rounds.back().prunes.emplace_back(label, op);
            } else if (ev == "final") {
                replay.logged_final = j.at("arch").get<std::string>();
                replay.total_trained_epochs = j.at("total_trained_epochs").get<long>();
                finished = true;
            }
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError("event log line " + std::to_string(line_no) + ": " + ex.what());
        }
        last_valid = line_no;
    }
    if (!started || !finished) {
        throw TruncatedLogError("event log ends without a final event; last valid line is " +
                                    std::to_string(last_valid),
                                last_valid);
    }
    for (std::size_t e = 0; e < alive.size(); ++e) {
        if (alive[e].size() != 1) {
            throw ConfigError("replay leaves " + std::to_string(alive[e].size()) + " operations on edge " +
                              replay.spec.edge_label(e));
        }
        replay.reconstructed.choice.push_back(alive[e].front());
    }
    return replay;
}

}  // namespace ddpnas

#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddpnas/distribution.hpp"
#include "ddpnas/engine.hpp"
#include "ddpnas/error.hpp"
#include "ddpnas/event_log.hpp"
#include "ddpnas/oracles/supernet.hpp"
#include "ddpnas/oracles/synthetic.hpp"
#include "ddpnas/oracles/tabular.hpp"
#include "ddpnas/search_space.hpp"
#include "ddpnas/theory.hpp"

namespace ddpnas::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2, kBoundViolation = 3 };

/// Flat configuration: dotted keys (spec.*, search.*, oracle.*, bound.*,
/// seed) mapped to JSON values. Unknown keys are rejected.
///
///   spec.num_nodes            int, default 2
///   spec.operations           list of names, default the 5 micro ops
///   spec.num_cell_types       int, default 1
///   seed                      root seed, default 0
///   search.T                  default 3
///   search.temperature        default 0.05
///   search.ema_coeff          null (off) or (0, 1]
///   search.direction          "maximize" | "minimize"
///   search.checkpoint_every   default 1
///   search.resume             checkpoint path to resume from, default null
///   oracle.kind               "synthetic" | "tabular" | "supernet"
///   oracle.landscape          landscape file; otherwise one is generated:
///   oracle.layout             "shuffled" | "ascending"
///   oracle.low, oracle.high   utility range, default 0.1, 0.9
///   oracle.beta, oracle.gamma, oracle.e_star   landscape noise (default 0, 0, budget)
///   oracle.clamp              default true
///   oracle.landscape_seed     default: the root seed
///   oracle.clock              "global" | "per_architecture"
///   oracle.benchmark          benchmark file for kind=tabular
///   oracle.dataset            "ring" | "blobs"; oracle.dataset_seed default 0
///   oracle.width, oracle.batch_size, oracle.learning_rate, oracle.reset_each_round
///   bound.beta, bound.gamma   lists (a grid) or numbers; default = landscape noise
///   bound.e_star              default = landscape e_star
///   bound.zeta                explicit zeta; otherwise
///   bound.zeta_gap_multiple   zeta = multiple * minimum utility gap, default 4
///   bound.trials              default 1000
class Config {
public:
    static const std::map<std::string, nlohmann::json>& defaults()
    {
        static const std::map<std::string, nlohmann::json> d{
            {"seed", 0},
            {"spec.num_nodes", 2},
            {"spec.operations", micro_op_names()},
            {"spec.num_cell_types", 1},
            {"search.T", 3},
            {"search.temperature", 0.05},
            {"search.ema_coeff", nullptr},
            {"search.direction", "maximize"},
            {"search.checkpoint_every", 1},
            {"search.resume", nullptr},
            {"oracle.kind", "synthetic"},
            {"oracle.landscape", nullptr},
            {"oracle.layout", "shuffled"},
            {"oracle.low", 0.1},
            {"oracle.high", 0.9},
            {"oracle.beta", 0.0},
            {"oracle.gamma", 0.0},
            {"oracle.e_star", nullptr},
            {"oracle.clamp", true},
            {"oracle.landscape_seed", nullptr},
            {"oracle.clock", "global"},
            {"oracle.benchmark", nullptr},
            {"oracle.dataset", "ring"},
            {"oracle.dataset_seed", 0},
            {"oracle.width", 8},
            {"oracle.batch_size", 32},
            {"oracle.learning_rate", 0.025},
            {"oracle.reset_each_round", false},
            {"bound.beta", nullptr},
            {"bound.gamma", nullptr},
            {"bound.e_star", nullptr},
            {"bound.zeta", nullptr},
            {"bound.zeta_gap_multiple", 4.0},
            {"bound.trials", 1000},
        };
        return d;
    }

    Config() : values_(defaults()) {}

    static Config load(const std::optional<std::string>& path, const std::vector<std::string>& overrides)
    {
        Config c;
        if (path) {
            std::ifstream in(*path);
            if (!in) {
                throw ConfigError("cannot open config file " + *path);
            }
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& ex) {
                throw ConfigError("config file " + *path + ": " + ex.what());
            }
            if (!j.is_object()) {
                throw ConfigError("config file must hold a JSON object");
            }
            for (const auto& [k, v] : j.items()) {
                c.set(k, v);
            }
        }
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw ConfigError("override '" + o + "' is not key=value");
            }
            const std::string value = o.substr(eq + 1);
            nlohmann::json v = nlohmann::json::parse(value, nullptr, false);
            if (v.is_discarded()) {
                v = value;
            }
            c.set(o.substr(0, eq), v);
        }
        return c;
    }

    void set(const std::string& key, const nlohmann::json& v)
    {
        if (!defaults().contains(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        explicit_.insert(key);
        values_[key] = v;
    }

    bool is_set(const std::string& key) const { return explicit_.contains(key); }
    bool is_null(const std::string& key) const { return at(key).is_null(); }

    const nlohmann::json& at(const std::string& key) const
    {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        return it->second;
    }

    template <typename T>
    T get(const std::string& key) const
    {
        try {
            return at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type: " + at(key).dump());
        }
    }

    nlohmann::json snapshot() const
    {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : values_) {
            j[k] = v;
        }
        return j;
    }

private:
    std::map<std::string, nlohmann::json> values_;
    std::set<std::string> explicit_;
};

inline SearchSpaceSpec make_spec(const Config& c)
{
    return build_space(c.get<int>("spec.num_nodes"), c.get<std::vector<std::string>>("spec.operations"),
                       c.get<int>("spec.num_cell_types"));
}

inline SearchConfig make_search_config(const Config& c)
{
    SearchConfig s;
    s.T = c.get<int>("search.T");
    s.temperature = c.get<double>("search.temperature");
    if (!c.is_null("search.ema_coeff")) {
        s.ema_coeff = c.get<double>("search.ema_coeff");
    }
    const auto dir = c.get<std::string>("search.direction");
    if (dir == "maximize") {
        s.metric_direction = MetricDirection::maximize;
    } else if (dir == "minimize") {
        s.metric_direction = MetricDirection::minimize;
    } else {
        throw ConfigError("search.direction must be maximize or minimize");
    }
    s.checkpoint_every = c.get<int>("search.checkpoint_every");
    s.seed = c.get<std::uint64_t>("seed");
    validate(s);
    return s;
}

/// Utilities increasing with the operation index on every edge, evenly spaced
/// in [low, high]. Every edge shares one profile, so the optimum uses the
/// last operation everywhere.
inline SyntheticLandscape make_ascending_landscape(const SearchSpaceSpec& spec, double low, double high,
                                                   NoiseParams noise)
{
    if (!(0.0 <= low && low < high && high <= 1.0)) {
        throw ConfigError("landscape utility range must satisfy 0 <= low < high <= 1");
    }
    SyntheticLandscape land;
    land.noise = noise;
    const int k = spec.num_ops();
    std::vector<double> row(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        row[static_cast<std::size_t>(i)] = dyadic_level(low + (high - low) * i / (k - 1));
    }
    land.utilities.assign(spec.num_flat_edges(), row);
    land.validate(spec);
    return land;
}

/// Landscape noise: explicit oracle.* values, with e_star defaulting to the
/// search's epoch budget.
inline NoiseParams landscape_noise(const Config& c, const SearchSpaceSpec& spec)
{
    NoiseParams n;
    n.beta = c.get<double>("oracle.beta");
    n.gamma = c.get<double>("oracle.gamma");
    n.e_star = c.is_null("oracle.e_star")
                   ? static_cast<int>(total_epoch_budget(spec.num_ops(), c.get<int>("search.T")))
                   : c.get<int>("oracle.e_star");
    n.validate();
    return n;
}

inline SyntheticLandscape make_landscape_from(const Config& c, const SearchSpaceSpec& spec,
                                              std::optional<NoiseParams> noise = std::nullopt)
{
    SyntheticLandscape land;
    if (!c.is_null("oracle.landscape")) {
        land = load_landscape(c.get<std::string>("oracle.landscape"), spec);
        if (noise) {
            land.noise = *noise;
        }
        if (c.is_set("oracle.clamp")) {
            land.clamp = c.get<bool>("oracle.clamp");
        }
        return land;
    }
    const NoiseParams n = noise ? *noise : landscape_noise(c, spec);
    const auto layout = c.get<std::string>("oracle.layout");
    const double low = c.get<double>("oracle.low");
    const double high = c.get<double>("oracle.high");
    if (layout == "shuffled") {
        const std::uint64_t seed = c.is_null("oracle.landscape_seed") ? c.get<std::uint64_t>("seed")
                                                                       : c.get<std::uint64_t>("oracle.landscape_seed");
        land = make_landscape(spec, low, high, n, seed);
    } else if (layout == "ascending") {
        land = make_ascending_landscape(spec, low, high, n);
    } else {
        throw ConfigError("oracle.layout must be shuffled or ascending");
    }
    land.clamp = c.get<bool>("oracle.clamp");
    return land;
}

inline EpochClock epoch_clock(const Config& c)
{
    const auto s = c.get<std::string>("oracle.clock");
    if (s == "global") {
        return EpochClock::global;
    }
    if (s == "per_architecture") {
        return EpochClock::per_architecture;
    }
    throw ConfigError("oracle.clock must be global or per_architecture");
}

inline std::unique_ptr<Evaluator> make_evaluator(const Config& c, const SearchSpaceSpec& spec)
{
    const auto kind = c.get<std::string>("oracle.kind");
    const std::uint64_t oracle_seed = derive(c.get<std::uint64_t>("seed"), "oracle");
    if (kind == "synthetic") {
        return std::make_unique<SyntheticOracle>(spec, make_landscape_from(c, spec), oracle_seed, epoch_clock(c));
    }
    if (kind == "tabular") {
        if (c.is_null("oracle.benchmark")) {
            throw ConfigError("oracle.kind=tabular needs oracle.benchmark");
        }
        return std::make_unique<TabularOracle>(spec, load_benchmark(c.get<std::string>("oracle.benchmark")));
    }
    if (kind == "supernet") {
        DatasetConfig d;
        const auto ds = c.get<std::string>("oracle.dataset");
        if (ds == "ring") {
            d.kind = DatasetKind::ring;
        } else if (ds == "blobs") {
            d.kind = DatasetKind::blobs;
        } else {
            throw ConfigError("oracle.dataset must be ring or blobs");
        }
        d.seed = c.get<std::uint64_t>("oracle.dataset_seed");
        SupernetConfig s;
        s.width = c.get<int>("oracle.width");
        s.batch_size = c.get<int>("oracle.batch_size");
        s.learning_rate = c.get<double>("oracle.learning_rate");
        s.reset_each_round = c.get<bool>("oracle.reset_each_round");
        s.seed = oracle_seed;
        return std::make_unique<MicroSupernet>(spec, make_dataset(d), s);
    }
    throw ConfigError("oracle.kind must be synthetic, tabular or supernet");
}

inline std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw RuntimeError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

// Maps library exceptions to exit codes and prints the message.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn)
{
    try {
        return fn();
    } catch (const EnumerationCapError& ex) {
        err << "error: " << ex.what() << '\n';
        return kRuntimeError;
    } catch (const ConfigError& ex) {
        err << "config error: " << ex.what() << '\n';
        return kConfigError;
    } catch (const TruncatedLogError& ex) {
        err << "error: " << ex.what() << '\n';
        return kRuntimeError;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kRuntimeError;
    }
}

struct SearchOptions {
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "ddp-run";
    int jobs = 1;
};

/// Writes manifest.json (before the first round), events.jsonl,
/// checkpoint.json and result.json into out_dir.
inline int cmd_search(const SearchOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return guarded(err, [&] {
        const Config cfg = Config::load(opt.config_path, opt.overrides);
        const SearchSpaceSpec spec = make_spec(cfg);
        SearchConfig sc = make_search_config(cfg);
        sc.jobs = opt.jobs;
        validate(sc);
        auto evaluator = make_evaluator(cfg, spec);

        const std::filesystem::path dir(opt.out_dir);
        std::filesystem::create_directories(dir);
        const auto log_path = dir / "events.jsonl";
        const auto ckpt_path = dir / "checkpoint.json";
        const auto result_path = dir / "result.json";
        sc.checkpoint_path = ckpt_path;
        if (!cfg.is_null("search.resume")) {
            const auto path = cfg.get<std::string>("search.resume");
            std::ifstream in(path);
            if (!in) {
                throw ConfigError("cannot open checkpoint " + path);
            }
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& ex) {
                throw ConfigError("checkpoint " + path + ": " + ex.what());
            }
            sc.resume = checkpoint_from_json(j);
        }

        write_json_file(dir / "manifest.json",
                        {{"tool", "ddpnas"},
                         {"version", kToolVersion},
                         {"command", "search"},
                         {"config", cfg.snapshot()},
                         {"spec", to_json(spec)},
                         {"space_size", space_size(spec).str()},
                         {"oracle", evaluator->description()},
                         {"seed", sc.seed},
                         {"jobs", opt.jobs},
                         {"started", utc_timestamp()},
                         {"outputs",
                          {{"events", log_path.string()},
                           {"checkpoint", ckpt_path.string()},
                           {"result", result_path.string()}}}});

        std::ofstream log(log_path);
        if (!log) {
            throw RuntimeError("cannot write " + log_path.string());
        }
        JsonlEventLog events(log);
        const SearchResult res = run_search(spec, *evaluator, sc, &events);

        nlohmann::json prunes = nlohmann::json::array();
        for (const auto& p : res.prune_log) {
            prunes.push_back({{"round", p.round}, {"edge", spec.edge_label(p.edge)}, {"op", spec.op_name(p.op)},
                              {"prob", p.prob}});
        }
        write_json_file(result_path, {{"final_architecture", encode(spec, res.final)},
                                      {"k_per_round", res.k_history},
                                      {"total_trained_epochs", res.total_trained_epochs},
                                      {"score_history", res.score_history},
                                      {"prune_log", prunes},
                                      {"wall_time_seconds", res.wall_time},
                                      {"finished", utc_timestamp()}});
        out << "final architecture: " << encode(spec, res.final) << '\n'
            << "rounds: " << res.k_history.size() << ", trained epochs: " << res.total_trained_epochs << '\n'
            << "outputs in " << dir.string() << '\n';
        return kOk;
    });
}

struct BenchGenOptions {
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    int epochs = 3;
    std::string out_path = "bench.txt";
    double cap = 16777216.0;
};

inline int cmd_bench_gen(const BenchGenOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return guarded(err, [&] {
        const Config cfg = Config::load(opt.config_path, opt.overrides);
        const SearchSpaceSpec spec = make_spec(cfg);
        const SyntheticLandscape land = make_landscape_from(cfg, spec);
        const auto bench = generate_benchmark(spec, land, opt.epochs, derive(cfg.get<std::uint64_t>("seed"), "oracle"),
                                              BigInt(static_cast<long long>(opt.cap)));
        save_benchmark(opt.out_path, bench);
        out << "wrote " << bench.entries.size() << " architectures x " << bench.epochs << " epochs to "
            << opt.out_path << '\n';
        return kOk;
    });
}

struct BoundOptions {
    double beta = 0.0;
    double gamma = 0.0;
    int e_star = 105;
    double zeta = 1.0;
    int ops = 8;
    int ops_max = 8;
    int k = 8;
    long from = 1;
    long to = 105;
    long step = 1;
    std::optional<std::string> out_path;
};

inline constexpr const char* kBoundTableHeader = "e_t,K,sigma,delta,bound_exact,bound_simplified,vacuous";

/// Bound table over e_t = from, from + step, ..., <= to.
inline int cmd_bound(const BoundOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return guarded(err, [&] {
        const BoundParams p{{opt.beta, opt.gamma, opt.e_star}, opt.zeta, opt.ops, opt.ops_max};
        p.validate();
        if (opt.k < 1) {
            throw ConfigError("K must be >= 1");
        }
        if (opt.step < 1 || opt.from < 1 || opt.to < opt.from || opt.to > opt.e_star) {
            throw ConfigError("invalid e_t range: need 1 <= from <= to <= e_star and step >= 1");
        }
        std::ofstream file;
        if (opt.out_path) {
            file.open(*opt.out_path);
            if (!file) {
                throw RuntimeError("cannot write " + *opt.out_path);
            }
        }
        std::ostream& os = opt.out_path ? static_cast<std::ostream&>(file) : out;
        auto num = [](double v) { return nlohmann::json(v).dump(); };
        os << kBoundTableHeader << '\n';
        for (long e = opt.from; e <= opt.to; e += opt.step) {
            const TotalBound b = total_error_bound(p, e, opt.k);
            os << e << ',' << opt.k << ',' << num(sigma(p, e)) << ',' << num(delta_threshold(p)) << ','
               << num(b.exact) << ',' << num(b.simplified) << ',' << (b.simplified >= 1.0 ? 1 : 0) << '\n';
        }
        return kOk;
    });
}

struct ValidateOptions {
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    std::optional<std::size_t> trials;
    std::string out_path = "bound_validation.csv";
    int jobs = 1;
};

namespace detail {

inline std::vector<double> number_list(const Config& c, const std::string& key, double fallback)
{
    if (c.is_null(key)) {
        return {fallback};
    }
    const auto& v = c.at(key);
    if (v.is_array()) {
        return c.get<std::vector<double>>(key);
    }
    return {c.get<double>(key)};
}

}  // namespace detail

/// Monte Carlo check of the pruning-error bound over a (beta, gamma) grid.
/// Each grid cell drives the landscape with the same noise as the bound
/// unless oracle.beta / oracle.gamma are set explicitly, which fixes the
/// landscape noise and exposes the deviation-mismatch diagnostic.
/// Exit 3 when a row's Wilson lower limit exceeds a non-vacuous simplified
/// bound.
inline int cmd_validate_bound(const ValidateOptions& opt, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr)
{
    return guarded(err, [&] {
        const Config cfg = Config::load(opt.config_path, opt.overrides);
        const SearchSpaceSpec spec = make_spec(cfg);
        const SearchConfig sc = make_search_config(cfg);
        const std::size_t trials = opt.trials ? *opt.trials : cfg.get<std::size_t>("bound.trials");
        const NoiseParams base = landscape_noise(cfg, spec);
        const int e_star = cfg.is_null("bound.e_star") ? base.e_star : cfg.get<int>("bound.e_star");
        const bool fixed_landscape_noise = cfg.is_set("oracle.beta") || cfg.is_set("oracle.gamma");

        std::ofstream csv(opt.out_path);
        if (!csv) {
            throw RuntimeError("cannot write " + opt.out_path);
        }
        csv << kBoundCsvHeader << '\n';
        bool violated = false;
        bool mismatch = false;
        for (double beta : detail::number_list(cfg, "bound.beta", base.beta)) {
            for (double gamma : detail::number_list(cfg, "bound.gamma", base.gamma)) {
                const NoiseParams bound_noise{beta, gamma, e_star};
                bound_noise.validate();
                const NoiseParams land_noise =
                    fixed_landscape_noise ? NoiseParams{base.beta, base.gamma, e_star} : bound_noise;
                const SyntheticLandscape land = make_landscape_from(cfg, spec, land_noise);
                const double zeta = cfg.is_null("bound.zeta")
                                        ? cfg.get<double>("bound.zeta_gap_multiple") * land.min_utility_gap()
                                        : cfg.get<double>("bound.zeta");
                if (!(zeta > 0.0)) {
                    throw ConfigError("zeta must be > 0");
                }
                const MonteCarloResult mc =
                    monte_carlo_error_rate(spec, land, sc, trials, cfg.get<std::uint64_t>("seed"), opt.jobs);
                out << "beta=" << beta << " gamma=" << gamma << " zeta=" << zeta << ": error rate " << mc.rate
                    << " [" << mc.ci.low << ", " << mc.ci.high << "] over " << trials << " trials\n";
                for (const BoundRow& row : bound_rows(mc, bound_noise, zeta, spec.num_ops())) {
                    write_bound_row(csv, row);
                    if (row.bound_simplified < 1.0 && row.ci_low > row.bound_simplified) {
                        violated = true;
                        out << "  round " << row.round << " (e_t=" << row.e_t << ", K=" << row.k
                            << "): rate " << row.empirical_rate << ", lower limit " << row.ci_low
                            << " exceeds bound " << row.bound_simplified << '\n';
                    }
                    if (row.deviation_mismatch) {
                        mismatch = true;
                        out << "  round " << row.round << ": deviation mismatch, observed sd " << row.residual_sd
                            << " vs model sd " << row.model_sd << '\n';
                    }
                }
            }
        }
        if (mismatch) {
            out << "warning: observed score deviation does not match the bound's noise parameters\n";
        }
        out << "wrote " << opt.out_path << '\n';
        return violated ? kBoundViolation : kOk;
    });
}

struct ReportOptions {
    std::string log_path;
    std::string out_dir = ".";
};

/// Summary of an event log plus probabilities.csv (round, edge, op, prob per
/// update) and prunes.csv (round, edge, op per prune).
inline int cmd_report(const ReportOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return guarded(err, [&] {
        std::ifstream in(opt.log_path);
        if (!in) {
            throw ConfigError("cannot open event log " + opt.log_path);
        }
        const LogReplay replay = replay_event_log(in);
        const std::string reconstructed = encode(replay.spec, replay.reconstructed);

        const std::filesystem::path dir(opt.out_dir);
        std::filesystem::create_directories(dir);
        std::ofstream probs(dir / "probabilities.csv");
        std::ofstream prunes(dir / "prunes.csv");
        if (!probs || !prunes) {
            throw RuntimeError("cannot write report CSVs in " + dir.string());
        }
        auto num = [](double v) { return nlohmann::json(v).dump(); };
        // edge labels contain a comma
        auto quoted = [](const std::string& s) { return '"' + s + '"'; };
        probs << "round,edge,op,prob\n";
        prunes << "round,edge,op\n";
        std::size_t prune_count = 0;
        for (const auto& r : replay.rounds) {
            for (const auto& [edge, update] : r.updates) {
                for (std::size_t i = 0; i < update.first.size(); ++i) {
                    probs << r.round << ',' << quoted(edge) << ',' << update.first[i] << ',' << num(update.second[i]) << '\n';
                }
            }
            for (const auto& [edge, op] : r.prunes) {
                prunes << r.round << ',' << quoted(edge) << ',' << op << '\n';
                ++prune_count;
            }
        }

        out << "search space: M=" << replay.spec.num_nodes() << ", K=" << replay.spec.num_ops()
            << ", cell types=" << replay.spec.num_cell_types() << ", edges=" << replay.spec.num_flat_edges() << '\n';
        out << "rounds: " << replay.rounds.size() << " (K:";
        for (const auto& r : replay.rounds) {
            out << ' ' << r.k;
        }
        out << ")\n";
        out << "prune events: " << prune_count << '\n';
        out << "trained epochs: " << replay.total_trained_epochs << '\n';
        out << "final architecture: " << replay.logged_final << '\n';
        if (reconstructed != replay.logged_final) {
            err << "error: replayed prunes give " << reconstructed << ", log's final event says "
                << replay.logged_final << '\n';
            return kRuntimeError;
        }
        out << "replay check: ok\n";
        return kOk;
    });
}

}  // namespace ddpnas::cli

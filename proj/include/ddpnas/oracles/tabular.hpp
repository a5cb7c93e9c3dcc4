#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <regex>
#include <string>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "ddpnas/error.hpp"
#include "ddpnas/evaluator.hpp"
#include "ddpnas/oracles/synthetic.hpp"
#include "ddpnas/random.hpp"
#include "ddpnas/search_space.hpp"

namespace ddpnas {

/// Precomputed architecture -> per-epoch metric table.
///
/// File format (text):
///   #ddp-bench v1 epochs=<n> spec=<M>,<K>,<types>
///   <encoded-arch>\t<m1>,<m2>,...,<mn>
/// Metrics use the shortest decimal form that round-trips, so write -> read
/// is bit-exact.
struct TabularBenchmark {
    int num_nodes = 0;
    int num_ops = 0;
    int num_cell_types = 1;
    int epochs = 0;
    std::map<std::string, std::vector<double>> entries;

    friend bool operator==(const TabularBenchmark&, const TabularBenchmark&) = default;
};

namespace detail {

inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line_no)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("benchmark line " + std::to_string(line_no) + ": bad metric '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace detail

inline void write_benchmark(std::ostream& out, const TabularBenchmark& bench)
{
    out << "#ddp-bench v1 epochs=" << bench.epochs << " spec=" << bench.num_nodes << ',' << bench.num_ops << ','
        << bench.num_cell_types << '\n';
    for (const auto& [key, metrics] : bench.entries) {
        out << key << '\t';
        for (std::size_t i = 0; i < metrics.size(); ++i) {
            if (i) {
                out << ',';
            }
            out << detail::format_double(metrics[i]);
        }
        out << '\n';
    }
}

inline TabularBenchmark read_benchmark(std::istream& in)
{
    TabularBenchmark bench;
    std::string line;
    if (!std::getline(in, line)) {
        throw ConfigError("empty benchmark file");
    }
    {
        static const std::regex header(R"(#ddp-bench v1 epochs=(\d+) spec=(\d+),(\d+),(\d+)\s*)");
        std::smatch m;
        if (!std::regex_match(line, m, header) || std::stoi(m[1]) < 1) {
            throw ConfigError("malformed benchmark header '" + line + "'");
        }
        bench.epochs = std::stoi(m[1]);
        bench.num_nodes = std::stoi(m[2]);
        bench.num_ops = std::stoi(m[3]);
        bench.num_cell_types = std::stoi(m[4]);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ConfigError("benchmark line " + std::to_string(line_no) + " has no tab separator");
        }
        std::vector<double> metrics;
        std::string_view rest(line);
        rest.remove_prefix(tab + 1);
        while (true) {
            const auto comma = rest.find(',');
            const double m = detail::parse_double(rest.substr(0, comma), line_no);
            if (!(m >= 0.0 && m <= 1.0)) {
                throw ConfigError("benchmark line " + std::to_string(line_no) + ": metric outside [0, 1]");
            }
            metrics.push_back(m);
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (static_cast<int>(metrics.size()) != bench.epochs) {
            throw ConfigError("benchmark line " + std::to_string(line_no) + " has " + std::to_string(metrics.size()) +
                              " metrics, header says " + std::to_string(bench.epochs));
        }
        if (!bench.entries.emplace(line.substr(0, tab), std::move(metrics)).second) {
            throw ConfigError("benchmark line " + std::to_string(line_no) + " repeats an architecture");
        }
    }
    return bench;
}

inline void save_benchmark(const std::string& path, const TabularBenchmark& bench)
{
    std::ofstream out(path);
    if (!out) {
        throw RuntimeError("cannot write benchmark file " + path);
    }
    write_benchmark(out, bench);
}

inline TabularBenchmark load_benchmark(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open benchmark file " + path);
    }
    return read_benchmark(in);
}

/// Records `epochs` sequential synthetic observations for every architecture
/// of the space. Architecture i draws from derive(seed, "bench", i) with its
/// own epoch counter 1..epochs. Metrics are clamped to [0, 1] regardless of
/// the landscape's clamp flag.
inline TabularBenchmark generate_benchmark(const SearchSpaceSpec& spec, const SyntheticLandscape& landscape,
                                           int epochs, std::uint64_t seed, const BigInt& cap = BigInt(1) << 24)
{
    if (epochs < 1) {
        throw ConfigError("benchmark epochs must be >= 1");
    }
    landscape.validate(spec);
    const auto archs = enumerate_architectures(spec, cap);
    SyntheticOracle oracle(spec, landscape, seed, EpochClock::per_architecture);
    TabularBenchmark bench{spec.num_nodes(), spec.num_ops(), spec.num_cell_types(), epochs, {}};
    for (std::size_t i = 0; i < archs.size(); ++i) {
        Rng rng = make_rng(derive(seed, "bench", i));
        std::vector<double> metrics;
        for (int t = 1; t <= epochs; ++t) {
            metrics.push_back(std::clamp(oracle.observe(archs[i], t, rng), 0.0, 1.0));
        }
        bench.entries.emplace(encode(spec, archs[i]), std::move(metrics));
    }
    return bench;
}

/// Serves table entries in epoch order, one counter per architecture.
class TabularOracle : public Evaluator {
public:
    TabularOracle(const SearchSpaceSpec& spec, TabularBenchmark bench) : spec_(spec), bench_(std::move(bench))
    {
        if (bench_.num_nodes != spec.num_nodes() || bench_.num_ops != spec.num_ops() ||
            bench_.num_cell_types != spec.num_cell_types()) {
            throw ConfigError("benchmark was generated for a different search space");
        }
    }

    double train_epoch(const Architecture& arch, const EpochContext& /*ctx*/ = {}) override
    {
        const std::string key = encode(spec_, arch);
        const auto it = bench_.entries.find(key);
        if (it == bench_.entries.end()) {
            throw RuntimeError("architecture not in benchmark: " + key);
        }
        long e_t = 0;
        {
            std::lock_guard lock(mu_);
            e_t = ++counters_[key];
        }
        if (e_t > static_cast<long>(it->second.size())) {
            throw RuntimeError("epoch overflow: " + key + " has " + std::to_string(it->second.size()) +
                               " recorded epochs, requested epoch " + std::to_string(e_t));
        }
        return it->second[static_cast<std::size_t>(e_t - 1)];
    }

    std::string description() const override
    {
        return "tabular(entries=" + std::to_string(bench_.entries.size()) +
               ",epochs=" + std::to_string(bench_.epochs) + ")";
    }

    bool supports_concurrent() const override { return true; }

private:
    SearchSpaceSpec spec_;
    TabularBenchmark bench_;
    std::mutex mu_;
    std::unordered_map<std::string, long> counters_;
};

}  // namespace ddpnas

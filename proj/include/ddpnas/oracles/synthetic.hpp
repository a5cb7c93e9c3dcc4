#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ddpnas/error.hpp"
#include "ddpnas/evaluator.hpp"
#include "ddpnas/random.hpp"
#include "ddpnas/search_space.hpp"

namespace ddpnas {

/// Early-stopping deviation model: sigma(e_t) = beta (e_star - e_t) + gamma.
struct NoiseParams {
    double beta = 0.0;
    double gamma = 0.0;
    int e_star = 1;

    void validate() const
    {
        if (!(beta >= 0.0) || !(gamma >= 0.0) || !std::isfinite(beta) || !std::isfinite(gamma)) {
            throw ConfigError("noise beta and gamma must be finite and >= 0");
        }
        if (e_star < 1) {
            throw ConfigError("noise e_star must be >= 1");
        }
    }

    /// Throws ConfigError unless 1 <= e_t <= e_star.
    double sigma(long e_t) const
    {
        if (e_t < 1 || e_t > e_star) {
            throw ConfigError("epoch " + std::to_string(e_t) + " outside [1, " + std::to_string(e_star) + "]");
        }
        return beta * static_cast<double>(e_star - e_t) + gamma;
    }

    friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

struct InteractionTerm {
    std::size_t edge_a = 0;
    int op_a = 0;
    std::size_t edge_b = 0;
    int op_b = 0;
    double value = 0.0;

    friend bool operator==(const InteractionTerm&, const InteractionTerm&) = default;
};

/// Known performance landscape over a search space. True quality of an
/// architecture is the mean of its per-edge utilities plus the mean of the
/// interaction terms it activates, clamped to [0, 1].
struct SyntheticLandscape {
    std::vector<std::vector<double>> utilities;  // [flat edge][op]
    std::vector<InteractionTerm> interactions;
    NoiseParams noise;
    bool clamp = true;  // clamp observed metrics to [0, 1]

    double quality(const Architecture& arch) const
    {
        double u = 0.0;
        for (std::size_t e = 0; e < arch.choice.size(); ++e) {
            u += utilities[e][static_cast<std::size_t>(arch.choice[e])];
        }
        u /= static_cast<double>(arch.choice.size());
        double extra = 0.0;
        int active = 0;
        for (const auto& it : interactions) {
            if (arch.choice[it.edge_a] == it.op_a && arch.choice[it.edge_b] == it.op_b) {
                extra += it.value;
                ++active;
            }
        }
        if (active > 0) {
            u += extra / active;
        }
        return std::clamp(u, 0.0, 1.0);
    }

    bool separable() const { return interactions.empty(); }

    /// Smallest difference between two utilities of the same edge.
    double min_utility_gap() const
    {
        double gap = std::numeric_limits<double>::infinity();
        for (auto row : utilities) {
            std::sort(row.begin(), row.end());
            for (std::size_t i = 1; i < row.size(); ++i) {
                gap = std::min(gap, row[i] - row[i - 1]);
            }
        }
        return gap;
    }

    void validate(const SearchSpaceSpec& spec) const
    {
        noise.validate();
        if (utilities.size() != spec.num_flat_edges()) {
            throw ConfigError("landscape lists " + std::to_string(utilities.size()) + " edges, the space has " +
                              std::to_string(spec.num_flat_edges()));
        }
        for (std::size_t e = 0; e < utilities.size(); ++e) {
            if (utilities[e].size() != static_cast<std::size_t>(spec.num_ops())) {
                throw ConfigError("landscape edge " + spec.edge_label(e) + " lists the wrong number of operations");
            }
            for (double u : utilities[e]) {
                if (!(u >= 0.0 && u <= 1.0)) {
                    throw ConfigError("landscape utility on " + spec.edge_label(e) + " outside [0, 1]");
                }
            }
        }
        for (const auto& it : interactions) {
            if (it.edge_a >= utilities.size() || it.edge_b >= utilities.size() || it.op_a < 0 ||
                it.op_a >= spec.num_ops() || it.op_b < 0 || it.op_b >= spec.num_ops() || !std::isfinite(it.value)) {
                throw ConfigError("landscape interaction term out of range");
            }
        }
    }
};

/// Rounds to a multiple of 2^-20, so sums of utilities that are equal in
/// exact arithmetic also compare equal in floating point.
inline double dyadic_level(double u)
{
    constexpr double scale = 1048576.0;
    return std::round(u * scale) / scale;
}

/// Per edge, a seeded random permutation of K evenly spaced utilities in
/// [low, high] (see dyadic_level). Utilities are distinct within an edge; the
/// minimum gap is about (high - low) / (K - 1).
inline SyntheticLandscape make_landscape(const SearchSpaceSpec& spec, double low, double high, NoiseParams noise,
                                         std::uint64_t seed)
{
    if (!(0.0 <= low && low < high && high <= 1.0)) {
        throw ConfigError("landscape utility range must satisfy 0 <= low < high <= 1");
    }
    Rng rng = make_rng(derive(seed, "landscape-gen"));
    const int k = spec.num_ops();
    std::vector<double> levels(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        levels[static_cast<std::size_t>(i)] = dyadic_level(low + (high - low) * i / (k - 1));
    }
    SyntheticLandscape land;
    land.noise = noise;
    for (std::size_t e = 0; e < spec.num_flat_edges(); ++e) {
        auto row = levels;
        std::shuffle(row.begin(), row.end(), rng);
        land.utilities.push_back(std::move(row));
    }
    land.validate(spec);
    return land;
}

inline nlohmann::json to_json(const SyntheticLandscape& land, const SearchSpaceSpec& spec)
{
    nlohmann::json util = nlohmann::json::object();
    for (std::size_t e = 0; e < land.utilities.size(); ++e) {
        nlohmann::json row = nlohmann::json::object();
        for (int k = 0; k < spec.num_ops(); ++k) {
            row[spec.op_name(k)] = land.utilities[e][static_cast<std::size_t>(k)];
        }
        util[spec.edge_label(e)] = row;
    }
    nlohmann::json inter = nlohmann::json::array();
    for (const auto& it : land.interactions) {
        inter.push_back({{"a", spec.edge_label(it.edge_a) + "=" + spec.op_name(it.op_a)},
                         {"b", spec.edge_label(it.edge_b) + "=" + spec.op_name(it.op_b)},
                         {"value", it.value}});
    }
    return {{"format", "ddp-landscape v1"},
            {"noise", {{"beta", land.noise.beta}, {"gamma", land.noise.gamma}, {"e_star", land.noise.e_star}}},
            {"clamp", land.clamp},
            {"utilities", util},
            {"interactions", inter}};
}

inline SyntheticLandscape landscape_from_json(const nlohmann::json& j, const SearchSpaceSpec& spec)
{
    auto flat_of = [&](const std::string& label) -> std::size_t {
        for (std::size_t e = 0; e < spec.num_flat_edges(); ++e) {
            if (spec.edge_label(e) == label) {
                return e;
            }
        }
        throw ConfigError("landscape names unknown edge " + label);
    };
    auto op_of = [&](const std::string& name) {
        const int k = spec.op_index(name);
        if (k < 0) {
            throw ConfigError("landscape names unknown operation " + name);
        }
        return k;
    };
    auto term_of = [&](const std::string& s) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("interaction endpoint '" + s + "' is not '<edge>=<op>'");
        }
        return std::pair{flat_of(s.substr(0, eq)), op_of(s.substr(eq + 1))};
    };

    try {
        if (j.at("format").get<std::string>() != "ddp-landscape v1") {
            throw ConfigError("unsupported landscape format");
        }
        SyntheticLandscape land;
        const auto& n = j.at("noise");
        land.noise = {n.at("beta").get<double>(), n.at("gamma").get<double>(), n.at("e_star").get<int>()};
        land.clamp = j.value("clamp", true);
        land.utilities.assign(spec.num_flat_edges(), std::vector<double>(static_cast<std::size_t>(spec.num_ops()),
                                                                         std::nan("")));
        for (const auto& [label, row] : j.at("utilities").items()) {
            const std::size_t e = flat_of(label);
            for (const auto& [op, u] : row.items()) {
                land.utilities[e][static_cast<std::size_t>(op_of(op))] = u.get<double>();
            }
        }
        for (std::size_t e = 0; e < land.utilities.size(); ++e) {
            for (double u : land.utilities[e]) {
                if (std::isnan(u)) {
                    throw ConfigError("landscape is missing a utility on edge " + spec.edge_label(e));
                }
            }
        }
        if (j.contains("interactions")) {
            for (const auto& t : j.at("interactions")) {
                const auto [ea, oa] = term_of(t.at("a").get<std::string>());
                const auto [eb, ob] = term_of(t.at("b").get<std::string>());
                land.interactions.push_back({ea, oa, eb, ob, t.at("value").get<double>()});
            }
        }
        land.validate(spec);
        return land;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed landscape: ") + ex.what());
    }
}

inline SyntheticLandscape load_landscape(const std::string& path, const SearchSpaceSpec& spec)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open landscape file " + path);
    }
    try {
        return landscape_from_json(nlohmann::json::parse(in), spec);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ConfigError("landscape file " + path + ": " + ex.what());
    }
}

/// Which epoch index feeds sigma(e_t).
enum class EpochClock {
    global,            // the search's shared training clock (EpochContext::global_epoch)
    per_architecture,  // how many epochs this architecture has been trained
};

/// Evaluator over a SyntheticLandscape: metric = q(arch) + xi with
/// xi ~ N(0, sigma(e_t)), e_t capped at e_star, optionally clamped to [0, 1].
/// Noise for a call is drawn from derive(seed, "noise", ctx.stream,
/// ctx.local_epoch, e_t), so concurrent calls are order-independent.
class SyntheticOracle : public Evaluator {
public:
    SyntheticOracle(const SearchSpaceSpec& spec, SyntheticLandscape landscape, std::uint64_t seed,
                    EpochClock clock = EpochClock::global)
        : spec_(spec), land_(std::move(landscape)), seed_(seed), clock_(clock), rng_(derive(seed, "oracle"))
    {
        land_.validate(spec_);
    }

    const SyntheticLandscape& landscape() const noexcept { return land_; }

    double train_epoch(const Architecture& arch, const EpochContext& ctx) override
    {
        const long e_t = clock_ == EpochClock::global ? ctx.global_epoch : bump(arch);
        Rng rng = make_rng(derive(seed_, "noise", ctx.stream, ctx.local_epoch, e_t));
        return observe(arch, e_t, rng);
    }

    /// Standalone use outside a search: advances the architecture's own epoch
    /// counter and draws from the oracle's sequential stream.
    double train_epoch(const Architecture& arch)
    {
        const long e_t = bump(arch);
        return observe(arch, e_t, rng_);
    }

    /// One metric observation of `arch` at epoch e_t.
    double observe(const Architecture& arch, long e_t, Rng& rng) const
    {
        const double q = land_.quality(arch);
        const double sigma = land_.noise.sigma(std::clamp<long>(e_t, 1, land_.noise.e_star));
        double m = q;
        if (sigma > 0.0) {
            m += std::normal_distribution<double>(0.0, sigma)(rng);
        }
        return land_.clamp ? std::clamp(m, 0.0, 1.0) : m;
    }

    long epochs_of(const Architecture& arch) const
    {
        std::lock_guard lock(mu_);
        const auto it = counters_.find(arch);
        return it == counters_.end() ? 0 : it->second;
    }

    std::string description() const override
    {
        return "synthetic(beta=" + nlohmann::json(land_.noise.beta).dump() +
               ",gamma=" + nlohmann::json(land_.noise.gamma).dump() +
               ",e_star=" + std::to_string(land_.noise.e_star) +
               ",clock=" + (clock_ == EpochClock::global ? "global" : "per_architecture") + ")";
    }

    bool supports_concurrent() const override { return true; }

private:
    long bump(const Architecture& arch)
    {
        std::lock_guard lock(mu_);
        return ++counters_[arch];
    }

    SearchSpaceSpec spec_;
    SyntheticLandscape land_;
    std::uint64_t seed_;
    EpochClock clock_;
    Rng rng_;
    mutable std::mutex mu_;
    std::unordered_map<Architecture, long, ArchitectureHash> counters_;
};

}  // namespace ddpnas

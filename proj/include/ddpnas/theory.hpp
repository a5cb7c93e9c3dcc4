#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddpnas/engine.hpp"
#include "ddpnas/error.hpp"
#include "ddpnas/oracles/synthetic.hpp"
#include "ddpnas/random.hpp"
#include "ddpnas/search_space.hpp"

namespace ddpnas {

/// Parameters of the pruning-error bound: the deviation model plus the
/// threshold delta(|O|) = zeta * exp(|O| - |O|*).
struct BoundParams {
    NoiseParams noise;
    double zeta = 1.0;
    int ops_count = 2;      // |O|
    int ops_count_max = 2;  // |O|*

    void validate() const
    {
        noise.validate();
        if (!(zeta > 0.0) || !std::isfinite(zeta)) {
            throw ConfigError("zeta must be > 0");
        }
        if (ops_count < 1 || ops_count > ops_count_max) {
            throw ConfigError("ops_count must lie in [1, ops_count_max]");
        }
    }
};

/// beta (e_star - e_t) + gamma, for 1 <= e_t <= e_star.
inline double sigma(const BoundParams& p, long e_t) { return p.noise.sigma(e_t); }

inline double delta_threshold(const BoundParams& p)
{
    return p.zeta * std::exp(static_cast<double>(p.ops_count - p.ops_count_max));
}

/// Chebyshev: P(|xi| >= delta) <= (sigma / delta)^2. Not truncated at 1.
inline double single_round_bound(const BoundParams& p, long e_t)
{
    const double r = sigma(p, e_t) / delta_threshold(p);
    return r * r;
}

struct TotalBound {
    double exact = 0.0;       // (2 - 1/K) (sigma / delta)^2
    double simplified = 0.0;  // 2 (sigma / delta)^2
};

/// Bound on the error rate of a series of K prunings. Sum_{n<=K} 1/n^2 is
/// bounded by 1 + Sum_{n=2..K} 1/(n(n-1)) = 2 - 1/K, which is < 2.
inline TotalBound total_error_bound(const BoundParams& p, long e_t, int K)
{
    if (K < 1) {
        throw ConfigError("K must be >= 1");
    }
    const double r2 = single_round_bound(p, e_t);
    return {(2.0 - 1.0 / K) * r2, 2.0 * r2};
}

struct ConfidenceInterval {
    double low = 0.0;
    double high = 1.0;
};

/// Wilson score interval for a binomial proportion (default 95%).
inline ConfidenceInterval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054)
{
    if (n == 0) {
        return {0.0, 1.0};
    }
    const double nn = static_cast<double>(n);
    const double phat = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (phat + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
    // the limits at 0 and n are exactly 0 and 1; the formula leaves rounding dust
    return {successes == 0 ? 0.0 : std::max(0.0, center - half), successes == n ? 1.0 : std::min(1.0, center + half)};
}

/// The unique best architecture of a landscape, by enumeration.
inline Architecture brute_force_optimum(const SearchSpaceSpec& spec, const SyntheticLandscape& land,
                                        const BigInt& cap = BigInt(1) << 22)
{
    const auto archs = enumerate_architectures(spec, cap);
    std::size_t best = 0;
    double best_q = land.quality(archs[0]);
    bool tied = false;
    for (std::size_t i = 1; i < archs.size(); ++i) {
        const double q = land.quality(archs[i]);
        if (q > best_q) {
            best = i;
            best_q = q;
            tied = false;
        } else if (q == best_q) {
            tied = true;
        }
    }
    if (tied) {
        throw ConfigError("the landscape's optimum is not unique");
    }
    return archs[best];
}

struct RoundErrorStats {
    int round = 0;
    int k = 0;                      // alive count during the round
    long first_epoch = 0;           // e_t of the round's first sweep
    long epochs_before = 0;
    std::size_t mistakes = 0;       // trials whose prune in this round hit the optimum
    std::size_t mistakes_from = 0;  // trials with a hit in this round or any later one
    double residual_sd = 0.0;       // observed rms of metric - q(arch)
};

struct MonteCarloResult {
    std::size_t trials = 0;
    int T = 1;
    std::size_t errors = 0;  // trials where any prune hit the optimum
    double rate = 0.0;
    ConfidenceInterval ci;
    std::vector<RoundErrorStats> rounds;
    Architecture optimum;
};

namespace detail {

// Records, per round, which prunes hit the optimum and the metric residuals.
class TrialRecorder : public SearchObserver {
public:
    TrialRecorder(const SyntheticLandscape& land, const Architecture& optimum) : land_(land), optimum_(optimum) {}

    void on_round_start(int /*round*/, std::size_t k, long epochs_before) override
    {
        rounds_.push_back({static_cast<int>(k), epochs_before, false, 0.0, 0});
    }
    void on_samples(int /*round*/, const std::vector<Architecture>& archs) override { archs_ = archs; }
    void on_metrics(int /*round*/, const std::vector<std::vector<double>>& metrics) override
    {
        auto& r = rounds_.back();
        for (std::size_t s = 0; s < metrics.size(); ++s) {
            const double q = land_.quality(archs_[s]);
            for (double m : metrics[s]) {
                r.sq_residual += (m - q) * (m - q);
                ++r.count;
            }
        }
    }
    void on_prune(int /*round*/, const std::vector<PruneEvent>& events) override
    {
        for (const auto& ev : events) {
            if (ev.op == optimum_.choice[ev.edge]) {
                rounds_.back().hit = true;
            }
        }
    }

    struct Round {
        int k;
        long epochs_before;
        bool hit;
        double sq_residual;
        std::size_t count;
    };
    const std::vector<Round>& rounds() const { return rounds_; }

private:
    const SyntheticLandscape& land_;
    const Architecture& optimum_;
    std::vector<Architecture> archs_;
    std::vector<Round> rounds_;
};

}  // namespace detail

/// Runs `trials` independent searches on a synthetic landscape and counts a
/// trial as an error when any prune removes an operation of the brute-force
/// optimum. Trial i uses engine seed derive(seed, "trial", i) and oracle
/// seed derive(seed, "trial-oracle", i); the oracle uses the global clock.
/// Results are identical for any `jobs`.
inline MonteCarloResult monte_carlo_error_rate(const SearchSpaceSpec& spec, const SyntheticLandscape& land,
                                               const SearchConfig& config, std::size_t trials, std::uint64_t seed,
                                               int jobs = 1)
{
    if (trials == 0) {
        throw ConfigError("trials must be >= 1");
    }
    land.validate(spec);
    MonteCarloResult out;
    out.optimum = brute_force_optimum(spec, land);
    out.trials = trials;
    out.T = config.T;

    std::vector<std::vector<detail::TrialRecorder::Round>> per_trial(trials);
    detail::parallel_for(trials, jobs, [&](std::size_t i) {
        SyntheticOracle oracle(spec, land, derive(seed, "trial-oracle", i), EpochClock::global);
        SearchConfig cfg = config;
        cfg.seed = derive(seed, "trial", i);
        cfg.jobs = 1;
        cfg.checkpoint_path.reset();
        cfg.resume.reset();
        detail::TrialRecorder rec(land, out.optimum);
        run_search(spec, oracle, cfg, &rec);
        per_trial[i] = rec.rounds();
    });

    const std::size_t n_rounds = per_trial.front().size();
    out.rounds.resize(n_rounds);
    std::vector<double> sq_res(n_rounds, 0.0);
    std::vector<std::size_t> counts(n_rounds, 0);
    for (const auto& rounds : per_trial) {
        bool later_hit = false;
        for (std::size_t r = n_rounds; r-- > 0;) {
            later_hit = later_hit || rounds[r].hit;
            out.rounds[r].mistakes += rounds[r].hit ? 1 : 0;
            out.rounds[r].mistakes_from += later_hit ? 1 : 0;
            sq_res[r] += rounds[r].sq_residual;
            counts[r] += rounds[r].count;
        }
        out.errors += later_hit ? 1 : 0;
    }
    const auto& first = per_trial.front();
    for (std::size_t r = 0; r < n_rounds; ++r) {
        auto& s = out.rounds[r];
        s.round = static_cast<int>(r) + 1;
        s.k = first[r].k;
        s.epochs_before = first[r].epochs_before;
        s.first_epoch = first[r].epochs_before + first[r].k;
        s.residual_sd = std::sqrt(sq_res[r] / static_cast<double>(counts[r]));
    }
    out.rate = static_cast<double>(out.errors) / static_cast<double>(trials);
    out.ci = wilson_interval(out.errors, trials);
    return out;
}

/// One line of the theory CSV.
struct BoundRow {
    long e_t = 0;
    int k = 0;
    double sigma = 0.0;
    double delta = 0.0;
    double bound_exact = 0.0;
    double bound_simplified = 0.0;
    double empirical_rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    // diagnostics
    double beta = 0.0;
    double gamma = 0.0;
    double zeta = 0.0;
    int round = 0;
    double round_rate = 0.0;
    double residual_sd = 0.0;
    double model_sd = 0.0;
    bool deviation_mismatch = false;
};

inline constexpr const char* kBoundCsvHeader =
    "e_t,K,sigma,delta,bound_exact,bound_simplified,empirical_rate,ci_low,ci_high,"
    "beta,gamma,zeta,round,round_rate,residual_sd,model_sd,deviation_mismatch";

inline void write_bound_row(std::ostream& out, const BoundRow& r)
{
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    out << r.e_t << ',' << r.k << ',' << num(r.sigma) << ',' << num(r.delta) << ',' << num(r.bound_exact) << ','
        << num(r.bound_simplified) << ',' << num(r.empirical_rate) << ',' << num(r.ci_low) << ',' << num(r.ci_high)
        << ',' << num(r.beta) << ',' << num(r.gamma) << ',' << num(r.zeta) << ',' << r.round << ','
        << num(r.round_rate) << ',' << num(r.residual_sd) << ',' << num(r.model_sd) << ','
        << (r.deviation_mismatch ? 1 : 0) << '\n';
}

/// Observed residual sd farther than this fraction from the model flags a
/// mismatch between the landscape noise and the bound parameters.
inline constexpr double kDeviationTolerance = 0.25;

/// Rows for one (beta, gamma) cell: round r compares the error bound
/// at (e_t of the round's first sweep, K alive, |O| = K) with the fraction
/// of trials that pruned part of the optimum in round r or later. Row 1 is
/// therefore the whole-search error rate. `bound_noise` parameterizes the
/// bound; the landscape's own noise drives the simulation.
inline std::vector<BoundRow> bound_rows(const MonteCarloResult& mc, const NoiseParams& bound_noise, double zeta,
                                        int initial_k)
{
    std::vector<BoundRow> rows;
    for (const auto& s : mc.rounds) {
        BoundParams p{bound_noise, zeta, s.k, initial_k};
        const long e_t = std::min<long>(s.first_epoch, bound_noise.e_star);
        const TotalBound b = total_error_bound(p, e_t, s.k);
        const auto ci = wilson_interval(s.mistakes_from, mc.trials);
        BoundRow row;
        row.e_t = e_t;
        row.k = s.k;
        row.sigma = sigma(p, e_t);
        row.delta = delta_threshold(p);
        row.bound_exact = b.exact;
        row.bound_simplified = b.simplified;
        row.empirical_rate = static_cast<double>(s.mistakes_from) / static_cast<double>(mc.trials);
        row.ci_low = ci.low;
        row.ci_high = ci.high;
        row.beta = bound_noise.beta;
        row.gamma = bound_noise.gamma;
        row.zeta = zeta;
        row.round = s.round;
        row.round_rate = static_cast<double>(s.mistakes) / static_cast<double>(mc.trials);
        double sq = 0.0;
        for (int t = 1; t <= mc.T; ++t) {
            const double sd = bound_noise.sigma(std::min<long>(s.epochs_before + static_cast<long>(s.k) * t,
                                                               bound_noise.e_star));
            sq += sd * sd;
        }
        row.residual_sd = s.residual_sd;
        row.model_sd = std::sqrt(sq / mc.T);
        if (row.model_sd > 0.0) {
            row.deviation_mismatch = std::abs(row.residual_sd / row.model_sd - 1.0) > kDeviationTolerance;
        } else {
            row.deviation_mismatch = row.residual_sd > 1e-12;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace ddpnas

#include <CLI11.hpp>

#include "ddpnas/cli.hpp"

int main(int argc, char** argv)
{
    using namespace ddpnas::cli;

    CLI::App app{"Dynamic distribution pruning architecture search"};
    app.require_subcommand(1);

    SearchOptions search;
    std::optional<std::uint64_t> search_seed;
    auto* s = app.add_subcommand("search", "run a search and write manifest, event log, checkpoint and result");
    s->add_option("-c,--config", search.config_path, "JSON config file");
    s->add_option("-o,--out", search.out_dir, "output directory");
    s->add_option("--seed", search_seed, "root seed (overrides the config)");
    s->add_option("-j,--jobs", search.jobs, "concurrent evaluations per sweep");
    s->add_option("overrides", search.overrides, "key=value config overrides");

    BenchGenOptions bench;
    std::optional<std::uint64_t> bench_seed;
    auto* b = app.add_subcommand("bench-gen", "write a tabular benchmark from a synthetic landscape");
    b->add_option("-c,--config", bench.config_path, "JSON config file");
    b->add_option("-e,--epochs", bench.epochs, "epochs recorded per architecture");
    b->add_option("-o,--out", bench.out_path, "benchmark file");
    b->add_option("--cap", bench.cap, "maximum number of architectures");
    b->add_option("--seed", bench_seed, "root seed (overrides the config)");
    b->add_option("overrides", bench.overrides, "key=value config overrides");

    BoundOptions bound;
    auto* bd = app.add_subcommand("bound", "print the pruning-error bound over a range of e_t");
    bd->add_option("--beta", bound.beta);
    bd->add_option("--gamma", bound.gamma);
    bd->add_option("--e-star", bound.e_star);
    bd->add_option("--zeta", bound.zeta);
    bd->add_option("--ops", bound.ops, "|O|, operations alive");
    bd->add_option("--ops-max", bound.ops_max, "|O|*, operations at the start");
    bd->add_option("-K", bound.k, "K in the total bound");
    bd->add_option("--from", bound.from, "first e_t");
    bd->add_option("--to", bound.to, "last e_t");
    bd->add_option("--step", bound.step, "e_t step");
    bd->add_option("-o,--out", bound.out_path, "CSV file (default stdout)");

    ValidateOptions validate;
    std::optional<std::uint64_t> validate_seed;
    auto* v = app.add_subcommand("validate-bound", "Monte Carlo error rates against the bound");
    v->add_option("-c,--config", validate.config_path, "JSON config file");
    v->add_option("-n,--trials", validate.trials, "trials per grid cell");
    v->add_option("-o,--out", validate.out_path, "CSV file");
    v->add_option("-j,--jobs", validate.jobs, "concurrent trials");
    v->add_option("--seed", validate_seed, "root seed (overrides the config)");
    v->add_option("overrides", validate.overrides, "key=value config overrides");

    ReportOptions report;
    auto* r = app.add_subcommand("report", "summarize an event log and write plot-ready CSVs");
    r->add_option("log", report.log_path, "events.jsonl")->required();
    r->add_option("-o,--out", report.out_dir, "directory for the CSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    auto with_seed = [](std::vector<std::string>& overrides, const std::optional<std::uint64_t>& seed) {
        if (seed) {
            overrides.push_back("seed=" + std::to_string(*seed));
        }
    };
    if (*s) {
        with_seed(search.overrides, search_seed);
        return cmd_search(search);
    }
    if (*b) {
        with_seed(bench.overrides, bench_seed);
        return cmd_bench_gen(bench);
    }
    if (*bd) {
        return cmd_bound(bound);
    }
    if (*v) {
        with_seed(validate.overrides, validate_seed);
        return cmd_validate_bound(validate);
    }
    return cmd_report(report);
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "ddpnas/cli.hpp"
#include "test_support.hpp"

using namespace ddpnas;
using namespace ddpnas::cli;

namespace {

std::string config_file(const std::string& name)
{
    const char* dir = std::getenv("DDP_CONFIG_DIR");
    return std::string(dir ? dir : "configs") + "/" + name;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        // fields may be double-quoted; quoted fields contain no quotes
        std::vector<std::string> cells(1);
        bool in_quotes = false;
        for (char ch : line) {
            if (ch == '"') {
                in_quotes = !in_quotes;
            } else if (ch == ',' && !in_quotes) {
                cells.emplace_back();
            } else {
                cells.back().push_back(ch);
            }
        }
        rows.push_back(cells);
    }
    return rows;
}

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(slurp(p)); }

struct Run {
    int code;
    std::string out;
    std::string err;
};

template <typename Opt, typename Fn>
Run run(Fn fn, const Opt& opt)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = fn(opt, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(Config, DefaultsOverridesAndUnknownKeys)
{
    const auto cfg = Config::load(std::nullopt, {"spec.num_nodes=3", "oracle.kind=\"tabular\"", "oracle.dataset=ring"});
    EXPECT_EQ(cfg.get<int>("spec.num_nodes"), 3);
    EXPECT_EQ(cfg.get<std::string>("oracle.kind"), "tabular");
    EXPECT_EQ(cfg.get<std::string>("oracle.dataset"), "ring");
    EXPECT_EQ(cfg.get<int>("search.T"), 3);
    EXPECT_TRUE(cfg.is_set("spec.num_nodes"));
    EXPECT_FALSE(cfg.is_set("search.T"));
    EXPECT_THROW(Config::load(std::nullopt, {"search.TT=3"}), ConfigError);
    EXPECT_THROW(Config::load(std::nullopt, {"novalue"}), ConfigError);
    EXPECT_THROW(Config::load(config_file("missing.json"), {}), ConfigError);
}

TEST(CmdSearch, MinimalSelectsOptimum)
{
    const auto dir = ddptest::temp_dir("cli-minimal");
    SearchOptions opt{config_file("minimal.json"), {}, dir.string(), 1};
    const auto r = run(cmd_search, opt);
    ASSERT_EQ(r.code, kOk) << r.err;
    const auto result = read_json(dir / "result.json");
    const auto cfg = Config::load(opt.config_path, {});
    const auto spec = make_spec(cfg);
    const auto land = make_landscape_from(cfg, spec);
    EXPECT_EQ(result["final_architecture"], encode(spec, brute_force_optimum(spec, land)));
    EXPECT_EQ(result["k_per_round"], nlohmann::json({2}));
    EXPECT_EQ(result["total_trained_epochs"], 6);
    const auto manifest = read_json(dir / "manifest.json");
    EXPECT_EQ(manifest["tool"], "ddpnas");
    EXPECT_EQ(manifest["space_size"], "4");
    EXPECT_TRUE(manifest.contains("started"));
    EXPECT_TRUE(result.contains("finished"));
    EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint.json"));
}

TEST(CmdSearch, SameSeedGivesIdenticalLogs)
{
    const auto a = ddptest::temp_dir("cli-seed-a");
    const auto b = ddptest::temp_dir("cli-seed-b");
    const auto c = ddptest::temp_dir("cli-seed-c");
    const std::vector<std::string> over{"oracle.gamma=0.05", "seed=7"};
    ASSERT_EQ(run(cmd_search, SearchOptions{config_file("budget_k8.json"), over, a.string(), 1}).code, kOk);
    ASSERT_EQ(run(cmd_search, SearchOptions{config_file("budget_k8.json"), over, b.string(), 1}).code, kOk);
    ASSERT_EQ(run(cmd_search, SearchOptions{config_file("budget_k8.json"), {"oracle.gamma=0.05", "seed=8"},
                                             c.string(), 1})
                  .code,
              kOk);
    EXPECT_EQ(slurp(a / "events.jsonl"), slurp(b / "events.jsonl"));
    EXPECT_NE(slurp(a / "events.jsonl"), slurp(c / "events.jsonl"));
    EXPECT_EQ(slurp(a / "checkpoint.json"), slurp(b / "checkpoint.json"));
}

TEST(CmdSearch, BudgetK8AndJobsInvariance)
{
    const auto a = ddptest::temp_dir("cli-jobs-1");
    const auto b = ddptest::temp_dir("cli-jobs-8");
    ASSERT_EQ(run(cmd_search, SearchOptions{config_file("budget_k8.json"), {}, a.string(), 1}).code, kOk);
    ASSERT_EQ(run(cmd_search, SearchOptions{config_file("budget_k8.json"), {}, b.string(), 8}).code, kOk);
    const auto result = read_json(a / "result.json");
    EXPECT_EQ(result["total_trained_epochs"], 105);
    EXPECT_EQ(result["k_per_round"], nlohmann::json({8, 7, 6, 5, 4, 3, 2}));
    EXPECT_EQ(result["prune_log"].size(), 7u * 14u);
    EXPECT_EQ(slurp(a / "events.jsonl"), slurp(b / "events.jsonl"));
    EXPECT_EQ(read_json(b / "result.json")["final_architecture"], result["final_architecture"]);
}

TEST(CmdSearch, ResumeFromCheckpointMatches)
{
    const auto full = ddptest::temp_dir("cli-resume-full");
    const auto resumed = ddptest::temp_dir("cli-resume-part");
    ASSERT_EQ(run(cmd_search, SearchOptions{config_file("budget_k8.json"), {"search.checkpoint_every=1"},
                                             full.string(), 1})
                  .code,
              kOk);
    // a checkpoint taken after round 3 of an identical run
    const auto cfg = Config::load(config_file("budget_k8.json"), {});
    const auto spec = make_spec(cfg);
    auto sc = make_search_config(cfg);
    auto ev = make_evaluator(cfg, spec);
    class StopAfter : public SearchObserver {
    public:
        void on_round_start(int round, std::size_t, long) override
        {
            if (round == 4) {
                throw std::runtime_error("stop");
            }
        }
    } stop;
    sc.checkpoint_path = resumed / "partial.json";
    EXPECT_ANY_THROW(run_search(spec, *ev, sc, &stop));
    ASSERT_TRUE(std::filesystem::exists(resumed / "partial.json"));
    const auto r = run(cmd_search, SearchOptions{config_file("budget_k8.json"),
                                                 {"search.resume=\"" + (resumed / "partial.json").string() + "\""},
                                                 resumed.string(), 1});
    ASSERT_EQ(r.code, kOk) << r.err;
    EXPECT_EQ(read_json(resumed / "result.json")["final_architecture"],
              read_json(full / "result.json")["final_architecture"]);
}

TEST(CmdSearch, ErrorsMapToExitCodes)
{
    const auto dir = ddptest::temp_dir("cli-errors");
    EXPECT_EQ(run(cmd_search, SearchOptions{std::nullopt, {"search.T=0"}, dir.string(), 1}).code, kConfigError);
    EXPECT_EQ(run(cmd_search, SearchOptions{std::nullopt, {"oracle.kind=\"nope\""}, dir.string(), 1}).code,
              kConfigError);
    EXPECT_EQ(run(cmd_search, SearchOptions{config_file("nope.json"), {}, dir.string(), 1}).code, kConfigError);
    const auto missing = run(cmd_search, SearchOptions{std::nullopt,
                                                       {"oracle.kind=\"tabular\"", "oracle.benchmark=\"/nonexistent\""},
                                                       dir.string(), 1});
    EXPECT_NE(missing.code, kOk);
    // a benchmark with too few epochs for T=3 overflows at runtime
    const auto bench = dir / "short.txt";
    ASSERT_EQ(run(cmd_bench_gen, BenchGenOptions{config_file("minimal.json"), {}, 1, bench.string()}).code, kOk);
    const auto overflow = run(cmd_search, SearchOptions{config_file("minimal.json"),
                                                        {"oracle.kind=\"tabular\"",
                                                         "oracle.benchmark=\"" + bench.string() + "\""},
                                                        dir.string(), 1});
    EXPECT_EQ(overflow.code, kRuntimeError);
    EXPECT_NE(overflow.err.find("round 1"), std::string::npos) << overflow.err;
}

TEST(CmdBenchGen, TableAndTabularSearch)
{
    const auto dir = ddptest::temp_dir("cli-bench");
    const auto path = dir / "bench.txt";
    ASSERT_EQ(run(cmd_bench_gen, BenchGenOptions{config_file("minimal.json"), {}, 3, path.string()}).code, kOk);
    const auto bench = load_benchmark(path.string());
    EXPECT_EQ(bench.entries.size(), 4u);
    EXPECT_EQ(bench.epochs, 3);

    const auto cfg = Config::load(config_file("minimal.json"), {});
    const auto spec = make_spec(cfg);
    const auto land = make_landscape_from(cfg, spec);
    for (const auto& [key, metrics] : bench.entries) {
        for (double m : metrics) {
            EXPECT_EQ(m, land.quality(decode(key, spec)));
        }
    }
    const auto r = run(cmd_search, SearchOptions{config_file("minimal.json"),
                                                 {"oracle.kind=\"tabular\"",
                                                  "oracle.benchmark=\"" + path.string() + "\""},
                                                 (dir / "run").string(), 1});
    ASSERT_EQ(r.code, kOk) << r.err;
    EXPECT_EQ(read_json(dir / "run" / "result.json")["final_architecture"],
              encode(spec, brute_force_optimum(spec, land)));
}

TEST(CmdBenchGen, CapExceeded)
{
    const auto dir = ddptest::temp_dir("cli-bench-cap");
    const auto r = run(cmd_bench_gen,
                       BenchGenOptions{config_file("budget_k8.json"), {}, 1, (dir / "b.txt").string(), 1e6});
    EXPECT_EQ(r.code, kRuntimeError);
    // 8^14 architectures
    EXPECT_NE(r.err.find("4398046511104"), std::string::npos) << r.err;
}

TEST(CmdBound, Rows)
{
    BoundOptions opt;
    opt.beta = 0.1;
    opt.gamma = 0.05;
    opt.e_star = 100;
    opt.zeta = 2.0;
    opt.from = 100;
    opt.to = 100;
    auto r = run(cmd_bound, opt);
    ASSERT_EQ(r.code, kOk) << r.err;
    std::istringstream lines(r.out);
    std::string header;
    std::string row;
    std::getline(lines, header);
    std::getline(lines, row);
    EXPECT_EQ(header, kBoundTableHeader);
    EXPECT_EQ(row.rfind("100,8,0.05,2.0,", 0), 0u) << row;

    opt.from = 90;
    opt.to = 90;
    r = run(cmd_bound, opt);
    std::istringstream ex(r.out);
    std::getline(ex, header);
    std::getline(ex, row);
    std::vector<std::string> cells;
    std::stringstream ss(row);
    for (std::string c; std::getline(ss, c, ',');) {
        cells.push_back(c);
    }
    ASSERT_EQ(cells.size(), 7u);
    EXPECT_NEAR(std::stod(cells[2]), 1.05, 1e-12);
    EXPECT_EQ(std::stod(cells[3]), 2.0);
    EXPECT_NEAR(std::stod(cells[5]), 0.5513, 5e-5);
    EXPECT_EQ(cells[6], "0");

    opt.from = 1;
    opt.to = 100;
    opt.step = 9;
    r = run(cmd_bound, opt);
    std::istringstream all(r.out);
    std::getline(all, header);
    double previous = std::numeric_limits<double>::infinity();
    int n = 0;
    while (std::getline(all, row)) {
        std::stringstream rs(row);
        std::vector<std::string> c;
        for (std::string x; std::getline(rs, x, ',');) {
            c.push_back(x);
        }
        const double b = std::stod(c[5]);
        EXPECT_LT(b, previous);
        previous = b;
        ++n;
    }
    EXPECT_EQ(n, 12);

    opt.to = 101;
    EXPECT_EQ(run(cmd_bound, opt).code, kConfigError);
    opt.to = 50;
    opt.from = 60;
    EXPECT_EQ(run(cmd_bound, opt).code, kConfigError);
}

TEST(CmdValidateBound, NoiselessPasses)
{
    const auto dir = ddptest::temp_dir("cli-validate");
    const auto csv = dir / "v.csv";
    const auto r = run(cmd_validate_bound, ValidateOptions{config_file("validate_noiseless.json"), {}, std::nullopt,
                                                           csv.string(), 4});
    ASSERT_EQ(r.code, kOk) << r.out << r.err;
    const auto rows = read_csv(csv);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][6], "0.0");  // empirical rate
    EXPECT_EQ(rows[1][16], "0");    // no mismatch
}

TEST(CmdValidateBound, MismatchFlagged)
{
    const auto dir = ddptest::temp_dir("cli-mismatch");
    const auto csv = dir / "v.csv";
    const auto r = run(cmd_validate_bound,
                       ValidateOptions{config_file("validate_noiseless.json"),
                                       {"oracle.gamma=0.2", "oracle.clamp=false"}, 50, csv.string(), 2});
    EXPECT_NE(r.out.find("deviation mismatch"), std::string::npos) << r.out;
    const auto rows = read_csv(csv);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][16], "1");
}

TEST(CmdValidateBound, TiedLandscapeIsConfigError)
{
    const auto dir = ddptest::temp_dir("cli-tie");
    const auto land = dir / "tie.json";
    const auto spec = build_space(1, {"op0", "op1"}, 1);
    SyntheticLandscape tie;
    tie.utilities.assign(2, {0.5, 0.5});
    write_json_file(land, to_json(tie, spec));
    const auto r = run(cmd_validate_bound,
                       ValidateOptions{config_file("validate_noiseless.json"),
                                       {"oracle.landscape=\"" + land.string() + "\""}, 5, (dir / "v.csv").string(),
                                       1});
    EXPECT_EQ(r.code, kConfigError) << r.err;
}

TEST(CmdReport, ReconstructsSmallestRun)
{
    const auto dir = ddptest::temp_dir("cli-report");
    ASSERT_EQ(run(cmd_search, SearchOptions{config_file("minimal.json"), {}, dir.string(), 1}).code, kOk);
    const auto r = run(cmd_report, ReportOptions{(dir / "events.jsonl").string(), (dir / "report").string()});
    ASSERT_EQ(r.code, kOk) << r.err;
    EXPECT_NE(r.out.find("replay check: ok"), std::string::npos);
    const auto final_arch = read_json(dir / "result.json")["final_architecture"].get<std::string>();
    EXPECT_NE(r.out.find("final architecture: " + final_arch), std::string::npos);

    const auto prunes = read_csv(dir / "report" / "prunes.csv");
    ASSERT_EQ(prunes.size(), 3u);  // header + one per edge
    EXPECT_EQ(prunes[1][1], "cell0/e(-1,1)");
    EXPECT_EQ(prunes[2][1], "cell0/e(0,1)");

    std::map<std::pair<std::string, std::string>, double> sums;
    const auto probs = read_csv(dir / "report" / "probabilities.csv");
    for (std::size_t i = 1; i < probs.size(); ++i) {
        sums[{probs[i][0], probs[i][1]}] += std::stod(probs[i][3]);
    }
    EXPECT_FALSE(sums.empty());
    for (const auto& [key, s] : sums) {
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(CmdReport, K8LogAndTruncation)
{
    const auto dir = ddptest::temp_dir("cli-report-k8");
    ASSERT_EQ(run(cmd_search, SearchOptions{config_file("budget_k8.json"), {}, dir.string(), 2}).code, kOk);
    const auto ok = run(cmd_report, ReportOptions{(dir / "events.jsonl").string(), (dir / "rep").string()});
    ASSERT_EQ(ok.code, kOk) << ok.err;
    EXPECT_NE(ok.out.find("trained epochs: 105"), std::string::npos) << ok.out;
    EXPECT_NE(ok.out.find("prune events: 98"), std::string::npos) << ok.out;

    const std::string text = slurp(dir / "events.jsonl");
    {
        std::ofstream cut(dir / "cut.jsonl");
        cut << text.substr(0, text.size() * 2 / 3);
    }
    const auto bad = run(cmd_report, ReportOptions{(dir / "cut.jsonl").string(), (dir / "rep2").string()});
    EXPECT_EQ(bad.code, kRuntimeError);
    EXPECT_NE(bad.err.find("line"), std::string::npos) << bad.err;

    EXPECT_EQ(run(cmd_report, ReportOptions{(dir / "absent.jsonl").string(), dir.string()}).code, kConfigError);
}

TEST(CmdSearch, SupernetRuns)
{
    const auto dir = ddptest::temp_dir("cli-supernet");
    const auto r = run(cmd_search, SearchOptions{config_file("supernet.json"), {"spec.num_nodes=1"}, dir.string(), 4});
    ASSERT_EQ(r.code, kOk) << r.err;
    EXPECT_EQ(read_json(dir / "result.json")["total_trained_epochs"], 42);
    EXPECT_NE(read_json(dir / "manifest.json")["oracle"].get<std::string>().find("supernet"), std::string::npos);
}

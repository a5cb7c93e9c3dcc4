#include <gtest/gtest.h>

#include "ddpnas/engine.hpp"
#include "ddpnas/oracles/supernet.hpp"
#include "test_support.hpp"

using namespace ddpnas;

namespace {

SearchSpaceSpec micro_spec(int m) { return build_space(m, micro_op_names(), 1); }

Dataset ring() { return make_dataset({}); }

std::vector<Matrix> snapshot(MicroSupernet& net, const SearchSpaceSpec& spec)
{
    std::vector<Matrix> out;
    for (std::size_t e = 0; e < spec.num_flat_edges(); ++e) {
        for (int k = 0; k < spec.num_ops(); ++k) {
            for (const auto& p : net.op(e, k).params) {
                out.push_back(p.w);
            }
        }
    }
    return out;
}

}  // namespace

TEST(Dataset, SplitSizesAndDeterminism)
{
    const auto d = ring();
    EXPECT_EQ(d.x_train.rows(), 512);
    EXPECT_EQ(d.x_val.rows(), 256);
    EXPECT_EQ(d.y_val.size(), 256u);
    const auto again = ring();
    EXPECT_EQ(d.x_train, again.x_train);
    EXPECT_EQ(d.y_val, again.y_val);
    DatasetConfig other;
    other.seed = 1;
    EXPECT_NE(make_dataset(other).x_train, d.x_train);
}

TEST(Supernet, RejectsForeignVocabulary)
{
    EXPECT_THROW(MicroSupernet(build_space(1, {"a", "b"}, 1), ring(), {}), ConfigError);
}

// B_1 = id(B_-1) + lin(B_0); B_2 = lin(B_-1) + id(B_0) + id(B_1), checked
// against a direct evaluation with hand-set weights.
TEST(Supernet, NodeSumsMatchDirectEvaluation)
{
    const auto spec = micro_spec(2);
    SupernetConfig cfg;
    cfg.width = 2;
    MicroSupernet net(spec, ring(), cfg);
    net.stem_a().w = (Matrix(2, 2) << 1, 0, 0, 2).finished();
    net.stem_a_bias().w = (Matrix(1, 2) << 0.5, 0).finished();
    net.stem_b().w = (Matrix(2, 2) << 0, 1, 1, 0).finished();
    net.stem_b_bias().w = (Matrix(1, 2) << 0, -1).finished();
    const int id = static_cast<int>(MicroOp::identity);
    const int lin = static_cast<int>(MicroOp::linear);
    // flat edges: 0=(-1,1) 1=(0,1) 2=(-1,2) 3=(0,2) 4=(1,2)
    net.op(1, lin).params[0].w = (Matrix(2, 2) << 1, 2, 3, 4).finished();
    net.op(1, lin).params[1].w = (Matrix(1, 2) << 0.1, 0.2).finished();
    net.op(2, lin).params[0].w = (Matrix(2, 2) << -1, 0, 0.5, 1).finished();
    net.op(2, lin).params[1].w = (Matrix(1, 2) << 0, 0.3).finished();
    const Architecture arch{{id, lin, lin, id, id}};

    const Matrix x = (Matrix(1, 2) << 1.0, -2.0).finished();
    // stems: a = x*Sa + ba = [1, -4] + [0.5, 0] = [1.5, -4]; b = [-2, 1] + [0, -1] = [-2, 0]
    const double a0 = 1.5, a1 = -4.0, b0 = -2.0, b1 = 0.0;
    // lin on edge 1 applied to b: [b0*1 + b1*3 + 0.1, b0*2 + b1*4 + 0.2] = [-1.9, -3.8]
    const double n1_0 = a0 + (-1.9), n1_1 = a1 + (-3.8);
    // lin on edge 2 applied to a: [a0*-1 + a1*0.5, a0*0 + a1*1 + 0.3] = [-3.5, -3.7]
    const double n2_0 = -3.5 + b0 + n1_0, n2_1 = -3.7 + b1 + n1_1;

    const auto f = net.forward(arch, x);
    const auto& nodes = f.nodes[0];
    EXPECT_NEAR(nodes[0](0, 0), a0, 1e-6);
    EXPECT_NEAR(nodes[1](0, 0), b0, 1e-6);
    EXPECT_NEAR(nodes[2](0, 0), n1_0, 1e-6);
    EXPECT_NEAR(nodes[2](0, 1), n1_1, 1e-6);
    EXPECT_NEAR(nodes[3](0, 0), n2_0, 1e-6);
    EXPECT_NEAR(nodes[3](0, 1), n2_1, 1e-6);
}

TEST(Supernet, OnlySampledOpsChange)
{
    const auto spec = micro_spec(2);
    MicroSupernet net(spec, ring(), {});
    net.begin_search({5, 3, spec.num_flat_edges(), 42});
    const Architecture arch{{2, 3, 4, 1, 2}};
    const auto before = snapshot(net, spec);
    net.train_epoch(arch);
    std::size_t i = 0;
    for (std::size_t e = 0; e < spec.num_flat_edges(); ++e) {
        for (int k = 0; k < spec.num_ops(); ++k) {
            for (const auto& p : net.op(e, k).params) {
                const bool active = arch.choice[e] == k;
                if (active) {
                    EXPECT_NE(p.w, before[i]) << "edge " << e << " op " << k;
                } else {
                    EXPECT_EQ(p.w, before[i]) << "edge " << e << " op " << k;
                }
                ++i;
            }
        }
    }
}

TEST(Supernet, AllZeroArchitecturePredictsMajorityClass)
{
    const auto spec = micro_spec(2);
    DatasetConfig dc;
    dc.positive_fraction = 0.7;
    const auto data = make_dataset(dc);
    MicroSupernet net(spec, data, {});
    net.begin_search({5, 3, spec.num_flat_edges(), 20});
    const Architecture zeros{std::vector<int>(5, static_cast<int>(MicroOp::zero))};
    double acc = 0.0;
    for (int e = 0; e < 20; ++e) {
        acc = net.train_epoch(zeros);
    }
    const double positives = static_cast<double>(std::count(data.y_val.begin(), data.y_val.end(), 1)) / 256.0;
    const double majority = std::max(positives, 1.0 - positives);
    EXPECT_DOUBLE_EQ(acc, majority);
}

TEST(Supernet, FitsSeparableData)
{
    const auto spec = micro_spec(1);
    DatasetConfig dc;
    dc.kind = DatasetKind::blobs;
    MicroSupernet net(spec, make_dataset(dc), {});
    net.begin_search({5, 3, spec.num_flat_edges(), 30});
    const Architecture arch{{static_cast<int>(MicroOp::linear), static_cast<int>(MicroOp::mlp_wide)}};
    double acc = 0.0;
    for (int e = 0; e < 30; ++e) {
        acc = net.train_epoch(arch);
    }
    EXPECT_GE(acc, 0.95);
}

TEST(Supernet, DeterministicGivenSeedAndCalls)
{
    const auto spec = micro_spec(2);
    SupernetConfig cfg;
    cfg.seed = 5;
    MicroSupernet a(spec, ring(), cfg);
    MicroSupernet b(spec, ring(), cfg);
    const Architecture x{{2, 3, 4, 1, 2}};
    const Architecture y{{4, 4, 0, 2, 3}};
    for (const auto* arch : {&x, &y, &x}) {
        EXPECT_EQ(a.train_epoch(*arch), b.train_epoch(*arch));
    }
}

TEST(Supernet, CosineScheduleReachesZero)
{
    const auto spec = micro_spec(1);
    MicroSupernet net(spec, ring(), {});
    net.begin_search({5, 3, spec.num_flat_edges(), 4});
    EXPECT_DOUBLE_EQ(net.learning_rate(), 0.025);
    const Architecture arch{{2, 2}};
    net.train_epoch(arch);
    net.train_epoch(arch);
    EXPECT_NEAR(net.learning_rate(), 0.0125, 1e-15);
    net.train_epoch(arch);
    net.train_epoch(arch);
    EXPECT_NEAR(net.learning_rate(), 0.0, 1e-15);
}

TEST(Supernet, NonFiniteLossIsReported)
{
    const auto spec = micro_spec(1);
    SupernetConfig cfg;
    cfg.learning_rate = 1e6;
    MicroSupernet net(spec, ring(), cfg);
    net.begin_search({5, 3, spec.num_flat_edges(), 100});
    const Architecture arch{{static_cast<int>(MicroOp::mlp_wide), static_cast<int>(MicroOp::linear)}};
    try {
        for (int e = 0; e < 50; ++e) {
            net.train_epoch(arch);
        }
        FAIL() << "expected divergence";
    } catch (const RuntimeError& ex) {
        EXPECT_NE(std::string(ex.what()).find("non-finite loss"), std::string::npos) << ex.what();
    }
}

TEST(Supernet, WorksAsSearchEvaluator)
{
    const auto spec = micro_spec(1);
    MicroSupernet net(spec, ring(), {});
    SearchConfig cfg;
    cfg.jobs = 8;  // ignored: the supernet is serial
    const auto res = run_search(spec, net, cfg);
    EXPECT_EQ(res.total_trained_epochs, 42);
    EXPECT_EQ(net.epochs_done(), 42);
}

TEST(Supernet, MultiCellGradientsMatchFiniteDifferences)
{
    const auto spec = build_space(1, micro_op_names(), 3);
    SupernetConfig cfg;
    cfg.width = 3;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.batch_size = 8;
    DatasetConfig dc;
    dc.train_points = 8;
    dc.val_points = 8;
    const Architecture arch{{2, 3, 4, 2, 1, 4}};

    auto check = [&](auto&& pick) {
        MicroSupernet net(spec, make_dataset(dc), cfg);
        const auto& data = net.dataset();
        auto loss = [&] {
            const Matrix logits = net.forward(arch, data.x_train).logits;
            double l = 0.0;
            for (Eigen::Index i = 0; i < logits.rows(); ++i) {
                const double hi = logits.row(i).maxCoeff();
                const double z = std::exp(logits(i, 0) - hi) + std::exp(logits(i, 1) - hi);
                l -= logits(i, data.y_train[static_cast<std::size_t>(i)]) - hi - std::log(z);
            }
            return l / static_cast<double>(logits.rows());
        };
        Param& w = pick(net);
        const Matrix w0 = w.w;
        Matrix numeric(w0.rows(), w0.cols());
        const double h = 1e-6;
        for (Eigen::Index r = 0; r < w0.rows(); ++r) {
            for (Eigen::Index c = 0; c < w0.cols(); ++c) {
                w.w = w0;
                w.w(r, c) += h;
                const double up = loss();
                w.w(r, c) -= 2 * h;
                numeric(r, c) = (up - loss()) / (2 * h);
            }
        }
        w.w = w0;
        // one full-batch step at epoch 0 is w -= lr * grad with lr = 0.025
        net.train_epoch(arch);
        const Matrix analytic = (w0 - w.w) / 0.025;
        EXPECT_GT(numeric.norm(), 1e-8);
        EXPECT_LT((analytic - numeric).norm(), 1e-5 * std::max(1.0, numeric.norm()));
    };
    check([](MicroSupernet& n) -> Param& { return n.op(0, 2).params[0]; });
    check([](MicroSupernet& n) -> Param& { return n.op(1, 3).params[2]; });
    check([](MicroSupernet& n) -> Param& { return n.op(3, 2).params[1]; });
    check([](MicroSupernet& n) -> Param& { return n.stem_a(); });
    check([](MicroSupernet& n) -> Param& { return n.stem_b(); });
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddpnas/error.hpp"
#include "ddpnas/evaluator.hpp"
#include "ddpnas/random.hpp"
#include "ddpnas/search_space.hpp"

namespace ddpnas {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Micro-operation vocabulary of the supernet, in index order.
enum class MicroOp { zero = 0, identity = 1, linear = 2, mlp_narrow = 3, mlp_wide = 4 };

inline const std::vector<std::string>& micro_op_names()
{
    static const std::vector<std::string> names{"zero", "identity", "linear", "mlp_narrow", "mlp_wide"};
    return names;
}

enum class DatasetKind { blobs, ring };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::ring;
    int train_points = 512;
    int val_points = 256;
    double positive_fraction = 0.5;
    std::uint64_t seed = 0;
};

struct Dataset {
    Matrix x_train;  // n x 2
    std::vector<int> y_train;
    Matrix x_val;
    std::vector<int> y_val;
};

/// Two-class points in the plane. `blobs`: Gaussians around (-1,-1) and
/// (1,1), linearly separable in practice. `ring`: class 0 is a centered blob,
/// class 1 a ring of radius 2 around it; needs a non-linear boundary.
inline Dataset make_dataset(const DatasetConfig& cfg)
{
    if (cfg.train_points < 1 || cfg.val_points < 1) {
        throw ConfigError("dataset splits must be non-empty");
    }
    Rng rng = make_rng(derive(cfg.seed, "dataset"));
    std::bernoulli_distribution label(cfg.positive_fraction);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

    auto draw = [&](int n, Matrix& x, std::vector<int>& y) {
        x.resize(n, 2);
        y.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const int c = label(rng) ? 1 : 0;
            y[static_cast<std::size_t>(i)] = c;
            if (cfg.kind == DatasetKind::blobs) {
                const double mu = c ? 1.0 : -1.0;
                x(i, 0) = mu + 0.5 * gauss(rng);
                x(i, 1) = mu + 0.5 * gauss(rng);
            } else if (c == 0) {
                x(i, 0) = 0.6 * gauss(rng);
                x(i, 1) = 0.6 * gauss(rng);
            } else {
                const double r = 2.0 + 0.25 * gauss(rng);
                const double a = angle(rng);
                x(i, 0) = r * std::cos(a);
                x(i, 1) = r * std::sin(a);
            }
        }
    };
    Dataset d;
    draw(cfg.train_points, d.x_train, d.y_train);
    draw(cfg.val_points, d.x_val, d.y_val);
    return d;
}

struct SupernetConfig {
    int width = 8;
    int narrow = 4;
    int wide = 16;
    int batch_size = 32;
    double learning_rate = 0.025;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    bool reset_each_round = false;
    std::uint64_t seed = 0;
};

/// A trainable tensor with its momentum buffer.
struct Param {
    Matrix w;
    Matrix v;
    Matrix g;

    void init(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng)
    {
        std::uniform_real_distribution<double> u(-scale, scale);
        w = Matrix::NullaryExpr(rows, cols, [&]() { return u(rng); });
        v = Matrix::Zero(rows, cols);
        g = Matrix::Zero(rows, cols);
    }
};

/// Weights of one candidate operation on one edge. Layout by kind:
/// linear: {W, b}; mlp: {W1, b1, W2, b2}; zero/identity: none.
struct OpWeights {
    std::vector<Param> params;
};

/// Over-parameterized parent network: every (edge, op) owns its weights;
/// only the ops of the sampled architecture are active in a forward pass.
///
/// Cell t reads two input nodes (the stems for cell 0, then the outputs of
/// the two previous cells) and computes B_j = sum_{i<j} o^(i,j)(B_i). A
/// cell's output is the sum of its intermediate nodes. A linear head on the
/// last cell's output yields two logits.
class MicroSupernet : public Evaluator {
public:
    MicroSupernet(const SearchSpaceSpec& spec, Dataset data, SupernetConfig cfg)
        : spec_(spec), data_(std::move(data)), cfg_(cfg)
    {
        if (spec_.num_ops() != static_cast<int>(micro_op_names().size())) {
            throw ConfigError("the micro supernet needs exactly the 5 micro operations");
        }
        for (int k = 0; k < spec_.num_ops(); ++k) {
            if (spec_.op_name(k) != micro_op_names()[static_cast<std::size_t>(k)]) {
                throw ConfigError("supernet operation " + std::to_string(k) + " must be '" +
                                  micro_op_names()[static_cast<std::size_t>(k)] + "'");
            }
        }
        if (cfg_.width < 1 || cfg_.narrow < 1 || cfg_.wide < 1 || cfg_.batch_size < 1) {
            throw ConfigError("supernet sizes must be positive");
        }
        reset_weights();
    }

    void reset_weights()
    {
        Rng rng = make_rng(derive(cfg_.seed, "oracle", resets_++));
        const int h = cfg_.width;
        auto glorot = [](int in, int out) { return std::sqrt(6.0 / (in + out)); };
        stem_a_.init(2, h, glorot(2, h), rng);
        stem_a_b_.init(1, h, 0.0, rng);
        stem_b_.init(2, h, glorot(2, h), rng);
        stem_b_b_.init(1, h, 0.0, rng);
        head_.init(h, 2, glorot(h, 2), rng);
        head_b_.init(1, 2, 0.0, rng);
        ops_.assign(spec_.num_flat_edges() * static_cast<std::size_t>(spec_.num_ops()), {});
        for (std::size_t e = 0; e < spec_.num_flat_edges(); ++e) {
            for (int k = 0; k < spec_.num_ops(); ++k) {
                auto& p = op(e, k).params;
                switch (static_cast<MicroOp>(k)) {
                case MicroOp::zero:
                case MicroOp::identity:
                    break;
                case MicroOp::linear:
                    p.resize(2);
                    p[0].init(h, h, glorot(h, h), rng);
                    p[1].init(1, h, 0.0, rng);
                    break;
                case MicroOp::mlp_narrow:
                case MicroOp::mlp_wide: {
                    const int hidden = static_cast<MicroOp>(k) == MicroOp::mlp_narrow ? cfg_.narrow : cfg_.wide;
                    p.resize(4);
                    p[0].init(h, hidden, glorot(h, hidden), rng);
                    p[1].init(1, hidden, 0.0, rng);
                    p[2].init(hidden, h, glorot(hidden, h), rng);
                    p[3].init(1, h, 0.0, rng);
                    break;
                }
                }
            }
        }
        epochs_done_ = 0;
    }

    void begin_search(const SearchPlan& plan) override
    {
        horizon_ = std::max<long>(plan.total_epochs, 1);
        epochs_done_ = 0;
    }

    void begin_round(int round, std::span<const Architecture> /*architectures*/) override
    {
        if (cfg_.reset_each_round && round > 1) {
            const long done = epochs_done_;
            reset_weights();
            epochs_done_ = done;
        }
    }

    /// Cosine-annealed step size for the next epoch.
    double learning_rate() const
    {
        const double frac = std::min(1.0, static_cast<double>(epochs_done_) / static_cast<double>(horizon_));
        return 0.5 * cfg_.learning_rate * (1.0 + std::cos(std::numbers::pi * frac));
    }

    /// One pass over the training split with momentum SGD on the active ops,
    /// stems and head; returns validation accuracy.
    double train_epoch(const Architecture& arch, const EpochContext& /*ctx*/ = {}) override
    {
        spec_.validate(arch);
        const double lr = learning_rate();
        Rng rng = make_rng(derive(cfg_.seed, "shuffle", epochs_done_));
        std::vector<Eigen::Index> order(static_cast<std::size_t>(data_.x_train.rows()));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg_.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
            const auto n = static_cast<Eigen::Index>(end - start);
            Matrix x(n, 2);
            std::vector<int> y(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto src = order[start + static_cast<std::size_t>(i)];
                x.row(i) = data_.x_train.row(src);
                y[static_cast<std::size_t>(i)] = data_.y_train[static_cast<std::size_t>(src)];
            }
            const double loss = step(arch, x, y, lr);
            if (!std::isfinite(loss)) {
                throw RuntimeError("non-finite loss; offending weights: " + locate_non_finite(arch));
            }
        }
        ++epochs_done_;
        return accuracy(arch, data_.x_val, data_.y_val);
    }

    double accuracy(const Architecture& arch, const Matrix& x, const std::vector<int>& y) const
    {
        const Matrix logits = forward(arch, x).logits;
        int correct = 0;
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const int pred = logits(i, 1) > logits(i, 0) ? 1 : 0;
            correct += pred == y[static_cast<std::size_t>(i)] ? 1 : 0;
        }
        return static_cast<double>(correct) / static_cast<double>(logits.rows());
    }

    double validation_accuracy(const Architecture& arch) const { return accuracy(arch, data_.x_val, data_.y_val); }

    /// Activations of one forward pass. nodes[c] holds the cell's node
    /// outputs in order B_{-1}, B_0, B_1, ..., B_M.
    struct Forward {
        std::vector<std::vector<Matrix>> nodes;
        std::vector<std::vector<Matrix>> hidden;  // pre-activation of mlp ops, per flat edge
        Matrix logits;
    };

    Forward forward(const Architecture& arch, const Matrix& x) const
    {
        const std::size_t per_cell = spec_.edges().size();
        const int m = spec_.num_nodes();
        Forward f;
        f.hidden.resize(spec_.num_flat_edges());
        Matrix in_a = affine(x, stem_a_, stem_a_b_);
        Matrix in_b = affine(x, stem_b_, stem_b_b_);
        for (int c = 0; c < spec_.num_cell_types(); ++c) {
            std::vector<Matrix> nodes(static_cast<std::size_t>(m + 2), Matrix::Zero(x.rows(), cfg_.width));
            nodes[0] = in_a;
            nodes[1] = in_b;
            for (std::size_t local = 0; local < per_cell; ++local) {
                const std::size_t flat = static_cast<std::size_t>(c) * per_cell + local;
                const EdgeId& edge = spec_.edges()[local];
                nodes[static_cast<std::size_t>(edge.target + 1)] +=
                    apply(flat, arch.choice[flat], nodes[static_cast<std::size_t>(edge.source + 1)], f.hidden[flat]);
            }
            Matrix out = Matrix::Zero(x.rows(), cfg_.width);
            for (int j = 1; j <= m; ++j) {
                out += nodes[static_cast<std::size_t>(j + 1)];
            }
            f.nodes.push_back(std::move(nodes));
            in_a = std::move(in_b);
            in_b = std::move(out);
        }
        f.logits = affine(in_b, head_, head_b_);
        return f;
    }

    // Weight access for tests and diagnostics.
    OpWeights& op(std::size_t flat_edge, int k) { return ops_[flat_edge * static_cast<std::size_t>(spec_.num_ops()) + static_cast<std::size_t>(k)]; }
    const OpWeights& op(std::size_t flat_edge, int k) const
    {
        return ops_[flat_edge * static_cast<std::size_t>(spec_.num_ops()) + static_cast<std::size_t>(k)];
    }
    Param& stem_a() { return stem_a_; }
    Param& stem_a_bias() { return stem_a_b_; }
    Param& stem_b() { return stem_b_; }
    Param& stem_b_bias() { return stem_b_b_; }

    const Dataset& dataset() const noexcept { return data_; }
    long epochs_done() const noexcept { return epochs_done_; }

    std::string description() const override
    {
        return "supernet(width=" + std::to_string(cfg_.width) + ",batch=" + std::to_string(cfg_.batch_size) +
               ",lr=" + std::to_string(cfg_.learning_rate) + ")";
    }

private:
    static Matrix affine(const Matrix& x, const Param& w, const Param& b)
    {
        return (x * w.w).rowwise() + b.w.row(0);
    }

    Matrix apply(std::size_t flat, int k, const Matrix& in, std::vector<Matrix>& hidden) const
    {
        const auto& p = op(flat, k).params;
        switch (static_cast<MicroOp>(k)) {
        case MicroOp::zero:
            return Matrix::Zero(in.rows(), in.cols());
        case MicroOp::identity:
            return in;
        case MicroOp::linear:
            return affine(in, p[0], p[1]);
        case MicroOp::mlp_narrow:
        case MicroOp::mlp_wide: {
            hidden = {affine(in, p[0], p[1])};
            return affine(hidden[0].cwiseMax(0.0), p[2], p[3]);
        }
        }
        return in;
    }

    // Accumulates parameter gradients of op k given upstream grad g; returns grad wrt input.
    Matrix backprop(std::size_t flat, int k, const Matrix& in, const std::vector<Matrix>& hidden, const Matrix& g)
    {
        auto& p = op(flat, k).params;
        switch (static_cast<MicroOp>(k)) {
        case MicroOp::zero:
            return Matrix::Zero(in.rows(), in.cols());
        case MicroOp::identity:
            return g;
        case MicroOp::linear:
            p[0].g += in.transpose() * g;
            p[1].g += g.colwise().sum();
            return g * p[0].w.transpose();
        case MicroOp::mlp_narrow:
        case MicroOp::mlp_wide: {
            const Matrix act = hidden[0].cwiseMax(0.0);
            p[2].g += act.transpose() * g;
            p[3].g += g.colwise().sum();
            Matrix gh = g * p[2].w.transpose();
            gh = gh.array() * (hidden[0].array() > 0.0).cast<double>();
            p[0].g += in.transpose() * gh;
            p[1].g += gh.colwise().sum();
            return gh * p[0].w.transpose();
        }
        }
        return g;
    }

    double step(const Architecture& arch, const Matrix& x, const std::vector<int>& y, double lr)
    {
        const Forward f = forward(arch, x);
        const auto n = x.rows();

        // softmax cross-entropy
        Matrix glogits(n, 2);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double hi = f.logits.row(i).maxCoeff();
            const double e0 = std::exp(f.logits(i, 0) - hi);
            const double e1 = std::exp(f.logits(i, 1) - hi);
            const double z = e0 + e1;
            const int yi = y[static_cast<std::size_t>(i)];
            loss -= std::log((yi ? e1 : e0) / z);
            glogits(i, 0) = (e0 / z - (yi == 0 ? 1.0 : 0.0)) / static_cast<double>(n);
            glogits(i, 1) = (e1 / z - (yi == 1 ? 1.0 : 0.0)) / static_cast<double>(n);
        }
        loss /= static_cast<double>(n);

        zero_grads(arch);
        const int cells = spec_.num_cell_types();
        const std::size_t per_cell = spec_.edges().size();
        const int m = spec_.num_nodes();
        head_.g += cell_output(f, cells - 1).transpose() * glogits;
        head_b_.g += glogits.colwise().sum();

        // g_src[0], g_src[1]: stems a and b; g_src[c + 2]: output of cell c.
        // Cell c reads g_src[c] as B_{-1} and g_src[c + 1] as B_0.
        std::vector<Matrix> g_src(static_cast<std::size_t>(cells + 2), Matrix::Zero(n, cfg_.width));
        g_src.back() = glogits * head_.w.transpose();
        for (int c = cells - 1; c >= 0; --c) {
            const auto& nodes = f.nodes[static_cast<std::size_t>(c)];
            std::vector<Matrix> g_nodes(nodes.size(), Matrix::Zero(n, cfg_.width));
            for (int j = 1; j <= m; ++j) {
                g_nodes[static_cast<std::size_t>(j + 1)] = g_src[static_cast<std::size_t>(c + 2)];
            }
            for (std::size_t local = per_cell; local-- > 0;) {
                const std::size_t flat = static_cast<std::size_t>(c) * per_cell + local;
                const EdgeId& edge = spec_.edges()[local];
                const auto src = static_cast<std::size_t>(edge.source + 1);
                const auto dst = static_cast<std::size_t>(edge.target + 1);
                g_nodes[src] += backprop(flat, arch.choice[flat], nodes[src], f.hidden[flat], g_nodes[dst]);
            }
            g_src[static_cast<std::size_t>(c)] += g_nodes[0];
            g_src[static_cast<std::size_t>(c + 1)] += g_nodes[1];
        }
        const Matrix& g_stem_a = g_src[0];
        const Matrix& g_stem_b = g_src[1];
        stem_a_.g += x.transpose() * g_stem_a;
        stem_a_b_.g += g_stem_a.colwise().sum();
        stem_b_.g += x.transpose() * g_stem_b;
        stem_b_b_.g += g_stem_b.colwise().sum();

        apply_updates(arch, lr);
        return loss;
    }

    Matrix cell_output(const Forward& f, int c) const
    {
        const auto& nodes = f.nodes[static_cast<std::size_t>(c)];
        Matrix out = Matrix::Zero(nodes[0].rows(), cfg_.width);
        for (int j = 1; j <= spec_.num_nodes(); ++j) {
            out += nodes[static_cast<std::size_t>(j + 1)];
        }
        return out;
    }

    template <typename Fn>
    void for_active(const Architecture& arch, Fn&& fn)
    {
        for (Param* p : {&stem_a_, &stem_a_b_, &stem_b_, &stem_b_b_, &head_, &head_b_}) {
            fn(*p);
        }
        for (std::size_t e = 0; e < arch.choice.size(); ++e) {
            for (auto& p : op(e, arch.choice[e]).params) {
                fn(p);
            }
        }
    }

    void zero_grads(const Architecture& arch)
    {
        for_active(arch, [](Param& p) { p.g.setZero(); });
    }

    void apply_updates(const Architecture& arch, double lr)
    {
        for_active(arch, [&](Param& p) {
            p.v = cfg_.momentum * p.v + p.g + cfg_.weight_decay * p.w;
            p.w -= lr * p.v;
        });
    }

    std::string locate_non_finite(const Architecture& arch) const
    {
        for (std::size_t e = 0; e < arch.choice.size(); ++e) {
            for (const auto& p : op(e, arch.choice[e]).params) {
                if (!p.w.allFinite()) {
                    return spec_.edge_label(e) + "=" + spec_.op_name(arch.choice[e]);
                }
            }
        }
        return "stem/head";
    }

    SearchSpaceSpec spec_;
    Dataset data_;
    SupernetConfig cfg_;
    Param stem_a_, stem_a_b_, stem_b_, stem_b_b_, head_, head_b_;
    std::vector<OpWeights> ops_;
    long horizon_ = 1;
    long epochs_done_ = 0;
    std::uint64_t resets_ = 0;
};

/// Trains a fresh supernet on `arch` alone for `epochs` epochs (cosine
/// horizon = epochs) and returns the final validation accuracy.
inline double retrain_accuracy(const SearchSpaceSpec& spec, const Architecture& arch, const Dataset& data,
                               SupernetConfig cfg, int epochs)
{
    MicroSupernet net(spec, data, cfg);
    net.begin_search({spec.num_ops(), 1, spec.num_flat_edges(), epochs});
    double acc = 0.0;
    for (int e = 0; e < epochs; ++e) {
        acc = net.train_epoch(arch);
    }
    return acc;
}

}  // namespace ddpnas

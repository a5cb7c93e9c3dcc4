#pragma once

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "ddpnas/error.hpp"

namespace ddpnas {

using BigInt = boost::multiprecision::cpp_int;

struct OperationId {
    int index = 0;
    std::string name;

    friend bool operator==(const OperationId&, const OperationId&) = default;
};

/// Directed edge between two nodes of a cell. Nodes -1 and 0 are the cell
/// inputs; 1..M are intermediate nodes. Ordered by (target, source).
struct EdgeId {
    int source = -1;
    int target = 1;

    friend constexpr bool operator==(const EdgeId&, const EdgeId&) = default;
    friend constexpr std::strong_ordering operator<=>(const EdgeId& a, const EdgeId& b)
    {
        if (auto c = a.target <=> b.target; c != 0) {
            return c;
        }
        return a.source <=> b.source;
    }
};

/// One operation index per flat edge (cell-type major, canonical edge order
/// within a cell). This is the compact form of the per-edge one-hot vectors.
struct Architecture {
    std::vector<int> choice;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Thrown by enumerate_architectures when the space is larger than the cap.
class EnumerationCapError : public Error {
public:
    EnumerationCapError(BigInt size, BigInt cap)
        : Error("search space has " + size.str() + " architectures, exceeding the enumeration cap of " +
                cap.str())
        , size_(std::move(size))
    {}

    const BigInt& size() const noexcept { return size_; }

private:
    BigInt size_;
};

class SearchSpaceSpec {
public:
    SearchSpaceSpec() = default;

    int num_nodes() const noexcept { return num_nodes_; }
    int num_cell_types() const noexcept { return num_cell_types_; }
    int num_ops() const noexcept { return static_cast<int>(operations_.size()); }

    /// Edges of a single cell, canonical order.
    const std::vector<EdgeId>& edges() const noexcept { return edges_; }
    const std::vector<OperationId>& operations() const noexcept { return operations_; }

    /// Edges of all cell types concatenated; this is what the search engine sees.
    std::size_t num_flat_edges() const noexcept
    {
        return edges_.size() * static_cast<std::size_t>(num_cell_types_);
    }
    int cell_of(std::size_t flat) const noexcept { return static_cast<int>(flat / edges_.size()); }
    const EdgeId& edge_of(std::size_t flat) const noexcept { return edges_[flat % edges_.size()]; }

    /// "cell<t>/e(<i>,<j>)"
    std::string edge_label(std::size_t flat) const
    {
        const EdgeId& e = edge_of(flat);
        return "cell" + std::to_string(cell_of(flat)) + "/e(" + std::to_string(e.source) + "," +
               std::to_string(e.target) + ")";
    }

    const std::string& op_name(int index) const { return operations_.at(static_cast<std::size_t>(index)).name; }

    int op_index(std::string_view name) const
    {
        for (const auto& op : operations_) {
            if (op.name == name) {
                return op.index;
            }
        }
        return -1;
    }

    /// Throws ConfigError unless every edge carries a known operation.
    void validate(const Architecture& arch) const
    {
        if (arch.choice.size() != num_flat_edges()) {
            throw ConfigError("architecture assigns " + std::to_string(arch.choice.size()) +
                              " edges, the space has " + std::to_string(num_flat_edges()));
        }
        for (std::size_t e = 0; e < arch.choice.size(); ++e) {
            if (arch.choice[e] < 0 || arch.choice[e] >= num_ops()) {
                throw ConfigError("edge " + edge_label(e) + " carries unknown operation index " +
                                  std::to_string(arch.choice[e]));
            }
        }
    }

    friend bool operator==(const SearchSpaceSpec&, const SearchSpaceSpec&) = default;

private:
    friend SearchSpaceSpec build_space(int, const std::vector<std::string>&, int);

    int num_nodes_ = 0;
    int num_cell_types_ = 1;
    std::vector<EdgeId> edges_;
    std::vector<OperationId> operations_;
};

/// Fully connected cell DAG with two input nodes and `num_nodes` intermediate
/// nodes: every (i, j) with -1 <= i < j, 1 <= j <= num_nodes.
inline SearchSpaceSpec build_space(int num_nodes, const std::vector<std::string>& operations, int num_cell_types)
{
    if (num_nodes < 1) {
        throw ConfigError("a cell needs at least one intermediate node");
    }
    if (num_cell_types < 1) {
        throw ConfigError("num_cell_types must be >= 1");
    }
    if (operations.size() < 2) {
        throw ConfigError("the operation vocabulary needs at least two entries");
    }
    SearchSpaceSpec spec;
    spec.num_nodes_ = num_nodes;
    spec.num_cell_types_ = num_cell_types;
    for (std::size_t k = 0; k < operations.size(); ++k) {
        const auto& name = operations[k];
        if (name.empty()) {
            throw ConfigError("operation names must be non-empty");
        }
        if (name.find_first_of(";=/(), \t\n") != std::string::npos) {
            throw ConfigError("operation name '" + name + "' contains a reserved character");
        }
        if (std::find(operations.begin(), operations.begin() + static_cast<std::ptrdiff_t>(k), name) !=
            operations.begin() + static_cast<std::ptrdiff_t>(k)) {
            throw ConfigError("duplicate operation name '" + name + "'");
        }
        spec.operations_.push_back({static_cast<int>(k), name});
    }
    for (int j = 1; j <= num_nodes; ++j) {
        for (int i = -1; i < j; ++i) {
            spec.edges_.push_back({i, j});
        }
    }
    return spec;
}

/// num_cell_types * K^|E|, exact.
inline BigInt space_size(int num_cell_types, int num_ops, std::size_t num_edges)
{
    return BigInt(num_cell_types) * boost::multiprecision::pow(BigInt(num_ops), static_cast<unsigned>(num_edges));
}

inline BigInt space_size(const SearchSpaceSpec& spec)
{
    return space_size(spec.num_cell_types(), spec.num_ops(), spec.edges().size());
}

/// All architectures in lexicographic order over the flat edge list (last edge
/// varies fastest). Refuses when the space exceeds `cap`.
inline std::vector<Architecture> enumerate_architectures(const SearchSpaceSpec& spec, const BigInt& cap)
{
    const BigInt size = space_size(spec);
    if (size > cap) {
        throw EnumerationCapError(size, cap);
    }
    const BigInt joint = boost::multiprecision::pow(BigInt(spec.num_ops()), static_cast<unsigned>(spec.num_flat_edges()));
    if (joint > cap) {
        throw EnumerationCapError(joint, cap);
    }

    const std::size_t n = spec.num_flat_edges();
    const int k = spec.num_ops();
    std::vector<Architecture> out;
    out.reserve(joint.convert_to<std::size_t>());
    Architecture cur{std::vector<int>(n, 0)};
    while (true) {
        out.push_back(cur);
        std::size_t pos = n;
        while (pos > 0) {
            --pos;
            if (++cur.choice[pos] < k) {
                break;
            }
            cur.choice[pos] = 0;
            if (pos == 0) {
                return out;
            }
        }
    }
}

/// `cell<t>/e(<i>,<j>)=<op>` segments in canonical order, joined by ';'.
inline std::string encode(const SearchSpaceSpec& spec, const Architecture& arch)
{
    spec.validate(arch);
    std::string s;
    for (std::size_t e = 0; e < arch.choice.size(); ++e) {
        if (e) {
            s += ';';
        }
        s += spec.edge_label(e);
        s += '=';
        s += spec.op_name(arch.choice[e]);
    }
    return s;
}

namespace detail {

inline bool parse_int(std::string_view s, int& out)
{
    if (s.empty()) {
        return false;
    }
    const char* first = s.data();
    if (*first == '+') {
        return false;
    }
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

inline Architecture decode(std::string_view text, const SearchSpaceSpec& spec)
{
    const std::size_t per_cell = spec.edges().size();
    Architecture arch{std::vector<int>(spec.num_flat_edges(), -1)};

    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find(';', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const std::string_view seg = text.substr(start, end - start);
        auto bad = [&](const std::string& why) {
            return ConfigError("malformed architecture segment '" + std::string(seg) + "': " + why);
        };

        // cell<t>/e(<i>,<j>)=<op>
        if (!seg.starts_with("cell")) {
            throw bad("expected 'cell<t>/'");
        }
        const std::size_t slash = seg.find('/');
        const std::size_t open = seg.find("e(", slash == std::string_view::npos ? 0 : slash);
        const std::size_t comma = seg.find(',', open == std::string_view::npos ? 0 : open);
        const std::size_t close = seg.find(")=", comma == std::string_view::npos ? 0 : comma);
        if (slash == std::string_view::npos || open != slash + 1 || comma == std::string_view::npos ||
            close == std::string_view::npos) {
            throw bad("expected 'cell<t>/e(<i>,<j>)=<op>'");
        }
        int cell = 0;
        int src = 0;
        int dst = 0;
        if (!detail::parse_int(seg.substr(4, slash - 4), cell) ||
            !detail::parse_int(seg.substr(open + 2, comma - open - 2), src) ||
            !detail::parse_int(seg.substr(comma + 1, close - comma - 1), dst)) {
            throw bad("non-integer index");
        }
        const std::string_view op = seg.substr(close + 2);

        if (cell < 0 || cell >= spec.num_cell_types()) {
            throw ConfigError("unknown cell type " + std::to_string(cell) + " in '" + std::string(seg) + "'");
        }
        const EdgeId edge{src, dst};
        const auto it = std::find(spec.edges().begin(), spec.edges().end(), edge);
        if (it == spec.edges().end()) {
            throw ConfigError("unknown edge (" + std::to_string(src) + "," + std::to_string(dst) + ") in '" +
                              std::string(seg) + "'");
        }
        const int op_index = spec.op_index(op);
        if (op_index < 0) {
            throw ConfigError("unknown operation '" + std::string(op) + "' in '" + std::string(seg) + "'");
        }
        const std::size_t flat =
            static_cast<std::size_t>(cell) * per_cell + static_cast<std::size_t>(it - spec.edges().begin());
        if (arch.choice[flat] != -1) {
            throw ConfigError("edge " + spec.edge_label(flat) + " assigned twice");
        }
        arch.choice[flat] = op_index;
        start = end + 1;
    }
    for (std::size_t e = 0; e < arch.choice.size(); ++e) {
        if (arch.choice[e] == -1) {
            throw ConfigError("missing assignment for edge " + spec.edge_label(e));
        }
    }
    return arch;
}

struct ArchitectureHash {
    std::size_t operator()(const Architecture& a) const noexcept
    {
        std::size_t h = 1469598103934665603ULL;
        for (int c : a.choice) {
            h ^= static_cast<std::size_t>(c) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
};

}  // namespace ddpnas

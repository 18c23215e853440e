#pragma once

// Snapshot ingestion: node registry, snapshot matrix with per-column metadata,
// and the train/validate partition.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dss/csv.hpp"
#include "dss/errors.hpp"

namespace dss {

struct NodeEntry {
    std::string node_id;
    std::size_t row_index = 0;
    std::optional<double> x;
    std::optional<double> y;
};

/// Ordered set of candidate sensor locations. Row i of every snapshot matrix
/// belongs to entries()[i].
class NodeRegistry {
public:
    NodeRegistry() = default;

    explicit NodeRegistry(std::vector<NodeEntry> entries) : entries_(std::move(entries)) {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].row_index != i) {
                throw DataError("node registry row_index " + std::to_string(entries_[i].row_index) +
                                " at position " + std::to_string(i) + " (row indices must be 0..n-1)");
            }
            if (entries_[i].node_id.empty()) {
                throw DataError("empty node_id at row " + std::to_string(i));
            }
            if (!index_.emplace(entries_[i].node_id, i).second) {
                throw DataError("duplicate node_id '" + entries_[i].node_id + "' at row " + std::to_string(i));
            }
        }
    }

    /// Registry with ids "0".."n-1"; used for synthetic fixtures.
    static NodeRegistry numbered(std::size_t n, const std::string& prefix = "N") {
        std::vector<NodeEntry> e(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = {prefix + std::to_string(i), i, std::nullopt, std::nullopt};
        return NodeRegistry(std::move(e));
    }

    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<NodeEntry>& entries() const noexcept { return entries_; }
    const std::string& id(std::size_t row) const { return entries_.at(row).node_id; }

    std::optional<std::size_t> find(const std::string& node_id) const {
        const auto it = index_.find(node_id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<NodeEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class SplitTag { train, validate };

inline const char* to_string(SplitTag t) { return t == SplitTag::train ? "train" : "validate"; }

struct SnapshotMeta {
    std::string scenario_id;
    std::string event_id;
    std::string target_node_id;
    SplitTag split = SplitTag::train;
};

/// n_locations x n_snapshots matrix of network states. Immutable once built.
/// source_columns() maps each column back to its index in the originating file,
/// which serves as the snapshot id throughout reports.
class SnapshotMatrix {
public:
    SnapshotMatrix(Eigen::MatrixXd values, std::vector<SnapshotMeta> meta)
        : SnapshotMatrix(std::move(values), std::move(meta), {}) {}

    SnapshotMatrix(Eigen::MatrixXd values, std::vector<SnapshotMeta> meta, std::vector<std::size_t> source_columns)
        : values_(std::move(values)), meta_(std::move(meta)), source_(std::move(source_columns)) {
        if (values_.rows() < 1 || values_.cols() < 1) {
            throw DataError("snapshot matrix must have at least one row and one column");
        }
        if (static_cast<std::size_t>(values_.cols()) != meta_.size()) {
            throw DataError("snapshot matrix has " + std::to_string(values_.cols()) + " columns but " +
                            std::to_string(meta_.size()) + " metadata records");
        }
        if (source_.empty()) {
            source_.resize(meta_.size());
            for (std::size_t j = 0; j < source_.size(); ++j) source_[j] = j;
        } else if (source_.size() != meta_.size()) {
            throw DataError("source column map length does not match column count");
        }
        for (Eigen::Index j = 0; j < values_.cols(); ++j) {
            for (Eigen::Index i = 0; i < values_.rows(); ++i) {
                if (!std::isfinite(values_(i, j))) {
                    throw DataError("non-finite value at row " + std::to_string(i) + ", column " +
                                    std::to_string(source_[static_cast<std::size_t>(j)]));
                }
            }
        }
    }

    std::size_t n_locations() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t n_snapshots() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const std::vector<SnapshotMeta>& meta() const noexcept { return meta_; }
    const std::vector<std::size_t>& source_columns() const noexcept { return source_; }

private:
    Eigen::MatrixXd values_;
    std::vector<SnapshotMeta> meta_;
    std::vector<std::size_t> source_;
};

struct DataSplit {
    SnapshotMatrix train;
    SnapshotMatrix validate;
};

/// Partitions columns by split tag, preserving source order within each side.
inline DataSplit split_by_tag(const SnapshotMatrix& m) {
    std::vector<Eigen::Index> cols[2];
    for (std::size_t j = 0; j < m.n_snapshots(); ++j) {
        cols[m.meta()[j].split == SplitTag::train ? 0 : 1].push_back(static_cast<Eigen::Index>(j));
    }
    if (cols[0].empty()) throw DataError("empty training split");
    if (cols[1].empty()) throw DataError("empty validation split");

    auto take = [&](const std::vector<Eigen::Index>& idx) {
        Eigen::MatrixXd v = m.values()(Eigen::all, idx);
        std::vector<SnapshotMeta> meta;
        std::vector<std::size_t> src;
        meta.reserve(idx.size());
        src.reserve(idx.size());
        for (auto j : idx) {
            meta.push_back(m.meta()[static_cast<std::size_t>(j)]);
            src.push_back(m.source_columns()[static_cast<std::size_t>(j)]);
        }
        return SnapshotMatrix(std::move(v), std::move(meta), std::move(src));
    };
    return DataSplit{take(cols[0]), take(cols[1])};
}

// ---------------------------------------------------------------------------
// CSV I/O

namespace detail {

inline bool is_header(const std::vector<std::string_view>& fields, std::string_view first) {
    return !fields.empty() && fields[0] == first;
}

[[noreturn]] inline void parse_error(const std::string& path, std::size_t line, const std::string& msg) {
    throw DataError(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace detail

inline NodeRegistry load_nodes(const std::string& path) {
    std::vector<NodeEntry> entries;
    for (const auto& line : csv::read_lines(path)) {
        const auto f = csv::split(line.text);
        if (entries.empty() && detail::is_header(f, "node_id")) continue;
        if (f.empty() || f.size() > 3) detail::parse_error(path, line.number, "expected node_id,x,y");
        NodeEntry e;
        e.node_id = std::string(f[0]);
        e.row_index = entries.size();
        for (std::size_t k = 1; k < f.size(); ++k) {
            if (f[k].empty()) continue;
            const auto v = csv::parse_double(f[k]);
            if (!v) detail::parse_error(path, line.number, "bad coordinate '" + std::string(f[k]) + "'");
            (k == 1 ? e.x : e.y) = *v;
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw DataError(path + ": no nodes");
    return NodeRegistry(std::move(entries));
}

inline std::vector<SnapshotMeta> load_snapshot_meta(const std::string& path, std::size_t n_columns) {
    std::vector<std::optional<SnapshotMeta>> meta(n_columns);
    bool first = true;
    for (const auto& line : csv::read_lines(path)) {
        const auto f = csv::split(line.text);
        if (first && detail::is_header(f, "column_index")) {
            first = false;
            continue;
        }
        first = false;
        if (f.size() != 5) {
            detail::parse_error(path, line.number,
                                "expected column_index,scenario_id,event_id,target_node_id,split_tag");
        }
        const auto col = csv::parse_int(f[0]);
        if (!col) detail::parse_error(path, line.number, "bad column_index '" + std::string(f[0]) + "'");
        if (*col < 0 || static_cast<std::size_t>(*col) >= n_columns) {
            throw DataError(path + ":" + std::to_string(line.number) + ": column_index " + std::to_string(*col) +
                            " out of range (matrix has " + std::to_string(n_columns) + " columns)");
        }
        auto& slot = meta[static_cast<std::size_t>(*col)];
        if (slot) throw DataError(path + ": duplicate column_index " + std::to_string(*col));
        SnapshotMeta m{std::string(f[1]), std::string(f[2]), std::string(f[3]), SplitTag::train};
        if (f[4] == "train") {
            m.split = SplitTag::train;
        } else if (f[4] == "validate") {
            m.split = SplitTag::validate;
        } else {
            detail::parse_error(path, line.number, "split_tag must be train or validate, got '" + std::string(f[4]) + "'");
        }
        slot = std::move(m);
    }
    std::vector<SnapshotMeta> out;
    out.reserve(n_columns);
    for (std::size_t j = 0; j < n_columns; ++j) {
        if (!meta[j]) throw DataError(path + ": no metadata for column " + std::to_string(j));
        out.push_back(std::move(*meta[j]));
    }
    return out;
}

/// Default sidecar path: "<dir>/<stem>_meta.csv" next to the snapshot file.
inline std::string default_meta_path(const std::string& snapshots_path) {
    std::filesystem::path p(snapshots_path);
    return (p.parent_path() / (p.stem().string() + "_meta.csv")).string();
}

/// Loads a snapshot matrix whose rows are keyed by node_id. Rows may appear in any
/// order; the returned matrix follows the registry's row order.
inline SnapshotMatrix load_snapshot_matrix(const NodeRegistry& nodes, const std::string& snapshots_path,
                                           const std::string& meta_path) {
    const auto lines = csv::read_lines(snapshots_path);
    std::vector<std::optional<std::vector<double>>> rows(nodes.size());
    std::optional<std::size_t> width;
    bool first = true;
    for (const auto& line : lines) {
        const auto f = csv::split(line.text);
        if (first && detail::is_header(f, "node_id")) {
            first = false;
            continue;
        }
        first = false;
        if (f.size() < 2) detail::parse_error(snapshots_path, line.number, "expected node_id followed by values");
        const std::string id(f[0]);
        const auto row = nodes.find(id);
        if (!row) throw DataError(snapshots_path + ":" + std::to_string(line.number) + ": node '" + id + "' not in registry");
        if (rows[*row]) throw DataError(snapshots_path + ": duplicate row for node '" + id + "'");
        if (!width) width = f.size() - 1;
        if (f.size() - 1 != *width) {
            detail::parse_error(snapshots_path, line.number,
                                "expected " + std::to_string(*width) + " values, got " + std::to_string(f.size() - 1));
        }
        std::vector<double> v(*width);
        for (std::size_t k = 0; k < *width; ++k) {
            const auto d = csv::parse_double(f[k + 1]);
            if (!d) {
                detail::parse_error(snapshots_path, line.number,
                                    "bad number '" + std::string(f[k + 1]) + "' in column " + std::to_string(k));
            }
            if (!std::isfinite(*d)) {
                throw DataError(snapshots_path + ": non-finite value at row " + std::to_string(*row) + " (node '" + id +
                                "'), column " + std::to_string(k));
            }
            v[k] = *d;
        }
        rows[*row] = std::move(v);
    }
    if (!width) throw DataError(snapshots_path + ": no snapshot rows");
    Eigen::MatrixXd values(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(*width));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!rows[i]) throw DataError(snapshots_path + ": missing row for node '" + nodes.id(i) + "'");
        for (std::size_t k = 0; k < *width; ++k) values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*rows[i])[k];
    }
    return SnapshotMatrix(std::move(values), load_snapshot_meta(meta_path, *width));
}

inline std::pair<NodeRegistry, SnapshotMatrix> load_snapshots(const std::string& nodes_path,
                                                              const std::string& snapshots_path,
                                                              const std::optional<std::string>& meta_path = std::nullopt) {
    NodeRegistry nodes = load_nodes(nodes_path);
    SnapshotMatrix m = load_snapshot_matrix(nodes, snapshots_path, meta_path.value_or(default_meta_path(snapshots_path)));
    return {std::move(nodes), std::move(m)};
}

inline void write_nodes(const std::string& path, const NodeRegistry& nodes) {
    auto out = csv::open_output(path);
    out << "node_id,x,y\n";
    for (const auto& e : nodes.entries()) {
        out << e.node_id << ',' << csv::format_optional(e.x) << ',' << csv::format_optional(e.y) << '\n';
    }
}

inline void write_snapshots(const std::string& snapshots_path, const std::string& meta_path, const NodeRegistry& nodes,
                            const SnapshotMatrix& m) {
    if (nodes.size() != m.n_locations()) throw DataError("registry size does not match matrix rows");
    {
        auto out = csv::open_output(snapshots_path);
        out << "node_id";
        for (std::size_t j = 0; j < m.n_snapshots(); ++j) out << ",v_" << (j + 1);
        out << '\n';
        for (std::size_t i = 0; i < m.n_locations(); ++i) {
            out << nodes.id(i);
            for (std::size_t j = 0; j < m.n_snapshots(); ++j) {
                out << ',' << csv::format_double(m.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
            out << '\n';
        }
    }
    auto out = csv::open_output(meta_path);
    out << "column_index,scenario_id,event_id,target_node_id,split_tag\n";
    for (std::size_t j = 0; j < m.n_snapshots(); ++j) {
        const auto& md = m.meta()[j];
        out << j << ',' << md.scenario_id << ',' << md.event_id << ',' << md.target_node_id << ',' << to_string(md.split)
            << '\n';
    }
}

}  // namespace dss

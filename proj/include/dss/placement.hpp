#pragma once

// Sensor selection: greedy column-pivoted Householder QR on the transposed
// basis, plus the uniform random baseline.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dss/basis.hpp"
#include "dss/csv.hpp"
#include "dss/errors.hpp"
#include "dss/rng.hpp"

namespace dss {

struct SensorPlacement {
    enum class Source { optimal, random };

    std::vector<std::size_t> ordered_nodes;  // pivot order, most informative first
    Source source = Source::optimal;
    std::uint64_t seed = 0;         // random placements only
    std::uint64_t trial_index = 0;  // random placements only
    /// More sensors than basis modes; pivots past the rank are weakly determined.
    bool oversampled = false;

    std::size_t p() const noexcept { return ordered_nodes.size(); }
};

struct PivotedQR {
    Eigen::MatrixXd q_factor;  // r x r orthogonal
    Eigen::MatrixXd r_factor;  // r x n upper triangular
    std::vector<std::size_t> pivot_order;
};

/// Relative tolerance under which two residual norms count as tied; ties go to
/// the lowest column index.
inline constexpr double kPivotTieTolerance = 1e-12;

/// Column-pivoted Householder QR, A * P = Q * R.
///
/// At step k the pivot is the remaining column whose residual (its component
/// orthogonal to the k already chosen columns) has the largest Euclidean norm.
/// Residual norms are recomputed from the transformed trailing block at every step
/// rather than downdated, so the greedy choice is made on accurate values. A
/// candidate replaces the current best only when it exceeds it by more than
/// kPivotTieTolerance * max(best, largest initial column norm). Once the rows are
/// exhausted (k >= rows) every residual is zero and the remaining columns follow
/// in ascending index order.
inline PivotedQR pivoted_qr(const Eigen::MatrixXd& a) {
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();
    Eigen::MatrixXd w = a;
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(m, m);
    std::vector<std::size_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    double scale = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) scale = std::max(scale, w.col(j).norm());

    Eigen::VectorXd norms(n);
    std::vector<Eigen::Index> order;
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index j = k; j < n; ++j) norms[j] = k < m ? w.col(j).tail(m - k).norm() : 0.0;
        // Candidates are scanned in ascending original index so ties resolve to the lowest node.
        order.resize(static_cast<std::size_t>(n - k));
        std::iota(order.begin(), order.end(), k);
        std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
            return perm[static_cast<std::size_t>(x)] < perm[static_cast<std::size_t>(y)];
        });
        Eigen::Index best = order.front();
        for (const Eigen::Index j : order) {
            if (norms[j] > norms[best] + kPivotTieTolerance * std::max(norms[best], scale)) best = j;
        }
        if (best != k) {
            w.col(k).swap(w.col(best));
            std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(best)]);
        }
        if (k >= m) continue;

        // Householder reflector zeroing w(k+1:m, k).
        Eigen::VectorXd v = w.col(k).tail(m - k);
        const double alpha = v.norm();
        if (alpha == 0.0) continue;
        const double beta = v[0] >= 0.0 ? -alpha : alpha;
        v[0] -= beta;
        const double vnorm2 = v.squaredNorm();
        if (vnorm2 == 0.0) continue;
        const Eigen::VectorXd tau_v = v * (2.0 / vnorm2);
        auto trailing = w.bottomRightCorner(m - k, n - k);
        trailing.noalias() -= tau_v * (v.transpose() * trailing);
        w.col(k).tail(m - k - 1).setZero();
        w(k, k) = beta;
        auto qcols = q.rightCols(m - k);
        qcols.noalias() -= (qcols * v) * tau_v.transpose();
    }

    PivotedQR out;
    out.q_factor = std::move(q);
    out.r_factor = w.triangularView<Eigen::Upper>();
    out.pivot_order = std::move(perm);
    return out;
}

/// Optimal placement of p sensors: the first p pivots of the QR of psi_r^T.
inline std::pair<SensorPlacement, PivotedQR> select_sensors(const TailoredBasis& b, std::size_t p) {
    const std::size_t n = b.n_locations();
    if (b.r < 1) throw ConfigError("basis rank must be >= 1");
    if (p < 1 || p > n) {
        throw ConfigError("sensor count " + std::to_string(p) + " outside [1, " + std::to_string(n) + "]");
    }
    PivotedQR qr = pivoted_qr(b.psi_r.transpose());
    SensorPlacement s;
    s.ordered_nodes.assign(qr.pivot_order.begin(), qr.pivot_order.begin() + static_cast<std::ptrdiff_t>(p));
    s.source = SensorPlacement::Source::optimal;
    s.oversampled = p > static_cast<std::size_t>(b.r);
    return {std::move(s), std::move(qr)};
}

/// p distinct nodes drawn uniformly without replacement (partial Fisher-Yates),
/// keyed by (seed, trial_index).
inline SensorPlacement random_placement(std::size_t n_locations, std::size_t p, std::uint64_t seed,
                                        std::uint64_t trial_index) {
    if (p < 1 || p > n_locations) {
        throw ConfigError("sensor count " + std::to_string(p) + " outside [1, " + std::to_string(n_locations) + "]");
    }
    std::vector<std::size_t> idx(n_locations);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng::CounterStream stream(seed, rng::Domain::placement, trial_index);
    for (std::size_t k = 0; k < p; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(stream.below(n_locations - k));
        std::swap(idx[k], idx[j]);
    }
    idx.resize(p);
    SensorPlacement s;
    s.ordered_nodes = std::move(idx);
    s.source = SensorPlacement::Source::random;
    s.seed = seed;
    s.trial_index = trial_index;
    return s;
}

inline void write_placement(const std::string& path, const NodeRegistry& nodes, const SensorPlacement& s) {
    auto out = csv::open_output(path);
    out << "rank,node_id,row_index\n";
    for (std::size_t k = 0; k < s.p(); ++k) {
        out << (k + 1) << ',' << nodes.id(s.ordered_nodes[k]) << ',' << s.ordered_nodes[k] << '\n';
    }
}

}  // namespace dss

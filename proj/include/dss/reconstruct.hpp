#pragma once

// Coefficient estimation a_hat = (C psi_r)^+ y and full-state reconstruction
// x_hat = psi_r a_hat, including rank-deficient sensor sets.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dss/basis.hpp"
#include "dss/errors.hpp"
#include "dss/noise.hpp"
#include "dss/placement.hpp"
#include "dss/snapshot_store.hpp"

namespace dss {

inline constexpr double kDefaultRankTolerance = 1e-10;

struct MeasurementVector {
    Eigen::VectorXd values;
    std::vector<std::size_t> nodes;  // sensor rows, same order as values
    std::optional<std::size_t> snapshot_id;
};

struct ReconstructionResult {
    Eigen::VectorXd a_hat;
    Eigen::VectorXd x_hat;
    double condition_number = 1.0;  // of C psi_r over retained singular values
    bool rank_deficient = false;
};

inline MeasurementVector measure(const Eigen::VectorXd& x, const SensorPlacement& placement) {
    MeasurementVector y;
    y.values.resize(static_cast<Eigen::Index>(placement.p()));
    y.nodes = placement.ordered_nodes;
    for (std::size_t k = 0; k < placement.p(); ++k) {
        const auto row = placement.ordered_nodes[k];
        if (row >= static_cast<std::size_t>(x.size())) {
            throw DataError("placement index " + std::to_string(row) + " out of range for state of length " +
                            std::to_string(x.size()));
        }
        y.values[static_cast<Eigen::Index>(k)] = x[static_cast<Eigen::Index>(row)];
    }
    return y;
}

inline MeasurementVector apply_noise(MeasurementVector y, const NoiseSpec& spec, std::uint64_t snapshot_index) {
    apply_noise_in_place(y.values, spec, snapshot_index);
    return y;
}

/// Truncated-SVD pseudo-inverse with singular values below rel_tol * sigma_max dropped.
struct TruncatedPseudoInverse {
    Eigen::MatrixXd pinv;
    double condition_number = 1.0;
    bool rank_deficient = false;
    Eigen::Index retained = 0;
};

inline TruncatedPseudoInverse truncated_pinv(const Eigen::MatrixXd& a, double rel_tol) {
    TruncatedPseudoInverse out;
    out.pinv = Eigen::MatrixXd::Zero(a.cols(), a.rows());
    if (a.size() == 0) return out;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double smax = s.size() > 0 ? s[0] : 0.0;
    if (!(smax > 0.0)) {
        out.condition_number = std::numeric_limits<double>::infinity();
        out.rank_deficient = true;
        return out;
    }
    const double cutoff = rel_tol * smax;
    Eigen::Index k = 0;
    while (k < s.size() && s[k] > cutoff) ++k;
    out.retained = k;
    out.rank_deficient = k < s.size();
    out.condition_number = smax / s[k - 1];
    out.pinv.noalias() = svd.matrixV().leftCols(k) * s.head(k).cwiseInverse().asDiagonal() *
                         svd.matrixU().leftCols(k).transpose();
    return out;
}

/// Reconstruction operator for one fixed placement; reusable across snapshots.
class SparseReconstructor {
public:
    SparseReconstructor(const TailoredBasis& b, std::span<const std::size_t> nodes,
                        double rel_tol = kDefaultRankTolerance)
        : psi_(b.psi_r) {
        if (nodes.empty()) throw ConfigError("cannot reconstruct from zero sensors");
        Eigen::MatrixXd c_psi(static_cast<Eigen::Index>(nodes.size()), b.psi_r.cols());
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (nodes[k] >= b.n_locations()) {
                throw DataError("placement index " + std::to_string(nodes[k]) + " out of range for basis with " +
                                std::to_string(b.n_locations()) + " rows");
            }
            c_psi.row(static_cast<Eigen::Index>(k)) = b.psi_r.row(static_cast<Eigen::Index>(nodes[k]));
        }
        pinv_ = truncated_pinv(c_psi, rel_tol);
    }

    double condition_number() const noexcept { return pinv_.condition_number; }
    bool rank_deficient() const noexcept { return pinv_.rank_deficient; }
    const Eigen::MatrixXd& pseudo_inverse() const noexcept { return pinv_.pinv; }

    ReconstructionResult operator()(const Eigen::VectorXd& y) const {
        if (y.size() != pinv_.pinv.cols()) throw DataError("measurement length does not match placement");
        ReconstructionResult r;
        r.a_hat = pinv_.pinv * y;
        r.x_hat = psi_ * r.a_hat;
        r.condition_number = pinv_.condition_number;
        r.rank_deficient = pinv_.rank_deficient;
        return r;
    }

    /// Column-wise reconstruction of a p x m block of measurements.
    Eigen::MatrixXd reconstruct_columns(const Eigen::MatrixXd& y) const { return (psi_ * pinv_.pinv) * y; }

private:
    Eigen::MatrixXd psi_;
    TruncatedPseudoInverse pinv_;
};

inline ReconstructionResult reconstruct(const MeasurementVector& y, const TailoredBasis& b,
                                        double rel_tol = kDefaultRankTolerance) {
    if (y.values.size() == 0) throw ConfigError("cannot reconstruct from zero sensors");
    if (static_cast<std::size_t>(y.values.size()) != y.nodes.size()) {
        throw DataError("measurement vector length does not match its placement");
    }
    for (Eigen::Index k = 0; k < y.values.size(); ++k) {
        if (!std::isfinite(y.values[k])) throw DataError("non-finite measurement at position " + std::to_string(k));
    }
    return SparseReconstructor(b, y.nodes, rel_tol)(y.values);
}

struct BatchItem {
    std::size_t snapshot_id;  // source column index
    Eigen::VectorXd truth;
    ReconstructionResult result;
};

/// Measure, optionally perturb, and reconstruct every validation column in order.
inline std::vector<BatchItem> reconstruct_batch(const SnapshotMatrix& validate, const TailoredBasis& b,
                                                const SensorPlacement& placement,
                                                const std::optional<NoiseSpec>& noise = std::nullopt,
                                                double rel_tol = kDefaultRankTolerance) {
    if (validate.n_locations() != b.n_locations()) {
        throw DataError("validation matrix rows do not match basis rows");
    }
    const SparseReconstructor rec(b, placement.ordered_nodes, rel_tol);
    std::vector<BatchItem> out;
    out.reserve(validate.n_snapshots());
    for (std::size_t j = 0; j < validate.n_snapshots(); ++j) {
        BatchItem item;
        item.snapshot_id = validate.source_columns()[j];
        item.truth = validate.values().col(static_cast<Eigen::Index>(j));
        auto y = measure(item.truth, placement);
        if (noise) apply_noise_in_place(y.values, *noise, item.snapshot_id);
        item.result = rec(y.values);
        out.push_back(std::move(item));
    }
    return out;
}

}  // namespace dss

#pragma once

// Scoring and failure diagnostics: Nash-Sutcliffe efficiency, relative projection
// residuals of lost sensors, line fits and per-node confidence summaries.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dss/basis.hpp"
#include "dss/errors.hpp"
#include "dss/placement.hpp"
#include "dss/reconstruct.hpp"

namespace dss {

enum class NseAxis { spatial, per_node };

/// value is nullopt when the truth series is constant.
struct NseScore {
    std::optional<double> value;
    NseAxis axis = NseAxis::spatial;

    bool defined() const noexcept { return value.has_value(); }
};

/// NSE = 1 - sum (t_i - e_i)^2 / sum (t_i - mean(t))^2.
template <typename Truth, typename Estimate>
NseScore nse(const Eigen::MatrixBase<Truth>& truth, const Eigen::MatrixBase<Estimate>& estimate,
             NseAxis axis = NseAxis::spatial) {
    if (truth.size() != estimate.size()) {
        throw DataError("nse: length mismatch (" + std::to_string(truth.size()) + " vs " +
                        std::to_string(estimate.size()) + ")");
    }
    if (truth.size() < 2) throw DataError("nse: need at least 2 values");
    const double mean = truth.mean();
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        const double t = truth.derived().coeff(i);
        const double e = estimate.derived().coeff(i);
        num += (t - e) * (t - e);
        den += (t - mean) * (t - mean);
    }
    NseScore s;
    s.axis = axis;
    if (den > 0.0) s.value = 1.0 - num / den;
    return s;
}

inline NseScore nse(std::span<const double> truth, std::span<const double> estimate,
                    NseAxis axis = NseAxis::spatial) {
    const Eigen::Map<const Eigen::VectorXd> t(truth.data(), static_cast<Eigen::Index>(truth.size()));
    const Eigen::Map<const Eigen::VectorXd> e(estimate.data(), static_cast<Eigen::Index>(estimate.size()));
    return nse(t, e, axis);
}

/// Spatial NSE for every column of a truth block, with the per-column
/// denominators computed once. Used by the Monte Carlo loops.
class SpatialNseScorer {
public:
    explicit SpatialNseScorer(const Eigen::MatrixXd& truth) : truth_(truth), den_(truth.cols()) {
        if (truth.rows() < 2) throw DataError("nse: need at least 2 locations");
        for (Eigen::Index j = 0; j < truth.cols(); ++j) {
            const double mean = truth.col(j).mean();
            double d = 0.0;
            for (Eigen::Index i = 0; i < truth.rows(); ++i) d += (truth(i, j) - mean) * (truth(i, j) - mean);
            den_[j] = d;
        }
    }

    std::optional<double> score(Eigen::Index column, const Eigen::Ref<const Eigen::VectorXd>& estimate) const {
        if (!(den_[column] > 0.0)) return std::nullopt;
        return 1.0 - (truth_.col(column) - estimate).squaredNorm() / den_[column];
    }

    const Eigen::MatrixXd& truth() const noexcept { return truth_; }

private:
    const Eigen::MatrixXd& truth_;
    Eigen::VectorXd den_;
};

// ---------------------------------------------------------------------------
// Relative projection residual

struct RprRow {
    std::size_t lost_node = 0;     // row index of the lost sensor
    std::size_t lost_rank = 0;     // position in the placement's pivot order
    std::optional<double> rpr;     // nullopt when the lost row is zero
    std::optional<double> pr;
    std::size_t placement_size = 0;

    /// Report-side value, clamped into [0, 1].
    std::optional<double> rpr_clamped() const {
        if (!rpr) return std::nullopt;
        return std::clamp(*rpr, 0.0, 1.0);
    }
};

/// Projection residual of the lost sensor's basis row against the row space of
/// the remaining sensors' rows. The projector is built from the right singular
/// vectors of the remaining rows whose singular values survive rel_tol, which
/// equals Phi^T (Phi Phi^T)^-1 Phi whenever Phi has full row rank.
inline RprRow rpr(const TailoredBasis& b, const SensorPlacement& placement, std::size_t lost_index,
                  double rel_tol = kDefaultRankTolerance) {
    const std::size_t p = placement.p();
    if (p < 2) throw ConfigError("rpr requires a placement of at least 2 sensors");
    if (lost_index >= p) {
        throw ConfigError("lost sensor position " + std::to_string(lost_index) + " not in placement of size " +
                          std::to_string(p));
    }
    for (auto row : placement.ordered_nodes) {
        if (row >= b.n_locations()) throw DataError("placement index out of range for basis");
    }
    RprRow out;
    out.lost_node = placement.ordered_nodes[lost_index];
    out.lost_rank = lost_index;
    out.placement_size = p;

    const Eigen::VectorXd x = b.psi_r.row(static_cast<Eigen::Index>(out.lost_node)).transpose();
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(p - 1), b.psi_r.cols());
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < p; ++i) {
        if (i == lost_index) continue;
        phi.row(k++) = b.psi_r.row(static_cast<Eigen::Index>(placement.ordered_nodes[i]));
    }

    const double xnorm = x.norm();
    if (!(xnorm > 0.0)) return out;

    Eigen::VectorXd projected = Eigen::VectorXd::Zero(x.size());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi, Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s.size() > 0 && s[0] > 0.0) {
        Eigen::Index kept = 0;
        while (kept < s.size() && s[kept] > rel_tol * s[0]) ++kept;
        const auto v = svd.matrixV().leftCols(kept);
        projected = v * (v.transpose() * x);
    }
    const double residual = std::min((x - projected).norm(), xnorm);
    out.pr = residual;
    out.rpr = residual / xnorm;
    return out;
}

// ---------------------------------------------------------------------------
// Ordinary least squares line

struct LineFit {
    std::size_t n = 0;
    std::optional<double> slope;
    std::optional<double> intercept;
    std::optional<double> r_squared;  // nullopt when either variable is constant
};

/// Fits y = slope * x + intercept. Degenerate when every x is equal.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("fit_line: length mismatch");
    if (x.size() < 2) throw DataError("fit_line: need at least 2 points");
    LineFit f;
    f.n = x.size();
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) return f;
    f.slope = sxy / sxx;
    f.intercept = my - *f.slope * mx;
    if (syy > 0.0) f.r_squared = (sxy * sxy) / (sxx * syy);
    return f;
}

// ---------------------------------------------------------------------------
// Per-node mean and 95% interval across snapshots

struct MeanInterval {
    double mean = 0.0;
    double sd = 0.0;          // sample standard deviation
    double half_width = 0.0;  // 1.96 * sd / sqrt(m)
};

struct NodeSummary {
    std::size_t row = 0;
    MeanInterval truth;
    MeanInterval reconstruction;
};

inline MeanInterval mean_interval(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
    if (v.size() < 2) throw DataError("mean_interval: need at least 2 samples");
    MeanInterval mi;
    const double m = static_cast<double>(v.size());
    mi.mean = v.mean();
    mi.sd = std::sqrt((v.array() - mi.mean).square().sum() / (m - 1.0));
    mi.half_width = 1.96 * mi.sd / std::sqrt(m);
    return mi;
}

/// truth and reconstruction are n_locations x m blocks (one column per snapshot).
inline std::vector<NodeSummary> per_node_summary(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& reconstruction) {
    if (truth.rows() != reconstruction.rows() || truth.cols() != reconstruction.cols()) {
        throw DataError("per_node_summary: shape mismatch");
    }
    if (truth.cols() < 2) throw DataError("per_node_summary: need at least 2 snapshots");
    std::vector<NodeSummary> out(static_cast<std::size_t>(truth.rows()));
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
        auto& s = out[static_cast<std::size_t>(i)];
        s.row = static_cast<std::size_t>(i);
        s.truth = mean_interval(truth.row(i));
        s.reconstruction = mean_interval(reconstruction.row(i));
    }
    return out;
}

inline std::vector<NodeSummary> per_node_summary(std::span<const BatchItem> results) {
    if (results.size() < 2) throw DataError("per_node_summary: need at least 2 snapshots");
    const auto n = results.front().truth.size();
    Eigen::MatrixXd t(n, static_cast<Eigen::Index>(results.size()));
    Eigen::MatrixXd r(n, static_cast<Eigen::Index>(results.size()));
    for (std::size_t j = 0; j < results.size(); ++j) {
        t.col(static_cast<Eigen::Index>(j)) = results[j].truth;
        r.col(static_cast<Eigen::Index>(j)) = results[j].result.x_hat;
    }
    return per_node_summary(t, r);
}

}  // namespace dss

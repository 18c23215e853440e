#pragma once

// Tailored orthonormal basis: thin SVD of the (uncentered) training matrix,
// truncated to rank r.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dss/csv.hpp"
#include "dss/errors.hpp"
#include "dss/snapshot_store.hpp"

namespace dss {

/// How the truncation rank r is chosen.
class RankPolicy {
public:
    enum class Mode { fixed, match_sensor_count, energy_fraction };

    static RankPolicy fixed(int r) {
        if (r < 1) throw ConfigError("fixed rank must be >= 1, got " + std::to_string(r));
        return RankPolicy(Mode::fixed, r, 1.0);
    }
    static RankPolicy match_sensor_count() { return RankPolicy(Mode::match_sensor_count, 0, 1.0); }
    static RankPolicy energy_fraction(double f) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("energy fraction must lie in (0, 1], got " + csv::format_double(f));
        return RankPolicy(Mode::energy_fraction, 0, f);
    }

    /// Accepts "match_sensor_count", "fixed:R" and "energy:F".
    static RankPolicy parse(const std::string& s) {
        if (s == "match_sensor_count") return match_sensor_count();
        if (s.rfind("fixed:", 0) == 0) {
            const auto r = csv::parse_int(std::string_view(s).substr(6));
            if (!r) throw ConfigError("bad rank policy '" + s + "'");
            return fixed(static_cast<int>(*r));
        }
        if (s.rfind("energy:", 0) == 0) {
            const auto f = csv::parse_double(std::string_view(s).substr(7));
            if (!f) throw ConfigError("bad rank policy '" + s + "'");
            return energy_fraction(*f);
        }
        throw ConfigError("unknown rank policy '" + s + "' (expected match_sensor_count, fixed:R or energy:F)");
    }

    Mode mode() const noexcept { return mode_; }
    int rank() const noexcept { return rank_; }
    double fraction() const noexcept { return fraction_; }

    std::string to_string() const {
        switch (mode_) {
            case Mode::fixed: return "fixed:" + std::to_string(rank_);
            case Mode::match_sensor_count: return "match_sensor_count";
            case Mode::energy_fraction: return "energy:" + csv::format_double(fraction_);
        }
        return {};
    }

private:
    RankPolicy(Mode m, int r, double f) : mode_(m), rank_(r), fraction_(f) {}
    Mode mode_;
    int rank_;
    double fraction_;
};

struct TailoredBasis {
    Eigen::MatrixXd psi_r;            // n_locations x r, orthonormal columns
    Eigen::VectorXd singular_values;  // all min(n, m) values, non-increasing
    int r = 0;
    Eigen::MatrixXd right_vectors_t;  // r x n_train
    /// sigma_r and sigma_{r+1} agree within relative 1e-10, so truncation is ill-defined.
    bool truncation_tie = false;

    std::size_t n_locations() const noexcept { return static_cast<std::size_t>(psi_r.rows()); }
};

/// Cumulative energy fractions sum_{i<=k} sigma_i^2 / sum_i sigma_i^2.
inline std::vector<double> energy_spectrum(const Eigen::VectorXd& sigma) {
    std::vector<double> out(static_cast<std::size_t>(sigma.size()), 0.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        acc += sigma[i] * sigma[i];
        out[static_cast<std::size_t>(i)] = acc;
    }
    if (acc > 0.0) {
        for (auto& v : out) v /= acc;
    }
    return out;
}

inline std::vector<double> energy_spectrum(const TailoredBasis& b) { return energy_spectrum(b.singular_values); }

/// Full thin SVD of a training matrix with canonical column signs. Truncations
/// at different ranks share the one decomposition.
class SnapshotSvd {
public:
    explicit SnapshotSvd(const Eigen::MatrixXd& x) {
        if (x.rows() < 1 || x.cols() < 1) throw DataError("training matrix is empty");
        Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
        u_ = svd.matrixU();
        v_ = svd.matrixV();
        sigma_ = svd.singularValues();
        if (sigma_.size() == 0 || !(sigma_[0] > 0.0)) throw DataError("training matrix is all zeros; no basis exists");

        // Flip each left vector so that its largest-magnitude entry (lowest index on ties) is positive.
        for (Eigen::Index k = 0; k < u_.cols(); ++k) {
            Eigen::Index arg = 0;
            double best = -1.0;
            for (Eigen::Index i = 0; i < u_.rows(); ++i) {
                if (std::abs(u_(i, k)) > best) {
                    best = std::abs(u_(i, k));
                    arg = i;
                }
            }
            if (u_(arg, k) < 0.0) {
                u_.col(k) *= -1.0;
                v_.col(k) *= -1.0;
            }
        }
    }

    const Eigen::VectorXd& singular_values() const noexcept { return sigma_; }
    int max_rank() const noexcept { return static_cast<int>(sigma_.size()); }

    int resolve_rank(const RankPolicy& policy, std::optional<int> sensor_count) const {
        int r = 0;
        switch (policy.mode()) {
            case RankPolicy::Mode::fixed:
                r = policy.rank();
                break;
            case RankPolicy::Mode::match_sensor_count:
                if (!sensor_count) throw ConfigError("rank policy match_sensor_count requires a sensor count");
                r = *sensor_count;
                break;
            case RankPolicy::Mode::energy_fraction: {
                const auto e = energy_spectrum(sigma_);
                r = static_cast<int>(e.size());
                for (std::size_t k = 0; k < e.size(); ++k) {
                    if (e[k] >= policy.fraction()) {
                        r = static_cast<int>(k) + 1;
                        break;
                    }
                }
                break;
            }
        }
        if (r < 1 || r > max_rank()) {
            throw ConfigError("resolved rank " + std::to_string(r) + " outside [1, " + std::to_string(max_rank()) +
                              "] = [1, min(n_locations, n_train_snapshots)]");
        }
        return r;
    }

    TailoredBasis truncate(int r) const {
        if (r < 1 || r > max_rank()) throw ConfigError("rank " + std::to_string(r) + " out of range");
        TailoredBasis b;
        b.r = r;
        b.psi_r = u_.leftCols(r);
        b.singular_values = sigma_;
        b.right_vectors_t = v_.leftCols(r).transpose();
        if (r < max_rank()) {
            const double a = sigma_[r - 1];
            const double c = sigma_[r];
            b.truncation_tie = (a - c) <= 1e-10 * a;
        }
        const double dev = (b.psi_r.transpose() * b.psi_r - Eigen::MatrixXd::Identity(r, r)).norm();
        if (!(dev <= 1e-10)) {
            throw NumericalError("basis columns not orthonormal (deviation " + csv::format_double(dev) + ")");
        }
        return b;
    }

    TailoredBasis truncate(const RankPolicy& policy, std::optional<int> sensor_count) const {
        return truncate(resolve_rank(policy, sensor_count));
    }

private:
    Eigen::MatrixXd u_;
    Eigen::MatrixXd v_;
    Eigen::VectorXd sigma_;
};

inline TailoredBasis fit_basis(const Eigen::MatrixXd& train, const RankPolicy& policy,
                               std::optional<int> sensor_count = std::nullopt) {
    return SnapshotSvd(train).truncate(policy, sensor_count);
}

inline TailoredBasis fit_basis(const SnapshotMatrix& train, const RankPolicy& policy,
                               std::optional<int> sensor_count = std::nullopt) {
    return fit_basis(train.values(), policy, sensor_count);
}

/// Writes the basis (node_id, mode_1..mode_r) and a sidecar singular value table.
inline void write_basis(const std::string& basis_path, const std::string& sigma_path, const NodeRegistry& nodes,
                        const TailoredBasis& b) {
    {
        auto out = csv::open_output(basis_path);
        out << "node_id";
        for (int k = 0; k < b.r; ++k) out << ",mode_" << (k + 1);
        out << '\n';
        for (std::size_t i = 0; i < b.n_locations(); ++i) {
            out << nodes.id(i);
            for (int k = 0; k < b.r; ++k) out << ',' << csv::format_double(b.psi_r(static_cast<Eigen::Index>(i), k));
            out << '\n';
        }
    }
    auto out = csv::open_output(sigma_path);
    out << "index,singular_value,cumulative_energy\n";
    const auto e = energy_spectrum(b);
    for (Eigen::Index k = 0; k < b.singular_values.size(); ++k) {
        out << (k + 1) << ',' << csv::format_double(b.singular_values[k]) << ','
            << csv::format_double(e[static_cast<std::size_t>(k)]) << '\n';
    }
}

}  // namespace dss

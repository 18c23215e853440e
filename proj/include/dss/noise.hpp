#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "dss/csv.hpp"
#include "dss/errors.hpp"
#include "dss/rng.hpp"

namespace dss {

/// Multiplicative uniform measurement noise: y_k <- y_k * (1 + u), u ~ U[-epsilon, +epsilon].
struct NoiseSpec {
    double epsilon = 0.0;
    std::uint64_t seed = 0;

    NoiseSpec() = default;
    NoiseSpec(double eps, std::uint64_t s) : epsilon(eps), seed(s) {
        if (!(eps >= 0.0)) throw ConfigError("noise epsilon must be >= 0, got " + csv::format_double(eps));
    }
};

/// Relative perturbation for measurement k of snapshot snapshot_index. The
/// uniform draw does not depend on epsilon, so noise levels sharing a seed are
/// scaled copies of each other.
inline double noise_factor(const NoiseSpec& spec, std::uint64_t snapshot_index, std::uint64_t k) {
    const double u = rng::to_unit(rng::counter_hash(spec.seed, rng::Domain::noise, snapshot_index, k));
    return spec.epsilon * (2.0 * u - 1.0);
}

inline void apply_noise_in_place(Eigen::Ref<Eigen::VectorXd> values, const NoiseSpec& spec,
                                 std::uint64_t snapshot_index) {
    if (spec.epsilon == 0.0) return;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        values[k] *= 1.0 + noise_factor(spec, snapshot_index, static_cast<std::uint64_t>(k));
    }
}

}  // namespace dss

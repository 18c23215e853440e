#pragma once

// Low-rank synthetic snapshot fixtures: X = Psi* A + eta, with Psi* a random
// orthonormal n x r matrix, geometrically decaying mode amplitudes, and optional
// Gaussian noise scaled to the RMS of the clean signal.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dss/errors.hpp"
#include "dss/rng.hpp"
#include "dss/snapshot_store.hpp"

namespace dss {

struct SynthSpec {
    std::size_t n_locations = 77;
    std::size_t n_snapshots = 1250;
    std::size_t n_validate = 250;  // trailing columns tagged validate
    std::size_t rank = 3;
    double noise = 0.0;  // eta standard deviation relative to the clean RMS
    double decay = 0.5;  // amplitude ratio between consecutive modes
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    NodeRegistry nodes;
    SnapshotMatrix snapshots;
    Eigen::MatrixXd true_basis;  // Psi*, n x rank
};

inline SyntheticDataset make_synthetic(const SynthSpec& spec) {
    if (spec.n_locations < 2) throw ConfigError("synth: need at least 2 locations");
    if (spec.rank < 1 || spec.rank > spec.n_locations) throw ConfigError("synth: rank must lie in [1, n_locations]");
    if (spec.n_validate < 1 || spec.n_validate >= spec.n_snapshots) {
        throw ConfigError("synth: n_validate must lie in [1, n_snapshots - 1]");
    }
    if (!(spec.noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");

    const auto n = static_cast<Eigen::Index>(spec.n_locations);
    const auto m = static_cast<Eigen::Index>(spec.n_snapshots);
    const auto r = static_cast<Eigen::Index>(spec.rank);

    rng::CounterStream basis_stream(spec.seed, rng::Domain::synth, 0);
    Eigen::MatrixXd g(n, r);
    for (Eigen::Index j = 0; j < r; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) g(i, j) = basis_stream.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd psi = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
    const Eigen::MatrixXd rr = qr.matrixQR().topLeftCorner(r, r);
    for (Eigen::Index j = 0; j < r; ++j) {
        if (rr(j, j) < 0.0) psi.col(j) *= -1.0;
    }

    rng::CounterStream coef_stream(spec.seed, rng::Domain::synth, 1);
    Eigen::MatrixXd a(r, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double amp = 10.0;
        for (Eigen::Index k = 0; k < r; ++k) {
            a(k, j) = amp * coef_stream.normal();
            amp *= spec.decay;
        }
    }
    Eigen::MatrixXd x = psi * a;
    if (spec.noise > 0.0) {
        const double rms = std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
        rng::CounterStream noise_stream(spec.seed, rng::Domain::synth, 2);
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) x(i, j) += spec.noise * rms * noise_stream.normal();
        }
    }

    auto nodes = NodeRegistry::numbered(spec.n_locations);
    std::vector<SnapshotMeta> meta(spec.n_snapshots);
    const std::size_t n_train = spec.n_snapshots - spec.n_validate;
    constexpr std::size_t kTargets = 5;
    for (std::size_t j = 0; j < spec.n_snapshots; ++j) {
        auto& md = meta[j];
        md.scenario_id = "S" + std::to_string(j / kTargets);
        md.event_id = (j < n_train ? "train_E" : "validate_E") + std::to_string((j / kTargets) % 10);
        md.target_node_id = nodes.id((j % kTargets) * (spec.n_locations / kTargets) % spec.n_locations);
        md.split = j < n_train ? SplitTag::train : SplitTag::validate;
    }
    SnapshotMatrix sm(std::move(x), std::move(meta));
    return SyntheticDataset{std::move(nodes), std::move(sm), std::move(psi)};
}

}  // namespace dss

#include <gtest/gtest.h>

#include <Eigen/QR>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "dss/placement.hpp"
#include "test_util.hpp"

namespace {

dss::TailoredBasis basis_from_transpose(const Eigen::MatrixXd& psi_t) {
    dss::TailoredBasis b;
    b.psi_r = psi_t.transpose();
    b.r = static_cast<int>(psi_t.rows());
    return b;
}

/// Greedy max-residual ordering computed independently of the Householder path:
/// each candidate's residual is measured against a least-squares projection onto
/// the already chosen columns (complete orthogonal decomposition).
std::vector<std::size_t> greedy_oracle(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.cols();
    double scale = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) scale = std::max(scale, a.col(j).norm());
    std::vector<std::size_t> chosen;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Eigen::Index step = 0; step < n; ++step) {
        Eigen::MatrixXd s(a.rows(), static_cast<Eigen::Index>(chosen.size()));
        for (std::size_t c = 0; c < chosen.size(); ++c) s.col(static_cast<Eigen::Index>(c)) = a.col(static_cast<Eigen::Index>(chosen[c]));
        std::optional<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> cod;
        if (!chosen.empty()) cod.emplace(s);
        long best = -1;
        double best_norm = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            Eigen::VectorXd resid = a.col(j);
            if (cod) resid -= s * cod->solve(a.col(j));
            const double norm = resid.norm();
            if (best < 0 || norm > best_norm + dss::kPivotTieTolerance * std::max(best_norm, scale)) {
                best = j;
                best_norm = norm;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        chosen.push_back(static_cast<std::size_t>(best));
    }
    return chosen;
}

bool is_permutation_of_range(const std::vector<std::size_t>& v, std::size_t n) {
    std::vector<std::size_t> s = v;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] != i) return false;
    return s.size() == n;
}

}  // namespace

TEST(Placement, TwoModeExample) {
    Eigen::MatrixXd pt(2, 3);
    pt << 1, 0, 0, 0, 0.5, 0;
    const auto [s, qr] = dss::select_sensors(basis_from_transpose(pt), 2);
    EXPECT_EQ(s.ordered_nodes, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(greedy_oracle(pt), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(qr.pivot_order, greedy_oracle(pt));
}

TEST(Placement, IdentityTieBreaksToLowestIndex) {
    const auto [s, qr] = dss::select_sensors(basis_from_transpose(Eigen::MatrixXd::Identity(3, 3)), 3);
    EXPECT_EQ(s.ordered_nodes, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_FALSE(s.oversampled);
}

TEST(Placement, PivotOrderMatchesBruteForceGreedy) {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index r = 2 + static_cast<Eigen::Index>(gen() % 4);   // 2..5
        const Eigen::Index n = 4 + static_cast<Eigen::Index>(gen() % 7);   // 4..10
        const Eigen::MatrixXd a = dss::testing::random_matrix(gen, r, n);
        const auto qr = dss::pivoted_qr(a);
        ASSERT_EQ(qr.pivot_order, greedy_oracle(a)) << "trial " << trial;
    }
}

TEST(Placement, QrFactorInvariants) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index r = 1 + static_cast<Eigen::Index>(gen() % 6);
        const Eigen::Index n = r + static_cast<Eigen::Index>(gen() % 10);
        const Eigen::MatrixXd psi = dss::testing::random_orthonormal(gen, n, r);
        const Eigen::MatrixXd a = psi.transpose();
        const auto qr = dss::pivoted_qr(a);
        ASSERT_TRUE(is_permutation_of_range(qr.pivot_order, static_cast<std::size_t>(n)));
        Eigen::MatrixXd ap(r, n);
        for (Eigen::Index j = 0; j < n; ++j) ap.col(j) = a.col(static_cast<Eigen::Index>(qr.pivot_order[j]));
        EXPECT_LE((qr.q_factor * qr.r_factor - ap).norm(), 1e-10);
        EXPECT_LE((qr.q_factor.transpose() * qr.q_factor - Eigen::MatrixXd::Identity(r, r)).norm(), 1e-12);
        EXPECT_EQ((qr.r_factor - Eigen::MatrixXd(qr.r_factor.triangularView<Eigen::Upper>())).norm(), 0.0);
        for (Eigen::Index k = 1; k < r; ++k) {
            EXPECT_LE(std::abs(qr.r_factor(k, k)), std::abs(qr.r_factor(k - 1, k - 1)) * (1 + 1e-12) + 1e-14);
        }
        // First pivot is the lowest-index column of largest Euclidean norm.
        const Eigen::RowVectorXd norms = a.colwise().norm();
        const double top = norms.maxCoeff();
        Eigen::Index arg = 0;
        while (norms[arg] < top - dss::kPivotTieTolerance * top) ++arg;
        EXPECT_EQ(qr.pivot_order[0], static_cast<std::size_t>(arg));
    }
}

TEST(Placement, OversampledAndErrors) {
    std::mt19937_64 gen(11);
    const auto b = basis_from_transpose(dss::testing::random_orthonormal(gen, 8, 2).transpose());
    const auto [s, qr] = dss::select_sensors(b, 5);
    EXPECT_TRUE(s.oversampled);
    EXPECT_EQ(s.p(), 5u);
    std::set<std::size_t> uniq(s.ordered_nodes.begin(), s.ordered_nodes.end());
    EXPECT_EQ(uniq.size(), 5u);
    // Pivots past the rank follow ascending index among the remaining columns.
    std::vector<std::size_t> tail(qr.pivot_order.begin() + 2, qr.pivot_order.end());
    EXPECT_TRUE(std::is_sorted(tail.begin(), tail.end()));
    EXPECT_THROW(dss::select_sensors(b, 9), dss::ConfigError);
    EXPECT_THROW(dss::select_sensors(b, 0), dss::ConfigError);
}

// Placements for different p need not be nested; each must be valid on its own.
TEST(Placement, EachSweepPlacementIsValid) {
    std::mt19937_64 gen(17);
    const Eigen::MatrixXd x = dss::testing::random_matrix(gen, 30, 40);
    const dss::SnapshotSvd svd(x);
    for (int p = 1; p <= 10; ++p) {
        const auto b = svd.truncate(dss::RankPolicy::match_sensor_count(), p);
        const auto [s, qr] = dss::select_sensors(b, static_cast<std::size_t>(p));
        std::set<std::size_t> uniq(s.ordered_nodes.begin(), s.ordered_nodes.end());
        EXPECT_EQ(uniq.size(), static_cast<std::size_t>(p));
        for (auto i : s.ordered_nodes) EXPECT_LT(i, 30u);
    }
}

TEST(RandomPlacement, FullDrawIsPermutation) {
    const auto s = dss::random_placement(12, 12, 5, 3);
    EXPECT_TRUE(is_permutation_of_range(s.ordered_nodes, 12));
    EXPECT_EQ(s.source, dss::SensorPlacement::Source::random);
}

TEST(RandomPlacement, DeterministicPerKey) {
    const auto a = dss::random_placement(77, 5, 1, 0);
    const auto b = dss::random_placement(77, 5, 1, 0);
    const auto c = dss::random_placement(77, 5, 1, 1);
    EXPECT_EQ(a.ordered_nodes, b.ordered_nodes);
    EXPECT_NE(a.ordered_nodes, c.ordered_nodes);
    std::set<std::size_t> uniq(a.ordered_nodes.begin(), a.ordered_nodes.end());
    EXPECT_EQ(uniq.size(), 5u);
    EXPECT_THROW(dss::random_placement(5, 6, 1, 0), dss::ConfigError);
}

// 100,000 single-sensor draws on 77 nodes: the binomial sd of each frequency is
// sqrt((1/77)(76/77)/1e5) = 3.6e-4, so +/-0.004 is roughly an 11-sigma band.
TEST(RandomPlacement, UniformFrequencies) {
    constexpr std::size_t n = 77;
    constexpr std::size_t trials = 100000;
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t t = 0; t < trials; ++t) ++counts[dss::random_placement(n, 1, 42, t).ordered_nodes[0]];
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(static_cast<double>(counts[i]) / trials, 1.0 / n, 0.004) << "node " << i;
    }
}

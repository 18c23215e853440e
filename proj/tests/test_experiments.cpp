#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "dss/experiments.hpp"
#include "dss/synth.hpp"
#include "test_util.hpp"

namespace {

dss::DataSplit synthetic_split(std::size_t n, std::size_t m, std::size_t m_val, std::size_t rank, double noise,
                               std::uint64_t seed = 11) {
    dss::SynthSpec s;
    s.n_locations = n;
    s.n_snapshots = m;
    s.n_validate = m_val;
    s.rank = rank;
    s.noise = noise;
    s.seed = seed;
    return dss::split_by_tag(dss::make_synthetic(s).snapshots);
}

dss::SnapshotMatrix tagged(Eigen::MatrixXd x, dss::SplitTag tag) {
    std::vector<dss::SnapshotMeta> meta(static_cast<std::size_t>(x.cols()), dss::SnapshotMeta{"s", "e", "t", tag});
    return dss::SnapshotMatrix(std::move(x), std::move(meta));
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::memcmp(&*a, &*b, sizeof(double)) == 0;
}

bool same(const dss::Summary& a, const dss::Summary& b) {
    return a.count == b.count && a.undefined == b.undefined && same(a.p25, b.p25) && same(a.p50, b.p50) &&
           same(a.p75, b.p75) && same(a.mean, b.mean) && same(a.min, b.min) && same(a.max, b.max);
}

}  // namespace

TEST(Experiments, FullSamplingIsExact) {
    const auto split = synthetic_split(12, 200, 20, 3, 0.0);
    dss::ExperimentConfig cfg;
    dss::ExperimentContext ctx(split, cfg);
    const auto placement = ctx.optimal_placement(12);
    EXPECT_EQ(placement.r, 12);
    const auto scores = ctx.score_columns(ctx.basis_for(12), placement.nodes);
    for (const auto& s : scores.nse) {
        ASSERT_TRUE(s.has_value());
        EXPECT_NEAR(*s, 1.0, 1e-10);
    }
}

TEST(Experiments, OptimalBeatsRandomAtMedian) {
    const auto split = synthetic_split(30, 400, 60, 3, 0.05);
    dss::ExperimentConfig cfg;
    cfg.policy = dss::RankPolicy::fixed(3);
    cfg.p_range = {3, 4};
    cfg.trials = 200;
    cfg.seed = 5;
    dss::ExperimentContext ctx(split, cfg);
    const auto sec = dss::experiment_random_vs_optimal(ctx);
    EXPECT_EQ(sec.percentile_method, "exact");
    ASSERT_EQ(sec.per_p.size(), 2u);
    for (const auto& c : sec.per_p) {
        EXPECT_GE(*c.optimal.summary.p50, *c.random.p50) << "p=" << c.p;
        EXPECT_EQ(c.random.count + c.random.undefined, cfg.trials * 60);
        EXPECT_LE(*c.random.p25, *c.random.p50);
        EXPECT_LE(*c.random.p50, *c.random.p75);
    }
    EXPECT_GE(*sec.pooled_optimal.p50, *sec.pooled_random.p50);
}

TEST(Experiments, NoiseDegradesEveryColumn) {
    const auto split = synthetic_split(20, 300, 30, 3, 0.0);
    dss::ExperimentConfig cfg;
    cfg.p_range = {3};
    cfg.noise_levels = {0.05, 0.15};
    cfg.seed = 8;
    dss::ExperimentContext ctx(split, cfg);
    const auto sweep = dss::experiment_sensor_sweep(ctx);
    ASSERT_EQ(sweep.noise_levels, (std::vector<double>{0.0, 0.05, 0.15}));
    ASSERT_EQ(sweep.entries.size(), 3u);
    for (std::size_t j = 0; j < 30; ++j) {
        const double a = *sweep.entries[0].scores.nse[j];
        const double b = *sweep.entries[1].scores.nse[j];
        const double c = *sweep.entries[2].scores.nse[j];
        EXPECT_NEAR(a, 1.0, 1e-9);
        EXPECT_LT(b, a + 1e-12);
        EXPECT_LT(c, b);
    }
    const auto again = dss::experiment_sensor_sweep(ctx);
    for (std::size_t e = 0; e < 3; ++e) EXPECT_TRUE(same(again.entries[e].scores.summary, sweep.entries[e].scores.summary));
}

TEST(Experiments, OversamplingHelpsWithFixedRank) {
    const auto split = synthetic_split(40, 400, 50, 3, 0.1);
    dss::ExperimentConfig cfg;
    cfg.policy = dss::RankPolicy::fixed(3);
    cfg.p_range = {3, 8};
    cfg.noise_levels = {};
    dss::ExperimentContext ctx(split, cfg);
    const auto sweep = dss::experiment_sensor_sweep(ctx);
    ASSERT_EQ(sweep.entries.size(), 2u);
    EXPECT_TRUE(sweep.entries[1].placement.oversampled);
    EXPECT_GE(*sweep.entries[1].scores.summary.p50, *sweep.entries[0].scores.summary.p50);
}

// Two-mode fixture: node 1 and node 2 carry the same row, so either is redundant,
// while node 0 alone observes the first mode.
TEST(Experiments, FailureSweepOnRedundantFixture) {
    Eigen::MatrixXd psi(4, 2);
    const double h = 1.0 / std::sqrt(2.0);
    psi << 1, 0, 0, h, 0, h, 0, 0;
    std::mt19937_64 gen(12);
    const dss::DataSplit split{tagged(psi * dss::testing::random_matrix(gen, 2, 30), dss::SplitTag::train),
                               tagged(psi * dss::testing::random_matrix(gen, 2, 25), dss::SplitTag::validate)};
    dss::ExperimentConfig cfg;
    dss::ExperimentContext ctx(split, cfg);
    dss::TailoredBasis b;
    b.psi_r = psi;
    b.r = 2;
    dss::PlacementRecord rec;
    rec.p = 3;
    rec.r = 2;
    rec.nodes = {0, 1, 2};
    const auto sec = dss::failure_sweep_for_placement(ctx, b, rec);
    ASSERT_EQ(sec.losses.size(), 3u);
    EXPECT_NEAR(*sec.baseline.summary.min, 1.0, 1e-10);

    EXPECT_NEAR(*sec.losses[0].rpr.rpr, 1.0, 1e-12);
    EXPECT_TRUE(sec.losses[0].rank_deficient);
    EXPECT_LT(*sec.losses[0].scores.summary.p50, 0.99);
    for (std::size_t k : {1u, 2u}) {
        EXPECT_NEAR(*sec.losses[k].rpr.rpr, 0.0, 1e-12);
        EXPECT_FALSE(sec.losses[k].rank_deficient);
        for (const auto& s : sec.losses[k].scores.nse) EXPECT_NEAR(*s, 1.0, 1e-10);
    }

    const auto assoc = dss::rpr_nse_association({sec});
    ASSERT_EQ(assoc.points.size(), 3u);
    ASSERT_TRUE(assoc.fit.slope.has_value());
    EXPECT_LT(*assoc.fit.slope, 0.0);
}

TEST(Experiments, TwoSensorFailureLeavesOneRow) {
    const auto split = synthetic_split(15, 200, 20, 3, 0.0);
    dss::ExperimentConfig cfg;
    dss::ExperimentContext ctx(split, cfg);
    const auto sec = dss::experiment_failure_sweep(ctx, 2);
    ASSERT_EQ(sec.losses.size(), 2u);
    for (const auto& l : sec.losses) {
        EXPECT_FALSE(l.rank_deficient);  // one nonzero row against two modes
        ASSERT_TRUE(l.rpr.rpr.has_value());
        EXPECT_GE(*l.rpr.rpr_clamped(), 0.0);
        EXPECT_LE(*l.rpr.rpr_clamped(), 1.0);
    }
    EXPECT_THROW(dss::experiment_failure_sweep(ctx, 1), dss::ConfigError);
    EXPECT_THROW(ctx.check_sensor_count(16), dss::ConfigError);
}

TEST(Experiments, ThreadCountDoesNotChangeResults) {
    const auto split = synthetic_split(25, 300, 40, 4, 0.05);
    for (std::size_t limit : {std::size_t{1} << 23, std::size_t{100}}) {
        dss::ExperimentConfig cfg;
        cfg.p_range = {2, 3, 5};
        cfg.failure_p = {3};
        cfg.trials = 150;
        cfg.seed = 21;
        cfg.exact_limit = limit;
        cfg.threads = 1;
        const auto a = dss::run_experiments(split, cfg);
        cfg.threads = 3;
        const auto b = dss::run_experiments(split, cfg);
        EXPECT_EQ(a.random_vs_optimal.percentile_method, limit == 100 ? "binned" : "exact");
        ASSERT_EQ(a.random_vs_optimal.per_p.size(), b.random_vs_optimal.per_p.size());
        for (std::size_t i = 0; i < a.random_vs_optimal.per_p.size(); ++i) {
            EXPECT_TRUE(same(a.random_vs_optimal.per_p[i].random, b.random_vs_optimal.per_p[i].random));
        }
        EXPECT_TRUE(same(a.random_vs_optimal.pooled_random, b.random_vs_optimal.pooled_random));
        EXPECT_TRUE(a.random_vs_optimal.pooled_random.mean.has_value());
        EXPECT_TRUE(same(a.rpr_association.fit.slope, b.rpr_association.fit.slope));
    }
}

TEST(Experiments, RunReportShape) {
    const auto split = synthetic_split(20, 250, 30, 3, 0.02);
    dss::ExperimentConfig cfg;
    cfg.p_range = {1, 2, 3, 4};
    cfg.failure_p = {4};
    cfg.trials = 20;
    const auto rep = dss::run_experiments(split, cfg);
    EXPECT_EQ(rep.n_locations, 20u);
    EXPECT_EQ(rep.n_train, 220u);
    EXPECT_EQ(rep.n_validate, 30u);
    EXPECT_EQ(rep.singular_values.size(), 20u);
    EXPECT_EQ(rep.sensor_sweep.entries.size(), 4u * 4u);
    ASSERT_TRUE(rep.per_node.has_value());
    EXPECT_EQ(rep.per_node->nodes.size(), 20u);
    ASSERT_EQ(rep.failure_sweep.size(), 1u);
    EXPECT_EQ(rep.failure_sweep[0].losses.size(), 4u);
    EXPECT_EQ(rep.rpr_association.configurations.size(), 3u);
    for (const auto& c : rep.random_vs_optimal.per_p) {
        EXPECT_EQ(c.optimal_placement.r, c.p);
        EXPECT_LE(*c.optimal.summary.p25, *c.optimal.summary.p50);
        EXPECT_LE(*c.optimal.summary.p50, *c.optimal.summary.p75);
    }
}

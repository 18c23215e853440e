#pragma once

// The four validation experiments: optimal versus random placement, sensor-count
// and noise sweeps, single-sensor failure sweeps, and the RPR/NSE association.
// Every stochastic draw is keyed by (seed, ...) through the counter RNG, and all
// aggregation is by fixed task index, so reports do not depend on thread count.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dss/basis.hpp"
#include "dss/errors.hpp"
#include "dss/evaluate.hpp"
#include "dss/noise.hpp"
#include "dss/parallel.hpp"
#include "dss/placement.hpp"
#include "dss/reconstruct.hpp"
#include "dss/snapshot_store.hpp"
#include "dss/statistics.hpp"

namespace dss {

struct ExperimentConfig {
    RankPolicy policy = RankPolicy::match_sensor_count();
    std::vector<int> p_range{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    std::vector<double> noise_levels{0.05, 0.10, 0.15};
    std::vector<int> failure_p{4, 8};
    int summary_p = 3;
    double rank_tolerance = kDefaultRankTolerance;
    /// Random-scheme pools larger than this switch from exact to binned percentiles.
    std::size_t exact_limit = std::size_t{1} << 23;
    double histogram_width = 1e-4;
    unsigned threads = 1;
    std::string units = "CFS";
};

struct PlacementRecord {
    int p = 0;
    int r = 0;
    std::vector<std::size_t> nodes;
    double condition_number = 1.0;
    bool rank_deficient = false;
    bool oversampled = false;
    bool truncation_tie = false;
};

/// Spatial NSE of every validation column, plus bookkeeping used by the reports.
struct ColumnScores {
    std::vector<std::optional<double>> nse;  // one per validation snapshot
    std::size_t negative_entries = 0;        // negative values in the reconstructions
    Summary summary;
};

struct SchemeComparison {
    int p = 0;
    PlacementRecord optimal_placement;
    ColumnScores optimal;
    Summary random;
};

struct RandomVsOptimalSection {
    std::size_t trials = 0;
    std::string percentile_method;  // "exact" or "binned"
    std::vector<SchemeComparison> per_p;
    Summary pooled_optimal;
    Summary pooled_random;
};

struct SweepEntry {
    PlacementRecord placement;
    double epsilon = 0.0;
    ColumnScores scores;
};

struct SensorSweepSection {
    std::vector<double> noise_levels;  // includes 0
    std::vector<SweepEntry> entries;   // ordered by p, then epsilon
};

struct PerNodeSection {
    PlacementRecord placement;
    std::vector<NodeSummary> nodes;
};

struct FailureLoss {
    std::size_t rank = 0;  // 0-based position in pivot order
    std::size_t node = 0;
    RprRow rpr;
    ColumnScores scores;
    double condition_number = 1.0;
    bool rank_deficient = false;
};

struct FailureSection {
    PlacementRecord placement;
    ColumnScores baseline;
    std::vector<FailureLoss> losses;  // in pivot order
};

struct AssociationPoint {
    std::size_t node = 0;
    std::size_t n_configs = 0;
    double rpr_mean = 0.0, rpr_sd = 0.0;
    double nse_mean = 0.0, nse_sd = 0.0;
};

struct RprAssociationSection {
    std::vector<FailureSection> configurations;
    std::vector<AssociationPoint> points;
    LineFit fit;
};

struct ExperimentReport {
    std::size_t n_locations = 0;
    std::size_t n_train = 0;
    std::size_t n_validate = 0;
    std::vector<double> singular_values;
    std::vector<std::string> warnings;
    RandomVsOptimalSection random_vs_optimal;
    SensorSweepSection sensor_sweep;
    std::optional<PerNodeSection> per_node;
    std::vector<FailureSection> failure_sweep;
    RprAssociationSection rpr_association;
};

namespace detail {

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) y.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
    return y;
}

inline double sample_sd(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Shared state for one experiment run: the training SVD, the validation block and
/// its NSE denominators, and a cache of truncated bases keyed by sensor count.
class ExperimentContext {
public:
    ExperimentContext(const DataSplit& data, ExperimentConfig config)
        : data_(data), config_(std::move(config)), svd_(data.train.values()), scorer_(data.validate.values()) {
        if (data.train.n_locations() != data.validate.n_locations()) {
            throw DataError("train and validate splits have different row counts");
        }
    }

    const DataSplit& data() const noexcept { return data_; }
    const ExperimentConfig& config() const noexcept { return config_; }
    const SnapshotSvd& svd() const noexcept { return svd_; }
    std::size_t n_locations() const noexcept { return data_.train.n_locations(); }

    /// Basis for a p-sensor configuration under the configured rank policy.
    const TailoredBasis& basis_for(int p) {
        auto it = bases_.find(p);
        if (it == bases_.end()) it = bases_.emplace(p, svd_.truncate(config_.policy, p)).first;
        return it->second;
    }

    void check_sensor_count(int p) const {
        if (p < 1 || static_cast<std::size_t>(p) > n_locations()) {
            throw ConfigError("sensor count " + std::to_string(p) + " outside [1, " + std::to_string(n_locations()) + "]");
        }
        (void)svd_.resolve_rank(config_.policy, p);
    }

    PlacementRecord optimal_placement(int p) {
        const auto& b = basis_for(p);
        const auto [placement, qr] = select_sensors(b, static_cast<std::size_t>(p));
        const SparseReconstructor rec(b, placement.ordered_nodes, config_.rank_tolerance);
        PlacementRecord out;
        out.p = p;
        out.r = b.r;
        out.nodes = placement.ordered_nodes;
        out.condition_number = rec.condition_number();
        out.rank_deficient = rec.rank_deficient();
        out.oversampled = placement.oversampled;
        out.truncation_tie = b.truncation_tie;
        return out;
    }

    /// Reconstructs every validation column from the given sensors, optionally
    /// perturbed, and scores each column.
    ColumnScores score_columns(const TailoredBasis& b, const std::vector<std::size_t>& nodes,
                               const std::optional<NoiseSpec>& noise = std::nullopt,
                               Eigen::MatrixXd* reconstruction = nullptr) const {
        const SparseReconstructor rec(b, nodes, config_.rank_tolerance);
        const auto& xv = data_.validate.values();
        Eigen::MatrixXd y = detail::gather_rows(xv, nodes);
        if (noise && noise->epsilon != 0.0) {
            for (Eigen::Index j = 0; j < y.cols(); ++j) {
                Eigen::VectorXd col = y.col(j);
                apply_noise_in_place(col, *noise, data_.validate.source_columns()[static_cast<std::size_t>(j)]);
                y.col(j) = col;
            }
        }
        Eigen::MatrixXd xhat = rec.reconstruct_columns(y);
        ColumnScores out;
        out.nse.resize(static_cast<std::size_t>(xv.cols()));
        for (Eigen::Index j = 0; j < xv.cols(); ++j) out.nse[static_cast<std::size_t>(j)] = scorer_.score(j, xhat.col(j));
        out.negative_entries = static_cast<std::size_t>((xhat.array() < 0.0).count());
        out.summary = summarize(out.nse);
        if (reconstruction) *reconstruction = std::move(xhat);
        return out;
    }

    const SpatialNseScorer& scorer() const noexcept { return scorer_; }

private:
    const DataSplit& data_;
    ExperimentConfig config_;
    SnapshotSvd svd_;
    SpatialNseScorer scorer_;
    std::map<int, TailoredBasis> bases_;
};

/// Global trial index for random placements: unique per (p, trial).
inline std::uint64_t random_trial_key(int p, std::size_t trial) {
    return (static_cast<std::uint64_t>(p) << 32) | static_cast<std::uint64_t>(trial);
}

inline RandomVsOptimalSection experiment_random_vs_optimal(ExperimentContext& ctx) {
    const auto& cfg = ctx.config();
    if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
    if (cfg.p_range.empty()) throw ConfigError("p_range is empty");
    for (int p : cfg.p_range) ctx.check_sensor_count(p);

    const std::size_t n = ctx.n_locations();
    const std::size_t n_val = ctx.data().validate.n_snapshots();
    const std::size_t per_p = cfg.trials * n_val;
    const bool exact = per_p * cfg.p_range.size() <= cfg.exact_limit;

    RandomVsOptimalSection out;
    out.trials = cfg.trials;
    out.percentile_method = exact ? "exact" : "binned";

    constexpr std::size_t kChunk = 64;
    const std::size_t n_chunks = (cfg.trials + kChunk - 1) / kChunk;
    const auto& xv = ctx.data().validate.values();
    const auto& scorer = ctx.scorer();

    std::vector<double> pooled_random_exact;
    BinnedDistribution pooled_binned(-20.0, 1.0, cfg.histogram_width);
    double pooled_random_sum = 0.0;
    std::vector<std::optional<double>> pooled_optimal;

    for (int p : cfg.p_range) {
        SchemeComparison cmp;
        cmp.p = p;
        const TailoredBasis& b = ctx.basis_for(p);
        cmp.optimal_placement = ctx.optimal_placement(p);
        cmp.optimal = ctx.score_columns(b, cmp.optimal_placement.nodes);
        pooled_optimal.insert(pooled_optimal.end(), cmp.optimal.nse.begin(), cmp.optimal.nse.end());

        // Per-chunk work; results land in slots keyed by chunk index.
        std::vector<double> exact_values;
        if (exact) exact_values.assign(per_p, std::numeric_limits<double>::quiet_NaN());
        std::vector<double> chunk_sums(n_chunks, 0.0);
        const unsigned workers = std::max(1u, cfg.threads);
        std::vector<BinnedDistribution> worker_hist;
        if (!exact) worker_hist.assign(std::min<std::size_t>(workers, n_chunks), BinnedDistribution(-20.0, 1.0, cfg.histogram_width));

        parallel_for(n_chunks, workers, [&](std::size_t chunk, unsigned w) {
            const std::size_t t0 = chunk * kChunk;
            const std::size_t t1 = std::min(cfg.trials, t0 + kChunk);
            double sum = 0.0;
            for (std::size_t t = t0; t < t1; ++t) {
                const auto placement = random_placement(n, static_cast<std::size_t>(p), cfg.seed, random_trial_key(p, t));
                const SparseReconstructor rec(b, placement.ordered_nodes, cfg.rank_tolerance);
                const Eigen::MatrixXd xhat = rec.reconstruct_columns(detail::gather_rows(xv, placement.ordered_nodes));
                for (std::size_t j = 0; j < n_val; ++j) {
                    const auto s = scorer.score(static_cast<Eigen::Index>(j), xhat.col(static_cast<Eigen::Index>(j)));
                    if (s) sum += *s;
                    if (exact) {
                        exact_values[t * n_val + j] = s ? *s : std::numeric_limits<double>::quiet_NaN();
                    } else if (s) {
                        worker_hist[w].add(*s);
                    } else {
                        worker_hist[w].add_undefined();
                    }
                }
            }
            chunk_sums[chunk] = sum;
        });

        double total = 0.0;
        for (double s : chunk_sums) total += s;
        pooled_random_sum += total;
        if (exact) {
            std::vector<double> defined;
            defined.reserve(exact_values.size());
            for (double v : exact_values) {
                if (!std::isnan(v)) defined.push_back(v);
            }
            const std::size_t undefined = exact_values.size() - defined.size();
            pooled_random_exact.insert(pooled_random_exact.end(), defined.begin(), defined.end());
            cmp.random = summarize(std::move(defined), undefined);
        } else {
            BinnedDistribution h(-20.0, 1.0, cfg.histogram_width);
            for (const auto& wh : worker_hist) h.merge(wh);
            pooled_binned.merge(h);
            cmp.random = h.summary();
            if (cmp.random.count > 0) cmp.random.mean = total / static_cast<double>(cmp.random.count);
        }
        out.per_p.push_back(std::move(cmp));
    }

    out.pooled_optimal = summarize(pooled_optimal);
    if (exact) {
        std::size_t undefined = 0;
        for (const auto& c : out.per_p) undefined += c.random.undefined;
        out.pooled_random = summarize(std::move(pooled_random_exact), undefined);
    } else {
        out.pooled_random = pooled_binned.summary();
        if (out.pooled_random.count > 0) {
            out.pooled_random.mean = pooled_random_sum / static_cast<double>(out.pooled_random.count);
        }
    }
    return out;
}

inline SensorSweepSection experiment_sensor_sweep(ExperimentContext& ctx) {
    const auto& cfg = ctx.config();
    if (cfg.p_range.empty()) throw ConfigError("p_range is empty");
    SensorSweepSection out;
    out.noise_levels.push_back(0.0);
    for (double e : cfg.noise_levels) {
        if (!(e >= 0.0)) throw ConfigError("noise level must be >= 0");
        if (e != 0.0) out.noise_levels.push_back(e);
    }
    for (int p : cfg.p_range) {
        ctx.check_sensor_count(p);
        const auto placement = ctx.optimal_placement(p);
        const auto& b = ctx.basis_for(p);
        for (double eps : out.noise_levels) {
            SweepEntry e;
            e.placement = placement;
            e.epsilon = eps;
            e.scores = ctx.score_columns(b, placement.nodes, NoiseSpec(eps, cfg.seed));
            out.entries.push_back(std::move(e));
        }
    }
    return out;
}

inline PerNodeSection experiment_per_node(ExperimentContext& ctx, int p) {
    ctx.check_sensor_count(p);
    PerNodeSection out;
    out.placement = ctx.optimal_placement(p);
    Eigen::MatrixXd xhat;
    (void)ctx.score_columns(ctx.basis_for(p), out.placement.nodes, std::nullopt, &xhat);
    out.nodes = per_node_summary(ctx.data().validate.values(), xhat);
    return out;
}

/// Deletes each sensor of a fixed placement in turn and reconstructs with the rest
/// against the unchanged basis.
inline FailureSection failure_sweep_for_placement(const ExperimentContext& ctx, const TailoredBasis& b,
                                                  const PlacementRecord& placement) {
    if (placement.nodes.size() < 2) throw ConfigError("failure sweep needs at least 2 sensors");
    const auto& cfg = ctx.config();
    FailureSection out;
    out.placement = placement;
    out.baseline = ctx.score_columns(b, placement.nodes);
    SensorPlacement full;
    full.ordered_nodes = placement.nodes;
    for (std::size_t k = 0; k < placement.nodes.size(); ++k) {
        std::vector<std::size_t> remaining;
        for (std::size_t i = 0; i < placement.nodes.size(); ++i) {
            if (i != k) remaining.push_back(placement.nodes[i]);
        }
        FailureLoss loss;
        loss.rank = k;
        loss.node = placement.nodes[k];
        loss.rpr = rpr(b, full, k, cfg.rank_tolerance);
        const SparseReconstructor rec(b, remaining, cfg.rank_tolerance);
        loss.condition_number = rec.condition_number();
        loss.rank_deficient = rec.rank_deficient();
        loss.scores = ctx.score_columns(b, remaining);
        out.losses.push_back(std::move(loss));
    }
    return out;
}

inline FailureSection experiment_failure_sweep(ExperimentContext& ctx, int p) {
    if (p < 2) throw ConfigError("failure sweep needs p >= 2, got " + std::to_string(p));
    ctx.check_sensor_count(p);
    return failure_sweep_for_placement(ctx, ctx.basis_for(p), ctx.optimal_placement(p));
}

/// Pools (RPR, mean NSE) over lost sensors by node across configurations and
/// fits mean NSE against mean RPR.
inline RprAssociationSection rpr_nse_association(std::vector<FailureSection> configurations) {
    RprAssociationSection out;
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_node;
    for (const auto& cfg : configurations) {
        for (const auto& loss : cfg.losses) {
            const auto r = loss.rpr.rpr_clamped();
            if (!r || !loss.scores.summary.mean) continue;
            by_node[loss.node].first.push_back(*r);
            by_node[loss.node].second.push_back(*loss.scores.summary.mean);
        }
    }
    std::vector<double> xs, ys;
    for (const auto& [node, vals] : by_node) {
        AssociationPoint pt;
        pt.node = node;
        pt.n_configs = vals.first.size();
        double sr = 0.0, sn = 0.0;
        for (std::size_t i = 0; i < vals.first.size(); ++i) {
            sr += vals.first[i];
            sn += vals.second[i];
        }
        pt.rpr_mean = sr / static_cast<double>(pt.n_configs);
        pt.nse_mean = sn / static_cast<double>(pt.n_configs);
        pt.rpr_sd = detail::sample_sd(vals.first, pt.rpr_mean);
        pt.nse_sd = detail::sample_sd(vals.second, pt.nse_mean);
        xs.push_back(pt.rpr_mean);
        ys.push_back(pt.nse_mean);
        out.points.push_back(pt);
    }
    if (xs.size() >= 2) out.fit = fit_line(xs, ys);
    out.configurations = std::move(configurations);
    return out;
}

inline LineFit rpr_nse_association(const ExperimentReport& report) { return report.rpr_association.fit; }

/// Runs every experiment and assembles the report.
inline ExperimentReport run_experiments(const DataSplit& data, const ExperimentConfig& config) {
    ExperimentContext ctx(data, config);
    ExperimentReport rep;
    rep.n_locations = data.train.n_locations();
    rep.n_train = data.train.n_snapshots();
    rep.n_validate = data.validate.n_snapshots();
    const auto& sv = ctx.svd().singular_values();
    rep.singular_values.assign(sv.data(), sv.data() + sv.size());

    rep.random_vs_optimal = experiment_random_vs_optimal(ctx);
    rep.sensor_sweep = experiment_sensor_sweep(ctx);

    const int summary_p = config.summary_p;
    if (summary_p > 0 && data.validate.n_snapshots() >= 2) rep.per_node = experiment_per_node(ctx, summary_p);

    for (int p : config.failure_p) rep.failure_sweep.push_back(experiment_failure_sweep(ctx, p));

    std::vector<FailureSection> configs;
    for (int p : config.p_range) {
        if (p >= 2) configs.push_back(experiment_failure_sweep(ctx, p));
    }
    rep.rpr_association = rpr_nse_association(std::move(configs));

    for (const auto& c : rep.random_vs_optimal.per_p) {
        const auto& pl = c.optimal_placement;
        if (pl.truncation_tie) {
            rep.warnings.push_back("p=" + std::to_string(pl.p) + ": sigma_r and sigma_r+1 tie within relative 1e-10 (r=" +
                                   std::to_string(pl.r) + "); truncation is ill-defined");
        }
        if (pl.oversampled) {
            rep.warnings.push_back("p=" + std::to_string(pl.p) + ": oversampled placement (p > r=" + std::to_string(pl.r) +
                                   "), pivots beyond rank are weakly determined");
        }
    }
    if (!rep.rpr_association.fit.slope && rep.rpr_association.points.size() >= 2) {
        rep.warnings.push_back("rpr/nse association undefined: all RPR values equal");
    }
    return rep;
}

}  // namespace dss

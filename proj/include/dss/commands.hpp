#pragma once

// Command implementations behind the dss CLI. Each command reads its inputs from
// a RunConfig and writes only under the output directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dss/basis.hpp"
#include "dss/config.hpp"
#include "dss/csv.hpp"
#include "dss/errors.hpp"
#include "dss/evaluate.hpp"
#include "dss/experiments.hpp"
#include "dss/placement.hpp"
#include "dss/reconstruct.hpp"
#include "dss/report_io.hpp"
#include "dss/snapshot_store.hpp"
#include "dss/synth.hpp"

namespace dss {

struct CommandContext {
    RunConfig config;
    std::filesystem::path out_dir;
    unsigned threads = 1;
    std::ostream* log = &std::cout;
};

namespace cmd_detail {

inline std::filesystem::path prepare_out_dir(const std::filesystem::path& dir) {
    if (dir.empty()) throw ConfigError("missing required config key 'out' (or --out)");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw ConfigError("output directory '" + dir.string() + "' is not writable");
    }
    return dir;
}

struct LoadedData {
    NodeRegistry nodes;
    SnapshotMatrix matrix;
    DataSplit split;
};

inline LoadedData load(const RunConfig& cfg) {
    const auto nodes_path = cfg.input_path("nodes");
    const auto snapshots_path = cfg.input_path("snapshots");
    const auto meta_path = cfg.input_path("snapshots_meta");
    auto [nodes, matrix] = load_snapshots(nodes_path, snapshots_path, meta_path);
    auto split = split_by_tag(matrix);
    return LoadedData{std::move(nodes), std::move(matrix), std::move(split)};
}

inline int sensor_count(const RunConfig& cfg) {
    const auto p = cfg.get_int("p", 0);
    if (p < 1) throw ConfigError("missing or invalid config key 'p' (sensor count >= 1)");
    return static_cast<int>(p);
}

inline void check_p(int p, std::size_t n) {
    if (p < 1 || static_cast<std::size_t>(p) > n) {
        throw ConfigError("sensor count " + std::to_string(p) + " outside [1, " + std::to_string(n) + "]");
    }
}

inline void write_small_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    auto out = csv::open_output(path.string());
    report_detail::write_json(out, j, 2);
    out << '\n';
}

}  // namespace cmd_detail

/// Writes nodes.csv, snapshots.csv and snapshots_meta.csv for a low-rank fixture.
inline void cmd_synth(const CommandContext& ctx) {
    const auto dir = cmd_detail::prepare_out_dir(ctx.out_dir);
    const auto spec = ctx.config.synth_spec();
    const auto data = make_synthetic(spec);
    write_nodes((dir / "nodes.csv").string(), data.nodes);
    write_snapshots((dir / "snapshots.csv").string(), (dir / "snapshots_meta.csv").string(), data.nodes, data.snapshots);
    *ctx.log << "synth: " << spec.n_locations << " nodes x " << spec.n_snapshots << " snapshots (rank "
             << spec.rank << ", " << spec.n_validate << " validate) -> " << dir.string() << '\n';
}

inline void cmd_fit(const CommandContext& ctx) {
    const auto data = cmd_detail::load(ctx.config);
    const auto dir = cmd_detail::prepare_out_dir(ctx.out_dir);
    const auto policy = ctx.config.rank_policy();
    std::optional<int> p;
    if (ctx.config.has("p")) p = cmd_detail::sensor_count(ctx.config);
    const auto basis = fit_basis(data.split.train, policy, p);
    write_basis((dir / "basis.csv").string(), (dir / "singular_values.csv").string(), data.nodes, basis);

    nlohmann::ordered_json summary;
    summary["rank_policy"] = policy.to_string();
    summary["resolved_r"] = basis.r;
    summary["centering"] = "none";
    summary["n_locations"] = basis.n_locations();
    summary["n_train"] = data.split.train.n_snapshots();
    summary["energy_spectrum"] = energy_spectrum(basis);
    summary["truncation_tie"] = basis.truncation_tie;
    summary["warnings"] = nlohmann::ordered_json::array();
    if (basis.truncation_tie) {
        summary["warnings"].push_back("sigma_r and sigma_r+1 tie within relative 1e-10; truncation is ill-defined");
    }
    cmd_detail::write_small_json(dir / "fit_summary.json", summary);
    *ctx.log << "fit: r = " << basis.r << ", sigma_1 = " << csv::format_double(basis.singular_values[0]) << '\n';
}

inline void cmd_place(const CommandContext& ctx) {
    const auto data = cmd_detail::load(ctx.config);
    const auto dir = cmd_detail::prepare_out_dir(ctx.out_dir);
    const auto policy = ctx.config.rank_policy();
    std::vector<int> ps;
    if (ctx.config.has("p_range")) {
        ps = ctx.config.get_int_list("p_range", {});
    } else {
        ps = {cmd_detail::sensor_count(ctx.config)};
    }
    const SnapshotSvd svd(data.split.train.values());
    for (int p : ps) {
        cmd_detail::check_p(p, data.nodes.size());
        const auto basis = svd.truncate(policy, p);
        const auto [placement, qr] = select_sensors(basis, static_cast<std::size_t>(p));
        write_placement((dir / ("placement_p" + std::to_string(p) + ".csv")).string(), data.nodes, placement);
        *ctx.log << "place: p = " << p << " (r = " << basis.r << "):";
        for (auto i : placement.ordered_nodes) *ctx.log << ' ' << data.nodes.id(i);
        if (placement.oversampled) *ctx.log << "  [oversampled placement, pivots beyond rank are weakly determined]";
        *ctx.log << '\n';
    }
}

/// Reconstructs every validation snapshot from the optimal p-sensor placement.
inline void cmd_reconstruct(const CommandContext& ctx) {
    const auto data = cmd_detail::load(ctx.config);
    const auto dir = cmd_detail::prepare_out_dir(ctx.out_dir);
    const int p = cmd_detail::sensor_count(ctx.config);
    cmd_detail::check_p(p, data.nodes.size());
    const double rel_tol = ctx.config.get_double("rank_tolerance", kDefaultRankTolerance);
    const double eps = ctx.config.get_double("noise", 0.0);
    std::optional<NoiseSpec> noise;
    if (eps != 0.0) noise = NoiseSpec(eps, ctx.config.seed());

    const auto basis = fit_basis(data.split.train, ctx.config.rank_policy(), p);
    const auto [placement, qr] = select_sensors(basis, static_cast<std::size_t>(p));
    const auto results = reconstruct_batch(data.split.validate, basis, placement, noise, rel_tol);

    auto out = csv::open_output((dir / ("reconstruction_p" + std::to_string(p) + ".csv")).string());
    out << "snapshot_id,node_id,truth,reconstructed\n";
    std::vector<std::optional<double>> scores;
    std::size_t negatives = 0;
    for (const auto& r : results) {
        for (Eigen::Index i = 0; i < r.truth.size(); ++i) {
            out << r.snapshot_id << ',' << data.nodes.id(static_cast<std::size_t>(i)) << ','
                << csv::format_double(r.truth[i]) << ',' << csv::format_double(r.result.x_hat[i]) << '\n';
            if (r.result.x_hat[i] < 0.0) ++negatives;
        }
        scores.push_back(nse(r.truth, r.result.x_hat).value);
    }
    const auto s = summarize(scores);
    nlohmann::ordered_json j;
    j["p"] = p;
    j["r"] = basis.r;
    j["sensors"] = report_detail::node_ids(data.nodes, placement.ordered_nodes);
    j["epsilon"] = eps;
    j["condition_number"] = report_detail::number(results.empty() ? 1.0 : results.front().result.condition_number);
    j["rank_deficient"] = !results.empty() && results.front().result.rank_deficient;
    j["negative_entries"] = negatives;
    j["spatial_nse"] = report_detail::summary_json(s);
    cmd_detail::write_small_json(dir / ("reconstruction_p" + std::to_string(p) + "_summary.json"), j);
    *ctx.log << "reconstruct: p = " << p << ", " << results.size() << " snapshots, median spatial NSE = "
             << csv::format_optional(s.p50) << '\n';
}

/// RPR of every sensor of the optimal placement for each p in p_range (p >= 2).
inline void cmd_rpr(const CommandContext& ctx) {
    const auto data = cmd_detail::load(ctx.config);
    const auto dir = cmd_detail::prepare_out_dir(ctx.out_dir);
    const auto policy = ctx.config.rank_policy();
    const double rel_tol = ctx.config.get_double("rank_tolerance", kDefaultRankTolerance);
    std::vector<int> ps = ctx.config.has("p_range") ? ctx.config.get_int_list("p_range", {})
                                                    : std::vector<int>{cmd_detail::sensor_count(ctx.config)};
    const SnapshotSvd svd(data.split.train.values());
    auto out = csv::open_output((dir / "rpr.csv").string());
    out << "p,rank,node_id,row_index,pr,rpr\n";
    for (int p : ps) {
        if (p < 2) continue;
        cmd_detail::check_p(p, data.nodes.size());
        const auto basis = svd.truncate(policy, p);
        const auto [placement, qr] = select_sensors(basis, static_cast<std::size_t>(p));
        for (std::size_t k = 0; k < placement.p(); ++k) {
            const auto row = rpr(basis, placement, k, rel_tol);
            out << p << ',' << (k + 1) << ',' << data.nodes.id(row.lost_node) << ',' << row.lost_node << ','
                << csv::format_optional(row.pr) << ',' << csv::format_optional(row.rpr_clamped()) << '\n';
        }
    }
    *ctx.log << "rpr: wrote " << (dir / "rpr.csv").string() << '\n';
}

inline void cmd_run_experiments(const CommandContext& ctx) {
    const auto data = cmd_detail::load(ctx.config);
    const auto dir = cmd_detail::prepare_out_dir(ctx.out_dir);
    const auto cfg = ctx.config.experiment_config(ctx.threads);
    for (int p : cfg.p_range) cmd_detail::check_p(p, data.nodes.size());

    auto echo = ctx.config.values();
    echo.erase("threads");
    echo.erase("out");
    echo["seed"] = std::to_string(cfg.seed);
    echo["rank_policy"] = cfg.policy.to_string();
    echo["trials"] = std::to_string(cfg.trials);

    const auto report = run_experiments(data.split, cfg);
    write_report(dir, report, data.nodes, data.split.validate, cfg, echo);
    const auto& pooled = report.random_vs_optimal.pooled_optimal;
    *ctx.log << "run-experiments: pooled optimal median NSE = " << csv::format_optional(pooled.p50)
             << ", pooled random median NSE = " << csv::format_optional(report.random_vs_optimal.pooled_random.p50)
             << "; report written to " << (dir / "report.json").string() << '\n';
}

}  // namespace dss

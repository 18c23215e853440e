#pragma once

// report.json and the plot-ready figure tables.

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dss/csv.hpp"
#include "dss/experiments.hpp"
#include "dss/snapshot_store.hpp"

namespace dss {

inline constexpr int kReportSchemaVersion = 1;

namespace report_detail {

using json = nlohmann::ordered_json;

inline json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline json number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

inline void write_string(std::ostream& out, const std::string& s) { out << json(s).dump(); }

/// Serializes with every floating-point value at 17 significant digits so that the
/// byte stream is a pure function of the stored doubles.
inline void write_json(std::ostream& out, const json& j, int indent, int depth = 0) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out << "{}";
                return;
            }
            out << "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out << ",\n";
                first = false;
                out << pad;
                write_string(out, it.key());
                out << ": ";
                write_json(out, it.value(), indent, depth + 1);
            }
            out << '\n' << close_pad << '}';
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out << "[]";
                return;
            }
            // Arrays of scalars stay on one line.
            bool scalar = true;
            for (const auto& e : j) scalar = scalar && !e.is_structured();
            if (scalar) {
                out << '[';
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) out << ", ";
                    write_json(out, j[i], indent, depth + 1);
                }
                out << ']';
                return;
            }
            out << "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out << ",\n";
                out << pad;
                write_json(out, j[i], indent, depth + 1);
            }
            out << '\n' << close_pad << ']';
            return;
        }
        case json::value_t::number_float:
            out << csv::format_double(j.get<double>());
            return;
        default:
            out << j.dump();
            return;
    }
}

inline json summary_json(const Summary& s) {
    return json{{"count", s.count},   {"undefined", s.undefined}, {"p25", number(s.p25)},
                {"p50", number(s.p50)}, {"p75", number(s.p75)},     {"mean", number(s.mean)},
                {"min", number(s.min)}, {"max", number(s.max)}};
}

inline json node_ids(const NodeRegistry& nodes, const std::vector<std::size_t>& rows) {
    json a = json::array();
    for (auto r : rows) a.push_back(nodes.id(r));
    return a;
}

inline json placement_json(const NodeRegistry& nodes, const PlacementRecord& p) {
    return json{{"p", p.p},
                {"r", p.r},
                {"nodes", node_ids(nodes, p.nodes)},
                {"row_indices", p.nodes},
                {"condition_number", number(p.condition_number)},
                {"rank_deficient", p.rank_deficient},
                {"oversampled", p.oversampled},
                {"truncation_tie", p.truncation_tie}};
}

inline json failure_json(const NodeRegistry& nodes, const FailureSection& f) {
    json losses = json::array();
    for (const auto& l : f.losses) {
        losses.push_back(json{{"rank", l.rank + 1},
                              {"node_id", nodes.id(l.node)},
                              {"rpr", number(l.rpr.rpr_clamped())},
                              {"rpr_raw", number(l.rpr.rpr)},
                              {"pr", number(l.rpr.pr)},
                              {"condition_number", number(l.condition_number)},
                              {"rank_deficient", l.rank_deficient},
                              {"negative_entries", l.scores.negative_entries},
                              {"nse", summary_json(l.scores.summary)}});
    }
    return json{{"placement", placement_json(nodes, f.placement)},
                {"baseline_nse", summary_json(f.baseline.summary)},
                {"losses", std::move(losses)}};
}

}  // namespace report_detail

/// Fixed description of modelling choices, echoed in every report.
inline std::map<std::string, std::string> report_settings(const ExperimentConfig& cfg) {
    return {
        {"centering", "none (raw snapshot matrix)"},
        {"ci_method", "normal approximation: mean +/- 1.96*sd/sqrt(m), sample sd"},
        {"negative_reconstructions", "not clipped; counted per section"},
        {"noise_model", "uniform multiplicative: y*(1+u), u~U[-eps,+eps], keyed by (seed, snapshot_id, sensor)"},
        {"nse_axis", "spatial: one score per validation snapshot across all nodes; per-node axis in per_node_summary"},
        {"percentile_method", "linear interpolation between order statistics"},
        {"pivot_tie_rule", "lowest column index within relative 1e-12"},
        {"pooling", "random_vs_optimal pooled with equal weight per (p, trial, snapshot)"},
        {"rank_policy", cfg.policy.to_string()},
        {"rank_tolerance", csv::format_double(cfg.rank_tolerance)},
    };
}

inline void write_report_json(std::ostream& out, const ExperimentReport& rep, const NodeRegistry& nodes,
                              const ExperimentConfig& cfg, const std::map<std::string, std::string>& config_echo) {
    using report_detail::json;
    using report_detail::number;
    using report_detail::summary_json;

    json root;
    root["schema_version"] = kReportSchemaVersion;
    root["units"] = cfg.units;
    json conf = json::object();
    for (const auto& [k, v] : config_echo) conf[k] = v;
    root["config"] = std::move(conf);
    json settings = json::object();
    for (const auto& [k, v] : report_settings(cfg)) settings[k] = v;
    root["settings"] = std::move(settings);
    root["data"] = json{{"n_locations", rep.n_locations}, {"n_train", rep.n_train}, {"n_validate", rep.n_validate}};
    {
        json sv = json::array();
        for (double s : rep.singular_values) sv.push_back(number(s));
        root["singular_values"] = std::move(sv);
    }
    root["warnings"] = rep.warnings;

    {
        const auto& s = rep.random_vs_optimal;
        json per_p = json::array();
        for (const auto& c : s.per_p) {
            per_p.push_back(json{{"p", c.p},
                                 {"optimal_placement", report_detail::placement_json(nodes, c.optimal_placement)},
                                 {"optimal", summary_json(c.optimal.summary)},
                                 {"random", summary_json(c.random)}});
        }
        root["random_vs_optimal"] = json{{"trials_per_p", s.trials},
                                         {"random_percentile_method", s.percentile_method},
                                         {"histogram_bin_width", number(cfg.histogram_width)},
                                         {"pooled", json{{"optimal", summary_json(s.pooled_optimal)},
                                                         {"random", summary_json(s.pooled_random)}}},
                                         {"per_p", std::move(per_p)}};
    }
    {
        json entries = json::array();
        for (const auto& e : rep.sensor_sweep.entries) {
            entries.push_back(json{{"p", e.placement.p},
                                   {"r", e.placement.r},
                                   {"epsilon", number(e.epsilon)},
                                   {"condition_number", number(e.placement.condition_number)},
                                   {"negative_entries", e.scores.negative_entries},
                                   {"nse", summary_json(e.scores.summary)}});
        }
        json levels = json::array();
        for (double e : rep.sensor_sweep.noise_levels) levels.push_back(number(e));
        root["sensor_sweep"] = json{{"noise_levels", std::move(levels)}, {"entries", std::move(entries)}};
    }
    if (rep.per_node) {
        json rows = json::array();
        for (const auto& n : rep.per_node->nodes) {
            rows.push_back(json{{"node_id", nodes.id(n.row)},
                                {"truth_mean", number(n.truth.mean)},
                                {"truth_ci_half_width", number(n.truth.half_width)},
                                {"reconstruction_mean", number(n.reconstruction.mean)},
                                {"reconstruction_ci_half_width", number(n.reconstruction.half_width)}});
        }
        root["per_node_summary"] = json{{"placement", report_detail::placement_json(nodes, rep.per_node->placement)},
                                        {"nodes", std::move(rows)}};
    } else {
        root["per_node_summary"] = nullptr;
    }
    {
        json fs = json::array();
        for (const auto& f : rep.failure_sweep) fs.push_back(report_detail::failure_json(nodes, f));
        root["failure_sweep"] = std::move(fs);
    }
    {
        const auto& a = rep.rpr_association;
        json configs = json::array();
        for (const auto& f : a.configurations) configs.push_back(report_detail::failure_json(nodes, f));
        json points = json::array();
        for (const auto& p : a.points) {
            points.push_back(json{{"node_id", nodes.id(p.node)},
                                  {"n_configs", p.n_configs},
                                  {"rpr_mean", number(p.rpr_mean)},
                                  {"rpr_sd", number(p.rpr_sd)},
                                  {"nse_mean", number(p.nse_mean)},
                                  {"nse_sd", number(p.nse_sd)}});
        }
        root["rpr_association"] = json{{"fit", json{{"n_points", a.fit.n},
                                                    {"slope", number(a.fit.slope)},
                                                    {"intercept", number(a.fit.intercept)},
                                                    {"r_squared", number(a.fit.r_squared)}}},
                                       {"points", std::move(points)},
                                       {"configurations", std::move(configs)}};
    }
    report_detail::write_json(out, root, 2);
    out << '\n';
}

namespace report_detail {

inline void summary_columns(std::ostream& out, const Summary& s) {
    out << s.count << ',' << s.undefined << ',' << csv::format_optional(s.p25) << ',' << csv::format_optional(s.p50)
        << ',' << csv::format_optional(s.p75) << ',' << csv::format_optional(s.mean) << ','
        << csv::format_optional(s.min) << ',' << csv::format_optional(s.max);
}

inline constexpr const char* kSummaryHeader = "count,undefined,p25,p50,p75,mean,min,max";

}  // namespace report_detail

/// Writes report.json plus one long-format CSV per figure into dir.
inline void write_report(const std::filesystem::path& dir, const ExperimentReport& rep, const NodeRegistry& nodes,
                         const SnapshotMatrix& validate, const ExperimentConfig& cfg,
                         const std::map<std::string, std::string>& config_echo) {
    using report_detail::summary_columns;
    using report_detail::kSummaryHeader;
    {
        auto out = csv::open_output((dir / "report.json").string());
        write_report_json(out, rep, nodes, cfg, config_echo);
    }
    const auto& src = validate.source_columns();
    const auto& meta = validate.meta();
    {
        auto out = csv::open_output((dir / "fig4_nse_by_scheme.csv").string());
        out << "scheme,p," << kSummaryHeader << '\n';
        for (const auto& c : rep.random_vs_optimal.per_p) {
            out << "optimal," << c.p << ',';
            summary_columns(out, c.optimal.summary);
            out << "\nrandom," << c.p << ',';
            summary_columns(out, c.random);
            out << '\n';
        }
        out << "optimal,all,";
        summary_columns(out, rep.random_vs_optimal.pooled_optimal);
        out << "\nrandom,all,";
        summary_columns(out, rep.random_vs_optimal.pooled_random);
        out << '\n';
    }
    {
        auto f5 = csv::open_output((dir / "fig5_nse_by_p.csv").string());
        auto f8 = csv::open_output((dir / "fig8_noise.csv").string());
        f5 << "p,snapshot_id,event_id,nse\n";
        f8 << "p,epsilon,snapshot_id,event_id,nse\n";
        for (const auto& e : rep.sensor_sweep.entries) {
            for (std::size_t j = 0; j < e.scores.nse.size(); ++j) {
                const auto v = csv::format_optional(e.scores.nse[j]);
                if (e.epsilon == 0.0) f5 << e.placement.p << ',' << src[j] << ',' << meta[j].event_id << ',' << v << '\n';
                f8 << e.placement.p << ',' << csv::format_double(e.epsilon) << ',' << src[j] << ',' << meta[j].event_id
                   << ',' << v << '\n';
            }
        }
    }
    {
        auto out = csv::open_output((dir / "fig6_per_node.csv").string());
        out << "node_id,truth_mean,truth_ci_low,truth_ci_high,reconstruction_mean,reconstruction_ci_low,"
               "reconstruction_ci_high\n";
        if (rep.per_node) {
            for (const auto& n : rep.per_node->nodes) {
                out << nodes.id(n.row) << ',' << csv::format_double(n.truth.mean) << ','
                    << csv::format_double(n.truth.mean - n.truth.half_width) << ','
                    << csv::format_double(n.truth.mean + n.truth.half_width) << ','
                    << csv::format_double(n.reconstruction.mean) << ','
                    << csv::format_double(n.reconstruction.mean - n.reconstruction.half_width) << ','
                    << csv::format_double(n.reconstruction.mean + n.reconstruction.half_width) << '\n';
            }
        }
    }
    {
        auto out = csv::open_output((dir / "fig9_failure.csv").string());
        out << "p,rank,lost_node_id,snapshot_id,nse\n";
        for (const auto& f : rep.failure_sweep) {
            for (std::size_t j = 0; j < f.baseline.nse.size(); ++j) {
                out << f.placement.p << ",0,none," << src[j] << ',' << csv::format_optional(f.baseline.nse[j]) << '\n';
            }
            for (const auto& l : f.losses) {
                for (std::size_t j = 0; j < l.scores.nse.size(); ++j) {
                    out << f.placement.p << ',' << (l.rank + 1) << ',' << nodes.id(l.node) << ',' << src[j] << ','
                        << csv::format_optional(l.scores.nse[j]) << '\n';
                }
            }
        }
    }
    {
        auto out = csv::open_output((dir / "fig10_rpr_nse.csv").string());
        out << "node_id,n_configs,rpr_mean,rpr_sd,nse_mean,nse_sd\n";
        for (const auto& p : rep.rpr_association.points) {
            out << nodes.id(p.node) << ',' << p.n_configs << ',' << csv::format_double(p.rpr_mean) << ','
                << csv::format_double(p.rpr_sd) << ',' << csv::format_double(p.nse_mean) << ','
                << csv::format_double(p.nse_sd) << '\n';
        }
    }
    {
        auto out = csv::open_output((dir / "fig11_rpr_by_config.csv").string());
        out << "p,rank,node_id,rpr,pr,mean_nse\n";
        for (const auto& f : rep.rpr_association.configurations) {
            for (const auto& l : f.losses) {
                out << f.placement.p << ',' << (l.rank + 1) << ',' << nodes.id(l.node) << ','
                    << csv::format_optional(l.rpr.rpr_clamped()) << ',' << csv::format_optional(l.rpr.pr) << ','
                    << csv::format_optional(l.scores.summary.mean) << '\n';
            }
        }
    }
}

}  // namespace dss

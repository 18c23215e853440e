#pragma once

// Run configuration: a plain key = value file with '#' comments, overridable by
// command-line flags. Unknown keys are rejected.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dss/basis.hpp"
#include "dss/csv.hpp"
#include "dss/errors.hpp"
#include "dss/experiments.hpp"
#include "dss/synth.hpp"

namespace dss {

using ConfigMap = std::map<std::string, std::string>;

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys{
        "nodes",        "snapshots",      "snapshots_meta",  "out",          "rank_policy",   "p",
        "p_range",      "noise_levels",   "noise",           "trials",       "seed",          "rank_tolerance",
        "failure_p",    "summary_p",      "units",           "threads",      "exact_limit",   "histogram_width",
        "synth_nodes",  "synth_snapshots", "synth_validate", "synth_rank",   "synth_noise",   "synth_decay",
    };
    return keys;
}

inline void set_config_value(ConfigMap& m, const std::string& key, const std::string& value) {
    if (!known_config_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    m[key] = value;
}

inline ConfigMap parse_config_text(std::string_view text, const std::string& origin = "<config>") {
    ConfigMap m;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = csv::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(csv::trim(line.substr(0, eq)));
        const std::string value(csv::trim(line.substr(eq + 1)));
        try {
            set_config_value(m, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return m;
}

inline ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, path);
}

/// Typed view over a ConfigMap. Accessors name the offending key in every error.
class RunConfig {
public:
    explicit RunConfig(ConfigMap values) : values_(std::move(values)) {}

    const ConfigMap& values() const noexcept { return values_; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string require(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end() || it->second.empty()) throw ConfigError("missing required config key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    long long get_int(const std::string& key, long long fallback) const {
        if (!has(key)) return fallback;
        const auto v = csv::parse_int(values_.at(key));
        if (!v) throw ConfigError("config key '" + key + "': expected an integer, got '" + values_.at(key) + "'");
        return *v;
    }

    std::size_t get_count(const std::string& key, std::size_t fallback) const {
        const auto v = get_int(key, static_cast<long long>(fallback));
        if (v < 0) throw ConfigError("config key '" + key + "' must be >= 0");
        return static_cast<std::size_t>(v);
    }

    double get_double(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const auto v = csv::parse_double(values_.at(key));
        if (!v || !std::isfinite(*v)) {
            throw ConfigError("config key '" + key + "': expected a number, got '" + values_.at(key) + "'");
        }
        return *v;
    }

    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
        if (!has(key)) return fallback;
        std::vector<double> out;
        for (auto f : csv::split(values_.at(key))) {
            if (f.empty()) continue;
            const auto v = csv::parse_double(f);
            if (!v || !std::isfinite(*v)) throw ConfigError("config key '" + key + "': bad number '" + std::string(f) + "'");
            out.push_back(*v);
        }
        return out;
    }

    /// "a..b" (inclusive) or a comma-separated list.
    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const {
        if (!has(key)) return fallback;
        const std::string& s = values_.at(key);
        std::vector<int> out;
        if (const auto dots = s.find(".."); dots != std::string::npos) {
            const auto a = csv::parse_int(std::string_view(s).substr(0, dots));
            const auto b = csv::parse_int(std::string_view(s).substr(dots + 2));
            if (!a || !b || *a > *b) throw ConfigError("config key '" + key + "': bad range '" + s + "'");
            for (long long v = *a; v <= *b; ++v) out.push_back(static_cast<int>(v));
            return out;
        }
        for (auto f : csv::split(s)) {
            if (f.empty()) continue;
            const auto v = csv::parse_int(f);
            if (!v) throw ConfigError("config key '" + key + "': bad integer '" + std::string(f) + "'");
            out.push_back(static_cast<int>(*v));
        }
        return out;
    }

    std::uint64_t seed() const {
        const std::string s = require("seed");
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ConfigError("config key 'seed': expected an unsigned 64-bit integer, got '" + s + "'");
        }
        return v;
    }

    RankPolicy rank_policy() const { return RankPolicy::parse(get_string("rank_policy", "match_sensor_count")); }

    /// Input file path for key, checked for existence.
    std::string input_path(const std::string& key) const {
        const std::string p = require(key);
        if (!std::filesystem::is_regular_file(p)) throw ConfigError("config key '" + key + "': file not found: " + p);
        return p;
    }

    ExperimentConfig experiment_config(unsigned threads) const {
        ExperimentConfig c;
        c.policy = rank_policy();
        c.p_range = get_int_list("p_range", c.p_range);
        c.trials = get_count("trials", c.trials);
        c.seed = seed();
        c.noise_levels = get_doubles("noise_levels", c.noise_levels);
        c.failure_p = get_int_list("failure_p", c.failure_p);
        c.summary_p = static_cast<int>(get_int("summary_p", c.summary_p));
        c.rank_tolerance = get_double("rank_tolerance", c.rank_tolerance);
        c.exact_limit = get_count("exact_limit", c.exact_limit);
        c.histogram_width = get_double("histogram_width", c.histogram_width);
        c.units = get_string("units", c.units);
        c.threads = threads;
        if (c.trials < 1) throw ConfigError("config key 'trials' must be >= 1");
        if (!(c.rank_tolerance > 0.0 && c.rank_tolerance < 1.0)) {
            throw ConfigError("config key 'rank_tolerance' must lie in (0, 1)");
        }
        if (!(c.histogram_width > 0.0)) throw ConfigError("config key 'histogram_width' must be > 0");
        for (double e : c.noise_levels) {
            if (e < 0.0) throw ConfigError("config key 'noise_levels': levels must be >= 0");
        }
        for (int p : c.failure_p) {
            if (p < 2) throw ConfigError("config key 'failure_p': sensor counts must be >= 2");
        }
        return c;
    }

    SynthSpec synth_spec() const {
        SynthSpec s;
        s.n_locations = get_count("synth_nodes", s.n_locations);
        s.n_snapshots = get_count("synth_snapshots", s.n_snapshots);
        s.n_validate = get_count("synth_validate", s.n_validate);
        s.rank = get_count("synth_rank", s.rank);
        s.noise = get_double("synth_noise", s.noise);
        s.decay = get_double("synth_decay", s.decay);
        s.seed = seed();
        return s;
    }

private:
    ConfigMap values_;
};

}  // namespace dss

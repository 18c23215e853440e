// dss: command-line front end for data-driven sparse sensing.
//
//   dss synth|fit|place|reconstruct|run-experiments|rpr
//       [--config PATH] [--seed U64] [--threads N] [--out DIR] [--set KEY=VALUE]...
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dss/commands.hpp"
#include "dss/config.hpp"
#include "dss/errors.hpp"
#include "dss/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Data-driven sparse sensing: basis fitting, sensor placement, reconstruction and experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> seed;
    std::optional<unsigned> threads;
    std::string out_dir;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "Key = value configuration file");
    app.add_option("--seed", seed, "Seed for every stochastic step (overrides config)");
    app.add_option("--threads", threads, "Worker threads (default: hardware concurrency)");
    app.add_option("--out", out_dir, "Output directory (overrides config 'out')");
    app.add_option("--set", overrides, "Override a config key, KEY=VALUE (repeatable)");

    const std::map<std::string, std::pair<std::string, std::function<void(const dss::CommandContext&)>>> commands{
        {"synth", {"Generate a low-rank synthetic dataset", dss::cmd_synth}},
        {"fit", {"Fit the tailored basis and write basis tables", dss::cmd_fit}},
        {"place", {"Select optimal sensors for p or each p in p_range", dss::cmd_place}},
        {"reconstruct", {"Reconstruct validation snapshots from optimal sensors", dss::cmd_reconstruct}},
        {"run-experiments", {"Run all validation experiments and write report.json", dss::cmd_run_experiments}},
        {"rpr", {"Relative projection residuals of optimal placements", dss::cmd_rpr}},
    };
    for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(dss::ExitCode::config_error);
    }

    try {
        dss::ConfigMap values;
        if (!config_path.empty()) values = dss::load_config_file(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw dss::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
            dss::set_config_value(values, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed) values["seed"] = *seed;
        if (!out_dir.empty()) values["out"] = out_dir;

        dss::CommandContext ctx{dss::RunConfig(values), {}, 1, &std::cout};
        ctx.out_dir = ctx.config.get_string("out", "");
        if (threads) {
            ctx.threads = *threads;
        } else {
            ctx.threads = static_cast<unsigned>(ctx.config.get_int("threads", dss::default_thread_count()));
        }
        if (ctx.threads < 1) throw dss::ConfigError("--threads must be >= 1");

        const auto* sub = app.get_subcommands().front();
        commands.at(sub->get_name()).second(ctx);
        return 0;
    } catch (const dss::Error& e) {
        std::cerr << "dss: error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "dss: numerical failure: " << e.what() << '\n';
        return static_cast<int>(dss::ExitCode::numerical_failure);
    }
}

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "schro4/experiments.hpp"

int main(int argc, char** argv) {
    using namespace schro4;
    CLI::App app{"Experiments for the clamped fourth-order Schroedinger inverse problem"};
    std::string mode_arg, config_path, out_dir;
    std::uint64_t seed = 0;
    app.add_option("mode", mode_arg, "solve | verify-identity | carleman-sweep | stability | reconstruct")->required();
    app.add_option("--config", config_path, "JSON configuration file")->required();
    app.add_option("--out", out_dir, "output directory (default: io.output_dir)");
    auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    ExperimentConfig cfg;
    try {
        const Mode mode = parse_mode(mode_arg);
        cfg = load_config(config_path);
        if (cfg.mode_declared && cfg.mode != mode)
            throw ConfigError(0, std::string("config declares mode '") + mode_name(cfg.mode) + "' but '" +
                                     mode_name(mode) + "' was requested");
        cfg.mode = mode;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s: %s\n", config_path.c_str(), e.what());
        return kConfigError;
    }
    if (*seed_opt) cfg.seed = seed;
    if (out_dir.empty()) out_dir = cfg.io.output_dir;

    const RunResult r = run_experiment(cfg, out_dir);
    std::cout << r.summary;
    for (const auto& f : r.files) std::cout << "wrote " << out_dir << "/" << f << "\n";
    return r.exit_code;
}

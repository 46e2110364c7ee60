#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semcom/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"semcom - diffusion-based semantic communication experiments"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    std::vector<std::uint64_t> seed_override;

    auto* run = app.add_subcommand("run", "run an experiment config and write CSV");
    run->add_option("config", config_path, "config file path")->required();
    run->add_option("--out", out_override, "output CSV path (overrides config)");
    run->add_option("--seed-override", seed_override, "replace the config's seed list");

    auto* validate = app.add_subcommand("validate", "parse a config and print its canonical form");
    validate->add_option("config", config_path, "config file path")->required();

    auto* presets = app.add_subcommand("presets", "list available experiments");

    CLI11_PARSE(app, argc, argv);

    try {
        if (presets->parsed()) {
            for (const auto& name : semcom::kExperimentNames)
                std::printf("%-20s %s\n", name.c_str(),
                            semcom::experiment_description(name).c_str());
            return 0;
        }

        semcom::ExperimentConfig cfg = semcom::ExperimentConfig::from_file(config_path);
        if (validate->parsed()) {
            std::fputs(cfg.canonical_text().c_str(), stdout);
            return 0;
        }

        if (!seed_override.empty()) cfg.seeds = seed_override;
        if (!out_override.empty()) cfg.out = out_override;

        const semcom::RunOutput out = semcom::run_experiment(cfg);
        const std::string path = cfg.resolved_out();
        semcom::write_csv(path, out.data);
        semcom::write_csv(path + ".timing.csv", out.timing);
        std::printf("wrote %zu rows to %s\n", out.data.rows.size(), path.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

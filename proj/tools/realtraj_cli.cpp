// realtraj: conditional two-level-atom trajectories under realistic detectors.

#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "realtraj/commands.hpp"
#include "realtraj/config.hpp"

namespace {

struct RunFlags {
    std::string config;
    realtraj::CommandOverrides overrides;
};

void add_run_flags(CLI::App* cmd, RunFlags& f)
{
    cmd->add_option("--config", f.config, "configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.overrides.seed, "override engine.seed");
    cmd->add_option("--out", f.overrides.out_dir, "override output.dir");
    cmd->add_option("--ensemble", f.overrides.ensemble, "override engine.n_trajectories")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mode", f.overrides.mode, "self-consistent | truth-driven | ideal-baseline");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Conditional dynamics of a driven two-level atom under realistic photodetection"};
    app.require_subcommand(1);

    RunFlags apd_flags, homodyne_flags, sweep_flags;
    auto* apd = app.add_subcommand("apd", "filter an avalanche photodiode record");
    add_run_flags(apd, apd_flags);
    auto* homodyne = app.add_subcommand("homodyne", "filter a homodyne photoreceiver record");
    add_run_flags(homodyne, homodyne_flags);
    auto* sweep = app.add_subcommand("sweep", "scaled purity versus drive strength");
    add_run_flags(sweep, sweep_flags);

    auto* steady = app.add_subcommand("steady", "unconditional steady state and its purity");
    double omega = 0.0;
    std::string steady_config;
    steady->add_option("--omega", omega, "Rabi frequency in units of Gamma")->check(CLI::NonNegativeNumber);
    steady->add_option("--config", steady_config, "take system.omega from a configuration file")
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        using namespace realtraj;
        auto run = [](const RunFlags& f, auto command) {
            const SimConfig cfg = apply_overrides(load_config(f.config), f.overrides);
            for (const auto& path : command(cfg, std::cerr)) {
                std::cout << path << '\n';
            }
        };
        if (apd->parsed()) {
            run(apd_flags, run_apd_command);
        } else if (homodyne->parsed()) {
            run(homodyne_flags, run_homodyne_command);
        } else if (sweep->parsed()) {
            run(sweep_flags, run_sweep_command);
        } else {
            SystemParams sys;
            if (!steady_config.empty()) {
                sys = load_config(steady_config).system;
            }
            if (steady->count("--omega") > 0) {
                sys.omega = omega;
            }
            sys.validate();
            run_steady_command(sys, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "realtraj: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

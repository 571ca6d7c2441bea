// Command implementations behind the `realtraj` executable.

#ifndef REALTRAJ_COMMANDS_HPP
#define REALTRAJ_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "realtraj/config.hpp"

namespace realtraj {

struct CommandOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> ensemble;
    std::optional<std::string> mode;
};

SimConfig apply_overrides(SimConfig cfg, const CommandOverrides& o);

/// Each run command writes its CSV files plus a JSON sidecar into cfg.output_dir and
/// returns the paths written. A single trajectory is ensemble member 0 of the master seed.
std::vector<std::string> run_apd_command(const SimConfig& cfg, std::ostream& log);
std::vector<std::string> run_homodyne_command(const SimConfig& cfg, std::ostream& log);
std::vector<std::string> run_sweep_command(const SimConfig& cfg, std::ostream& log);

/// Prints the unconditional steady state and its purity.
void run_steady_command(const SystemParams& sys, std::ostream& out);

}  // namespace realtraj

#endif  // REALTRAJ_COMMANDS_HPP

// Flat key-value run configuration.
//
//   # comment
//   system.omega = 10
//   detector = apd
//   apd.eta = 0.8
//
// Keys are dotted section paths; every key is listed in README.md. Unknown keys,
// duplicates, type mismatches and out-of-range values are rejected with the key
// path in the message.

#ifndef REALTRAJ_CONFIG_HPP
#define REALTRAJ_CONFIG_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "realtraj/apd_filter.hpp"
#include "realtraj/engine.hpp"
#include "realtraj/homodyne_filter.hpp"
#include "realtraj/tla.hpp"

namespace realtraj {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class DetectorKind { apd, homodyne };

struct SimConfig {
    SystemParams system;
    DetectorKind detector = DetectorKind::apd;
    std::optional<ApdParams> apd;
    std::optional<ReceiverParams> receiver;            // given directly in dimensionless form
    std::optional<PhysicalReceiverParams> receiver_si; // or as circuit parameters
    GridConfig grid;
    EngineConfig engine; // engine.dt = 0 selects the detector's default step
    std::string mode = "self-consistent";
    BlochVector initial{0.0, 0.0, -1.0};
    std::string output_dir = "out";
    std::string output_prefix = "run";
    std::vector<double> sweep_omegas{1.0, 2.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<double> sweep_phases{0.0, 1.5707963267948966};

    /// Dimensionless receiver parameters, converting from SI when needed.
    ReceiverParams receiver_params() const;
    /// Canonical text form; parse_config(to_text()) reproduces this config.
    std::string to_text() const;
    /// Re-checks every invariant (used after command-line overrides).
    void validate() const;
};

SimConfig parse_config(const std::string& text);
SimConfig load_config(const std::string& path);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace realtraj

#endif  // REALTRAJ_CONFIG_HPP

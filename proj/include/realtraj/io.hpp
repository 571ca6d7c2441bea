// CSV emission with a fixed, versioned column contract, plus JSON sidecars.
//
// Trajectory CSV columns:  t, x_c, y_c, z_c, purity, then
//   photon counter:        count
//   photoreceiver:         voltage (ideal baseline: current)
//   truth-driven runs:     x_true, y_true, z_true
// Avalanche events:        t_avalanche
// Ensemble CSV:            t, mean_x, mean_y, mean_z, se_x, se_y, se_z, mean_purity, se_purity
// Sweep CSV:               omega, phase, p, p_se, p_u, scaled_p, scaled_p_se
//
// Floats are written as the shortest decimal that round-trips.

#ifndef REALTRAJ_IO_HPP
#define REALTRAJ_IO_HPP

#include <string>
#include <vector>

#include "json.hpp"
#include "realtraj/engine.hpp"
#include "realtraj/metrics.hpp"

namespace realtraj {

inline constexpr const char* kCsvContract = "realtraj-csv/1";

enum class Channel { counter, receiver, receiver_current };

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Column by name; throws if absent.
    std::vector<double> column(const std::string& name) const;
};

std::vector<std::string> trajectory_columns(Channel channel, bool with_truth);

void emit_trajectory(const TrajectoryRecord& record, Channel channel, const std::string& path);
void emit_events(const std::vector<double>& avalanche_times, const std::string& path);
void emit_ensemble(const EnsembleStats& stats, const std::string& path);
void emit_table(const std::vector<SweepRow>& rows, const std::string& path);
void emit_summary(const nlohmann::json& summary, const std::string& path);

CsvTable read_csv(const std::string& path);
nlohmann::json read_summary(const std::string& path);

nlohmann::json to_json(const PurityReport& r);

}  // namespace realtraj

#endif  // REALTRAJ_IO_HPP

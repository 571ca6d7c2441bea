#ifndef REALTRAJ_METRICS_HPP
#define REALTRAJ_METRICS_HPP

#include <functional>
#include <vector>

#include "realtraj/engine.hpp"
#include "realtraj/tla.hpp"

namespace realtraj {

/// Purity of the unconditional stationary state.
double unconditional_purity(const SystemParams& sys);

struct ScaledPurity {
    double value = 0.0;
    /// False when p_u = 1; value then holds the unscaled p.
    bool scaled = true;
};

/// (p - p_u) / (1 - p_u)
ScaledPurity scaled_purity(double p, double p_u);

struct PurityReport {
    double p = 0.0;
    double p_se = 0.0;
    double p_u = 0.0;
    double scaled_p = 0.0;
    double scaled_p_se = 0.0;
    bool scaled = true;
    double t_burn = 0.0;
    double t_end = 0.0;
    std::size_t n_trajectories = 0;
};

PurityReport purity_report(const EnsembleStats& stats, const SystemParams& sys);

struct SweepRow {
    double omega = 0.0;
    double phase = 0.0;
    PurityReport report;
};

/// Builds the trajectory model for one (Omega, phase) point.
using DriveModel = std::function<TrajectoryModel(const SystemParams& sys, double phase)>;

/// Runs one ensemble per (Omega, phase) pair, Omega-major, all with the same engine config
/// and master seed.
std::vector<SweepRow> purity_vs_drive_sweep(const DriveModel& model, const SystemParams& base,
                                            const std::vector<double>& omegas, const std::vector<double>& phases,
                                            const EngineConfig& cfg);

}  // namespace realtraj

#endif  // REALTRAJ_METRICS_HPP

// Photon counting with an avalanche photodiode.
//
// The detector has three classical states: 0 (ready), 1 (avalanche building)
// and 2 (registered, dead). The filter tracks the joint unnormalized operators
// rho0, rho1, rho2 whose traces are the detector-state probabilities; the atom
// state conditioned on the avalanche record is their normalized sum.

#ifndef REALTRAJ_APD_FILTER_HPP
#define REALTRAJ_APD_FILTER_HPP

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "realtraj/engine.hpp"
#include "realtraj/tla.hpp"

namespace realtraj {

struct ApdParams {
    double eta = 1.0;      // quantum efficiency
    double gamma_r = 1.0;  // avalanche response rate, units of Gamma
    double tau_dd = 0.0;   // dead time, units of 1/Gamma
    double gamma_dk = 0.0; // dark count rate, units of Gamma

    void validate() const;
};

/// Default step bound 1e-3 / max(Gamma, Omega, gamma_r, gamma_dk).
double apd_dt_max(const SystemParams& sys, const ApdParams& apd);

struct ApdSupersystem {
    DensityOperator rho0;
    DensityOperator rho1;
    DensityOperator rho2;
    std::deque<double> pending_resets; // strictly increasing
    std::int64_t count = 0;
    double log_weight = 0.0;
    double time = 0.0;

    /// Detector ready with certainty, atom in `atom`.
    static ApdSupersystem ready(const DensityOperator& atom);

    double total_trace() const { return rho0.trace() + rho1.trace() + rho2.trace(); }
    bool in_dead_window() const { return !pending_resets.empty(); }
};

/// Advances the no-avalanche evolution by dt using pre-step values on the right-hand side.
/// Throws if dt exceeds the step bound or a reset falls inside (time, time + dt).
ApdSupersystem drift_step(const ApdSupersystem& state, const SystemParams& sys, const ApdParams& apd, double dt,
                          std::optional<double> dt_max = std::nullopt);

/// gamma_r dt Tr[rho1] / Tr[rho0 + rho1 + rho2], clamped to [0, 1].
double avalanche_probability(const ApdSupersystem& state, const ApdParams& apd, double dt);

/// Registers an avalanche at time t: (rho0, rho1, rho2) -> (0, 0, rho2 + rho1),
/// and schedules the detector reset at t + tau_dd.
ApdSupersystem apply_avalanche(const ApdSupersystem& state, double t, const ApdParams& apd);

/// Returns the detector to the ready state: (rho0, rho1, rho2) -> (rho0 + rho2, rho1, 0).
ApdSupersystem apply_reset(const ApdSupersystem& state);

/// (rho0 + rho1 + rho2) / Tr[.]
DensityOperator conditioned_state(const ApdSupersystem& state);

/// Rescales the triple to unit total trace when it has dropped below `threshold`,
/// accumulating the logarithm of the factor in log_weight.
void renormalize_if_small(ApdSupersystem& state, double threshold = 1e-6);

struct ApdRunOptions {
    double dt = 0.0; // 0 selects apd_dt_max; an explicit value overrides the bound
    double t_final = 20.0;
    int sample_stride = 100;
    std::uint64_t seed = 1;
    DensityOperator initial_atom = DensityOperator::ground();
    /// When set, the filter follows these avalanche times instead of sampling its own.
    std::optional<std::vector<double>> record;
    /// Assert zero avalanche probability throughout every dead window.
    bool check_dead_windows = false;
};

struct ApdRun {
    TrajectoryRecord record;
    /// Mean of E[dN]/dt over the run; the filter's predicted avalanche rate.
    double predicted_rate = 0.0;
    /// Conditioned state immediately after each avalanche, in record order.
    std::vector<BlochVector> post_avalanche;
};

ApdRun run_apd_trajectory(const SystemParams& sys, const ApdParams& apd, const ApdRunOptions& opts);

/// Explicit hidden-reality simulation: ideal quantum jumps of the atom feeding a
/// classical three-state detector with efficiency, dark counts, response and dead time.
struct TruthRun {
    std::vector<double> avalanche_times;
    std::vector<double> emission_times;
    std::vector<double> times;
    std::vector<BlochVector> true_state; // pure atom state at each sample time
};

TruthRun truth_oracle_run(const SystemParams& sys, const ApdParams& apd, const ApdRunOptions& opts);

/// Ideal direct detection of every emission (unit efficiency, instantaneous, no dead time or
/// dark counts): the pure jump trajectory of the hidden truth, with emissions as the record.
TrajectoryRecord ideal_jump_record(const SystemParams& sys, const ApdRunOptions& opts);

/// Trajectory model for run_ensemble; the seed in `opts` is replaced per trajectory.
/// With `truth_driven`, each trajectory first draws a hidden-truth record and filters it.
TrajectoryModel make_apd_model(const SystemParams& sys, const ApdParams& apd, const ApdRunOptions& opts,
                               bool truth_driven = false);

}  // namespace realtraj

#endif  // REALTRAJ_APD_FILTER_HPP

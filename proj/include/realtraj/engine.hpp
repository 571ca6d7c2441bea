// Shared time-stepping and ensemble machinery for both detector filters.

#ifndef REALTRAJ_ENGINE_HPP
#define REALTRAJ_ENGINE_HPP

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "realtraj/tla.hpp"

namespace realtraj {

struct EngineConfig {
    double dt = 1e-4;        // integration step, units of 1/Gamma
    double t_final = 20.0;   // horizon, units of 1/Gamma
    int sample_stride = 100; // integration steps per output sample
    std::uint64_t master_seed = 1;
    int n_trajectories = 1;
    double t_burn = 10.0; // start of the stationary-purity window
    unsigned n_threads = 0; // 0 = hardware concurrency

    void validate() const;
    /// Number of whole integration steps covering [0, t_final].
    std::int64_t n_steps() const;
};

/// One filtered trajectory sampled every `sample_stride` steps, starting at t = 0.
struct TrajectoryRecord {
    std::string mode;
    std::uint64_t seed = 0;

    std::vector<double> times;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;
    std::vector<double> purity;

    // Photon counter channel.
    std::vector<std::int64_t> counts;   // registered avalanches up to each sample time
    std::vector<double> avalanche_times;

    // Photoreceiver channel: record averaged over the preceding sample window
    // (dimensionless output voltage, or photocurrent for the ideal baseline).
    std::vector<double> voltage;

    // Hidden truth, filled only by truth-driven runs.
    std::vector<double> x_true;
    std::vector<double> y_true;
    std::vector<double> z_true;

    std::size_t size() const { return times.size(); }
    void push_state(double t, const DensityOperator& rho);
    void push_truth(const BlochVector& b);
    BlochVector bloch(std::size_t i) const { return {x[i], y[i], z[i]}; }
    BlochVector truth(std::size_t i) const { return {x_true[i], y_true[i], z_true[i]}; }
};

/// Per-trajectory seed: splitmix64 finalizer applied to master + golden_gamma * (index + 1).
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

struct Interval {
    double begin;
    double end;
};

/// Partitions (t, t + dt] at every event strictly inside it. An event within
/// round-off of t + dt belongs to the end of the single interval.
std::vector<Interval> split_step_at_events(double t, double dt, const std::deque<double>& events);

/// Relative tolerance used to decide that an event time coincides with a step boundary.
double event_tolerance(double t);

using TrajectoryModel = std::function<TrajectoryRecord(std::uint64_t seed)>;

struct TrajectoryFailure {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::string message;
};

struct EnsembleStats {
    std::vector<double> times;
    std::vector<double> mean_x, mean_y, mean_z;
    std::vector<double> se_x, se_y, se_z;
    std::vector<double> mean_purity, se_purity;

    /// Time-averaged purity of each completed trajectory over [t_burn, end], in index order.
    std::vector<double> window_purity;
    double stationary_purity = 0.0;
    double stationary_purity_se = 0.0;
    double t_burn = 0.0;
    double t_end = 0.0;

    std::size_t n_completed = 0;
    std::vector<TrajectoryFailure> failures;
    std::vector<TrajectoryRecord> records; // only with keep_records

    BlochVector mean_bloch(std::size_t i) const { return {mean_x[i], mean_y[i], mean_z[i]}; }
    /// Standard error of the trace distance between the ensemble mean state and a fixed state:
    /// 1/2 sqrt(se_x^2 + se_y^2 + se_z^2).
    double trace_distance_se(std::size_t i) const;
};

/// Runs `cfg.n_trajectories` independent trajectories with seeds derive_seed(master, i)
/// and reduces them in index order, so results do not depend on scheduling.
/// A trajectory that throws is recorded in `failures` and excluded from the statistics.
EnsembleStats run_ensemble(const TrajectoryModel& model, const EngineConfig& cfg, bool keep_records = false);

/// Mean of the sampled purity over samples with t >= t_burn.
double window_average_purity(const TrajectoryRecord& record, double t_burn);

}  // namespace realtraj

#endif  // REALTRAJ_ENGINE_HPP

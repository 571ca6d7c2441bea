// Homodyne detection through a bandwidth-limited, Johnson-noisy photoreceiver.
//
// The receiver voltage is a classical continuous detector variable, so the
// filter state is an operator-valued density rho(v) over the dimensionless
// voltage v = V sqrt(C / 4 k_B T). It is discretized on a uniform grid of
// finite-volume cells and advanced with a conservative explicit scheme.

#ifndef REALTRAJ_HOMODYNE_FILTER_HPP
#define REALTRAJ_HOMODYNE_FILTER_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "realtraj/engine.hpp"
#include "realtraj/tla.hpp"

namespace realtraj {

inline constexpr double kHbar = 1.054571817e-34;         // J s
inline constexpr double kElectronCharge = 1.602176634e-19; // C

/// Circuit and optical parameters in SI units.
struct PhysicalReceiverParams {
    double R = 1e4;      // feedback resistance, ohm
    double C = 1e-12;    // feedback capacitance, farad
    double kT = 4.14e-21; // k_B T, joule
    double P = 1e-3;     // local oscillator power, watt
    double omega0 = 2.4e15; // optical angular frequency, rad/s
    double e_charge = kElectronCharge;
    double eta = 1.0;
    double phi = 0.0;

    void validate() const;
};

struct ReceiverParams {
    double eta = 1.0;
    double phi = 0.0;
    double gamma = 1.0;       // receiver bandwidth 1/RC, units of Gamma
    double noise_power = 1.0; // Johnson-to-vacuum noise power ratio N

    void validate() const;
};

struct DimensionlessReceiver {
    ReceiverParams params;
    double voltage_scale = 1.0; // volts per unit of v: V = voltage_scale * v
};

/// gamma = 1/(R C Gamma_si), N = 4 kT hbar omega0 / (eta R P e^2), scale = sqrt(4 kT / C).
DimensionlessReceiver physical_to_dimensionless(const PhysicalReceiverParams& phys, double gamma_si);

struct GridConfig {
    int n_points = 512;
    double n_sigma = 8.0; // stationary standard deviations covered on each side
};

/// Half width n_sigma / sqrt(2N) + sqrt(Gamma eta / (gamma N)); the second term bounds the
/// stationary offset of v produced by the atomic signal.
double grid_half_width(const ReceiverParams& recv, const SystemParams& sys, double n_sigma);

struct VoltageGrid {
    double v_min = -1.0;
    double v_max = 1.0;
    std::vector<DensityOperator> values; // rho(v_i) on uniform nodes v_min..v_max
    double log_weight = 0.0;
    double clipped_mass = 0.0; // trace removed by negative-node clipping

    VoltageGrid() = default;
    VoltageGrid(double lo, double hi, int n_points);

    /// atom (x) N(0, 1/(2N)) on the default bounds.
    static VoltageGrid stationary(const DensityOperator& atom, const ReceiverParams& recv, const SystemParams& sys,
                                  const GridConfig& cfg);
    /// atom (x) Gaussian(mean, variance) on [lo, hi], normalized to unit total trace.
    static VoltageGrid gaussian(const DensityOperator& atom, double lo, double hi, int n_points, double mean,
                                double variance);

    int size() const { return static_cast<int>(values.size()); }
    double spacing() const { return (v_max - v_min) / static_cast<double>(values.size() - 1); }
    double node(int i) const { return v_min + spacing() * static_cast<double>(i); }

    /// sum_i Tr[rho(v_i)] dv
    double total_trace() const;
    /// Mean of v under the trace density.
    double mean_v() const;
    double variance_v() const;
    /// Tr[rho(v_min)] + Tr[rho(v_max)] relative to the total trace.
    double boundary_ratio() const;
};

/// Largest stable step 0.25 dv^2 N / gamma.
double cfl_bound(const VoltageGrid& grid, const ReceiverParams& recv);

/// Default step: the CFL bound, capped at 0.01 / max(Gamma, Omega).
double homodyne_dt(const VoltageGrid& grid, const ReceiverParams& recv, const SystemParams& sys);

/// Deterministic part of the operator Fokker-Planck equation:
///   L rho + (gamma/2N) d2/dv2 rho + gamma d/dv (v rho) + d/dv k [e^{-i phi} sigma rho + e^{i phi} rho sigma^dag],
/// k = sqrt(gamma Gamma eta / N). The v-derivatives are written in flux form with zero flux
/// through the outer faces, so the total trace is conserved up to round-off.
/// `signal` = false drops the atom-to-voltage coupling term.
/// Throws on CFL violation or when the boundary-mass guard (1e-8 of the total) is breached.
VoltageGrid fp_deterministic_step(VoltageGrid grid, const SystemParams& sys, const ReceiverParams& recv, double dt,
                                  bool signal = true);

enum class MeasurementMode {
    self_consistent, // input is the Johnson innovation dW_J ~ N(0, dt)
    record_driven,   // input is the measured dimensionless voltage
};

/// rho(v) += sqrt(gamma) dW_J (v - <v>) rho(v). In record-driven mode
/// sqrt(gamma) dW_J is formed as dt gamma (measured - <v>).
/// Nodes whose trace drops below -1e-12 are zeroed and the removed mass is logged.
VoltageGrid fp_measurement_update(VoltageGrid grid, double input, const ReceiverParams& recv, double dt,
                                  MeasurementMode mode);

/// Reweights rho(v) by the Gaussian likelihood of the same input, exp(a (v - <v>) - gamma dt (v - <v>)^2 / 2)
/// with a the factor multiplying (v - <v>) in fp_measurement_update, then rescales to the prior total
/// trace. Agrees with fp_measurement_update to O(dt) but keeps every node non-negative when
/// sqrt(gamma dt) |v - <v>| is not small across the grid.
VoltageGrid fp_likelihood_update(VoltageGrid grid, double input, const ReceiverParams& recv, double dt,
                                 MeasurementMode mode);

/// One draw of the dimensionless output voltage: <v> + N(0, 1) / sqrt(gamma dt).
double voltage_sample(const VoltageGrid& grid, const ReceiverParams& recv, double dt, std::mt19937_64& rng);

/// Normalized atom state: sum_i rho(v_i) dv / total.
DensityOperator marginal_state(const VoltageGrid& grid);

/// Exact Bayes conditioning of a discrete voltage distribution (weights summing to one) on a
/// measured output voltage with Gaussian likelihood of variance 4 k_B T R / dt.
std::vector<double> bayes_update_oracle(std::span<const double> voltages, std::span<const double> prob,
                                        double measured_voltage, const PhysicalReceiverParams& phys,
                                        double dt_seconds);

/// Euler-Maruyama step of the ideal homodyne stochastic master equation.
DensityOperator ideal_homodyne_step(const DensityOperator& rho, const SystemParams& sys, const ReceiverParams& recv,
                                    double dt, double xi_increment);

/// Photocurrent in amperes for LO phase phys.phi; xi is the vacuum white noise in s^-1/2
/// and the decay rate is sys.gamma_si.
double homodyne_current(const DensityOperator& rho, const PhysicalReceiverParams& phys, const SystemParams& sys,
                        double xi);

/// I + V/R + C dV/dt = 0, one explicit step of dt seconds.
double circuit_ode_step(double V, double I, const PhysicalReceiverParams& phys, double dt);

/// The same circuit in dimensionless units: v += -gamma v dt - sqrt(gamma / (eta N)) dJ, where
/// dJ = eta sqrt(Gamma) <x_phi> dt + sqrt(eta) dxi is the scaled photocurrent increment.
double circuit_step_dimensionless(double v, double current_increment, const ReceiverParams& recv, double dt);

enum class HomodyneMode { self_consistent, truth_driven, ideal_baseline };

std::string to_string(HomodyneMode mode);
HomodyneMode homodyne_mode_from_string(const std::string& name);

struct HomodyneRunOptions {
    double dt = 0.0; // 0 selects homodyne_dt
    double t_final = 20.0;
    int sample_stride = 10;
    std::uint64_t seed = 1;
    DensityOperator initial_atom = DensityOperator::ground();
    GridConfig grid;
    HomodyneMode mode = HomodyneMode::self_consistent;
    /// Use fp_measurement_update instead of fp_likelihood_update.
    bool linearized_update = false;
    bool signal = true;
    /// Check Hermiticity of every node at each sample.
    bool check_hermitian = false;
};

struct HomodyneRun {
    TrajectoryRecord record;
    double dt = 0.0;
    double max_boundary_ratio = 0.0;
    double max_step_trace_change = 0.0; // largest relative total-trace change over one full step
    double clipped_mass = 0.0;
    VoltageGrid final_grid;
};

HomodyneRun run_homodyne_trajectory(const SystemParams& sys, const ReceiverParams& recv,
                                    const HomodyneRunOptions& opts);

/// Trajectory model for run_ensemble; the seed in `opts` is replaced per trajectory.
TrajectoryModel make_homodyne_model(const SystemParams& sys, const ReceiverParams& recv,
                                    const HomodyneRunOptions& opts);

}  // namespace realtraj

#endif  // REALTRAJ_HOMODYNE_FILTER_HPP

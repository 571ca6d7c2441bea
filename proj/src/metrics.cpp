#include "realtraj/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace realtraj {

double unconditional_purity(const SystemParams& sys)
{
    return purity(steady_state(sys));
}

ScaledPurity scaled_purity(double p, double p_u)
{
    if (std::abs(1.0 - p_u) < 1e-12) {
        return {p, false};
    }
    return {(p - p_u) / (1.0 - p_u), true};
}

PurityReport purity_report(const EnsembleStats& stats, const SystemParams& sys)
{
    if (stats.n_completed == 0) {
        throw std::invalid_argument("purity_report: ensemble has no completed trajectories");
    }
    PurityReport r;
    r.p = stats.stationary_purity;
    r.p_se = stats.stationary_purity_se;
    r.p_u = unconditional_purity(sys);
    const ScaledPurity s = scaled_purity(r.p, r.p_u);
    r.scaled_p = s.value;
    r.scaled = s.scaled;
    r.scaled_p_se = s.scaled ? r.p_se / (1.0 - r.p_u) : r.p_se;
    r.t_burn = stats.t_burn;
    r.t_end = stats.t_end;
    r.n_trajectories = stats.n_completed;
    return r;
}

std::vector<SweepRow> purity_vs_drive_sweep(const DriveModel& model, const SystemParams& base,
                                            const std::vector<double>& omegas, const std::vector<double>& phases,
                                            const EngineConfig& cfg)
{
    if (omegas.empty() || phases.empty()) {
        throw std::invalid_argument("purity_vs_drive_sweep: empty sweep");
    }
    std::vector<SweepRow> rows;
    for (double omega : omegas) {
        SystemParams sys = base;
        sys.omega = omega;
        sys.validate();
        for (double phase : phases) {
            const EnsembleStats stats = run_ensemble(model(sys, phase), cfg);
            if (!stats.failures.empty()) {
                throw std::runtime_error("purity_vs_drive_sweep: trajectory failed at omega " +
                                         std::to_string(omega) + ": " + stats.failures.front().message);
            }
            rows.push_back({omega, phase, purity_report(stats, sys)});
        }
    }
    return rows;
}

}  // namespace realtraj

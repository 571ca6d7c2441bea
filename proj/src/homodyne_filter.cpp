#include "realtraj/homodyne_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace realtraj {

namespace {

constexpr double kBoundaryGuard = 1e-8;
constexpr double kClipThreshold = -1e-12;

std::string format_number(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

// Euler-Maruyama can leave the Bloch ball by O(dt); pull the state back onto it.
DensityOperator project_to_state(const DensityOperator& rho)
{
    BlochVector b = expectations(rho);
    const double len2 = b.norm_squared();
    if (len2 > 1.0) {
        const double s = 1.0 / std::sqrt(len2);
        b = {b.x * s, b.y * s, b.z * s};
    }
    return DensityOperator::from_bloch(b.x, b.y, b.z);
}

}  // namespace

void PhysicalReceiverParams::validate() const
{
    if (!(R > 0.0) || !(C > 0.0) || !(kT > 0.0) || !(P > 0.0) || !(omega0 > 0.0) || !(e_charge > 0.0)) {
        throw std::invalid_argument("receiver: R, C, kT, P, omega0 and e_charge must all be > 0");
    }
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("receiver.eta must lie in (0, 1]");
    }
}

void ReceiverParams::validate() const
{
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("receiver.eta must lie in (0, 1], got " + std::to_string(eta));
    }
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("receiver.gamma must be > 0");
    }
    if (!(noise_power > 0.0)) {
        throw std::invalid_argument("receiver.N must be > 0");
    }
}

DimensionlessReceiver physical_to_dimensionless(const PhysicalReceiverParams& phys, double gamma_si)
{
    phys.validate();
    if (!(gamma_si > 0.0)) {
        throw std::invalid_argument("physical_to_dimensionless: Gamma must be > 0");
    }
    DimensionlessReceiver out;
    out.params.eta = phys.eta;
    out.params.phi = phys.phi;
    out.params.gamma = 1.0 / (phys.R * phys.C * gamma_si);
    out.params.noise_power =
        4.0 * phys.kT * kHbar * phys.omega0 / (phys.eta * phys.R * phys.P * phys.e_charge * phys.e_charge);
    out.voltage_scale = std::sqrt(4.0 * phys.kT / phys.C);
    return out;
}

double grid_half_width(const ReceiverParams& recv, const SystemParams& sys, double n_sigma)
{
    const double sigma = std::sqrt(1.0 / (2.0 * recv.noise_power));
    const double offset = std::sqrt(sys.gamma * recv.eta / (recv.gamma * recv.noise_power));
    return n_sigma * sigma + offset;
}

VoltageGrid::VoltageGrid(double lo, double hi, int n_points) : v_min(lo), v_max(hi)
{
    if (n_points < 3 || !(hi > lo)) {
        throw std::invalid_argument("VoltageGrid: need at least 3 nodes and v_max > v_min");
    }
    values.assign(static_cast<std::size_t>(n_points), DensityOperator::zero());
}

VoltageGrid VoltageGrid::gaussian(const DensityOperator& atom, double lo, double hi, int n_points, double mean,
                                  double variance)
{
    VoltageGrid g(lo, hi, n_points);
    double mass = 0.0;
    std::vector<double> w(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double d = g.node(i) - mean;
        w[static_cast<std::size_t>(i)] = std::exp(-0.5 * d * d / variance);
        mass += w[static_cast<std::size_t>(i)];
    }
    const double scale = 1.0 / (mass * g.spacing() * atom.trace());
    for (int i = 0; i < n_points; ++i) {
        g.values[static_cast<std::size_t>(i)] = atom * (w[static_cast<std::size_t>(i)] * scale);
    }
    return g;
}

VoltageGrid VoltageGrid::stationary(const DensityOperator& atom, const ReceiverParams& recv,
                                    const SystemParams& sys, const GridConfig& cfg)
{
    recv.validate();
    const double half = grid_half_width(recv, sys, cfg.n_sigma);
    return gaussian(atom, -half, half, cfg.n_points, 0.0, 1.0 / (2.0 * recv.noise_power));
}

double VoltageGrid::total_trace() const
{
    double sum = 0.0;
    for (const auto& r : values) {
        sum += r.trace();
    }
    return sum * spacing();
}

double VoltageGrid::mean_v() const
{
    double sum = 0.0;
    double wsum = 0.0;
    for (int i = 0; i < size(); ++i) {
        const double tr = values[static_cast<std::size_t>(i)].trace();
        sum += tr * node(i);
        wsum += tr;
    }
    if (!(wsum > 0.0)) {
        throw std::invalid_argument("VoltageGrid: total trace is zero");
    }
    return sum / wsum;
}

double VoltageGrid::variance_v() const
{
    const double m = mean_v();
    double sum = 0.0;
    double wsum = 0.0;
    for (int i = 0; i < size(); ++i) {
        const double tr = values[static_cast<std::size_t>(i)].trace();
        const double d = node(i) - m;
        sum += tr * d * d;
        wsum += tr;
    }
    return sum / wsum;
}

double VoltageGrid::boundary_ratio() const
{
    return (values.front().trace() + values.back().trace()) / total_trace();
}

double cfl_bound(const VoltageGrid& grid, const ReceiverParams& recv)
{
    const double dv = grid.spacing();
    return 0.25 * dv * dv * recv.noise_power / recv.gamma;
}

double homodyne_dt(const VoltageGrid& grid, const ReceiverParams& recv, const SystemParams& sys)
{
    return std::min(cfl_bound(grid, recv), 1e-2 / std::max(sys.gamma, sys.omega));
}

VoltageGrid fp_deterministic_step(VoltageGrid grid, const SystemParams& sys, const ReceiverParams& recv, double dt,
                                  bool signal)
{
    const double limit = cfl_bound(grid, recv);
    if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12)) {
        throw std::invalid_argument("fp_deterministic_step: dt " + format_number(dt) + " violates the CFL bound " +
                                    format_number(limit));
    }
    const double ratio = grid.boundary_ratio();
    if (!(ratio <= kBoundaryGuard)) {
        throw std::runtime_error("fp_deterministic_step: boundary mass ratio " + format_number(ratio) +
                                 " exceeds guard; widen the voltage grid");
    }

    const auto n = static_cast<std::size_t>(grid.size());
    const double dv = grid.spacing();
    const double diff = recv.gamma / (2.0 * recv.noise_power) / dv;
    const double coupling = signal ? std::sqrt(recv.gamma * sys.gamma * recv.eta / recv.noise_power) : 0.0;
    auto& rho = grid.values;

    // flux[j] sits on the face between nodes j-1 and j; the outer faces carry none.
    std::vector<DensityOperator> flux(n + 1);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double vf = grid.v_min + (static_cast<double>(j) + 0.5) * dv;
        const DensityOperator avg = 0.5 * (rho[j] + rho[j + 1]);
        DensityOperator f = avg * (recv.gamma * vf);
        f.add_scaled(rho[j + 1] - rho[j], diff);
        if (coupling != 0.0) {
            f.add_scaled(quadrature_super(avg, recv.phi), coupling);
        }
        flux[j + 1] = f;
    }
    for (std::size_t i = 0; i < n; ++i) {
        DensityOperator d = liouvillian(rho[i], sys);
        d.add_scaled(flux[i + 1] - flux[i], 1.0 / dv);
        rho[i].add_scaled(d, dt);
    }
    return grid;
}

VoltageGrid fp_measurement_update(VoltageGrid grid, double input, const ReceiverParams& recv, double dt,
                                  MeasurementMode mode)
{
    if (!(grid.total_trace() > 0.0)) {
        throw std::invalid_argument("fp_measurement_update: total trace is zero");
    }
    const double m = grid.mean_v();
    const double a =
        mode == MeasurementMode::self_consistent ? std::sqrt(recv.gamma) * input : dt * recv.gamma * (input - m);
    const double dv = grid.spacing();
    for (int i = 0; i < grid.size(); ++i) {
        auto& r = grid.values[static_cast<std::size_t>(i)];
        r *= 1.0 + a * (grid.node(i) - m);
        const double tr = r.trace();
        if (tr < kClipThreshold) {
            grid.clipped_mass += tr * dv;
            r = DensityOperator::zero();
        }
    }
    return grid;
}

VoltageGrid fp_likelihood_update(VoltageGrid grid, double input, const ReceiverParams& recv, double dt,
                                 MeasurementMode mode)
{
    const double total = grid.total_trace();
    if (!(total > 0.0)) {
        throw std::invalid_argument("fp_likelihood_update: total trace is zero");
    }
    const double m = grid.mean_v();
    const double a =
        mode == MeasurementMode::self_consistent ? std::sqrt(recv.gamma) * input : dt * recv.gamma * (input - m);
    const double b = 0.5 * recv.gamma * dt;
    std::vector<double> logw(grid.values.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid.size(); ++i) {
        const double d = grid.node(i) - m;
        logw[static_cast<std::size_t>(i)] = a * d - b * d * d;
        peak = std::max(peak, logw[static_cast<std::size_t>(i)]);
    }
    double reweighted = 0.0;
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        logw[i] = std::exp(logw[i] - peak);
        reweighted += logw[i] * grid.values[i].trace();
    }
    reweighted *= grid.spacing();
    if (!(reweighted > 0.0)) {
        throw std::runtime_error("fp_likelihood_update: likelihood vanishes on the grid");
    }
    const double scale = total / reweighted;
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        grid.values[i] *= logw[i] * scale;
    }
    return grid;
}

double voltage_sample(const VoltageGrid& grid, const ReceiverParams& recv, double dt, std::mt19937_64& rng)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    return grid.mean_v() + gauss(rng) / std::sqrt(recv.gamma * dt);
}

DensityOperator marginal_state(const VoltageGrid& grid)
{
    DensityOperator sum;
    for (const auto& r : grid.values) {
        sum += r;
    }
    const double tr = sum.trace();
    if (!(tr > 0.0)) {
        throw std::invalid_argument("marginal_state: total trace is zero");
    }
    return sum * (1.0 / tr);
}

std::vector<double> bayes_update_oracle(std::span<const double> voltages, std::span<const double> prob,
                                        double measured_voltage, const PhysicalReceiverParams& phys,
                                        double dt_seconds)
{
    if (voltages.size() != prob.size() || voltages.empty()) {
        throw std::invalid_argument("bayes_update_oracle: voltage and probability grids differ in size");
    }
    const double variance = 4.0 * phys.kT * phys.R / dt_seconds;
    std::vector<double> logl(prob.size(), -std::numeric_limits<double>::infinity());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prob.size(); ++i) {
        if (prob[i] > 0.0) {
            const double d = measured_voltage - voltages[i];
            logl[i] = -0.5 * d * d / variance;
            peak = std::max(peak, logl[i]);
        }
    }
    std::vector<double> post(prob.size(), 0.0);
    double norm = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        if (prob[i] > 0.0) {
            post[i] = prob[i] * std::exp(logl[i] - peak);
            norm += post[i];
        }
    }
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw std::domain_error("bayes_update_oracle: degenerate likelihood normalization");
    }
    for (double& p : post) {
        p /= norm;
    }
    return post;
}

DensityOperator ideal_homodyne_step(const DensityOperator& rho, const SystemParams& sys, const ReceiverParams& recv,
                                    double dt, double xi_increment)
{
    DensityOperator out = rho;
    out.add_scaled(liouvillian(rho, sys), dt);
    out.add_scaled(h_super(rho, recv.phi), std::sqrt(recv.eta * sys.gamma) * xi_increment);
    return out;
}

double homodyne_current(const DensityOperator& rho, const PhysicalReceiverParams& phys, const SystemParams& sys,
                        double xi)
{
    const double lo = phys.e_charge * std::sqrt(phys.P / (kHbar * phys.omega0));
    return lo * (phys.eta * std::sqrt(sys.gamma_si) * quadrature_expectation(rho, phys.phi) + std::sqrt(phys.eta) * xi);
}

double circuit_ode_step(double V, double I, const PhysicalReceiverParams& phys, double dt)
{
    return V - dt * (I / phys.C + V / (phys.R * phys.C));
}

double circuit_step_dimensionless(double v, double current_increment, const ReceiverParams& recv, double dt)
{
    return v - recv.gamma * v * dt - std::sqrt(recv.gamma / (recv.eta * recv.noise_power)) * current_increment;
}

std::string to_string(HomodyneMode mode)
{
    switch (mode) {
    case HomodyneMode::self_consistent:
        return "self-consistent";
    case HomodyneMode::truth_driven:
        return "truth-driven";
    case HomodyneMode::ideal_baseline:
        return "ideal-baseline";
    }
    return "unknown";
}

HomodyneMode homodyne_mode_from_string(const std::string& name)
{
    if (name == "self-consistent") {
        return HomodyneMode::self_consistent;
    }
    if (name == "truth-driven") {
        return HomodyneMode::truth_driven;
    }
    if (name == "ideal-baseline") {
        return HomodyneMode::ideal_baseline;
    }
    throw std::invalid_argument("unknown homodyne mode '" + name +
                                "' (expected self-consistent, truth-driven or ideal-baseline)");
}

HomodyneRun run_homodyne_trajectory(const SystemParams& sys, const ReceiverParams& recv,
                                    const HomodyneRunOptions& opts)
{
    sys.validate();
    recv.validate();
    if (opts.sample_stride < 1) {
        throw std::invalid_argument("homodyne run: sample_stride must be >= 1");
    }

    HomodyneRun run;
    VoltageGrid grid = VoltageGrid::stationary(opts.initial_atom, recv, sys, opts.grid);
    const double dt = opts.dt == 0.0 ? homodyne_dt(grid, recv, sys) : opts.dt;
    if (opts.mode != HomodyneMode::ideal_baseline && dt > cfl_bound(grid, recv) * (1.0 + 1e-12)) {
        throw std::invalid_argument("homodyne run: dt " + format_number(dt) + " violates the CFL bound " +
                                    format_number(cfl_bound(grid, recv)));
    }
    run.dt = dt;
    const auto n_steps = static_cast<std::int64_t>(std::llround(opts.t_final / dt));
    if (n_steps < 1) {
        throw std::invalid_argument("homodyne run: t_final must be >= dt");
    }

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sqdt = std::sqrt(dt);
    const double root_gamma = std::sqrt(recv.gamma);

    TrajectoryRecord& rec = run.record;
    rec.mode = to_string(opts.mode);
    rec.seed = opts.seed;

    const auto update = opts.linearized_update ? fp_measurement_update : fp_likelihood_update;
    const bool uses_grid = opts.mode != HomodyneMode::ideal_baseline;
    const bool has_truth = opts.mode == HomodyneMode::truth_driven;
    DensityOperator truth = normalized(opts.initial_atom);
    double v_true = has_truth ? gauss(rng) / std::sqrt(2.0 * recv.noise_power) : 0.0;

    auto current_state = [&]() { return uses_grid ? marginal_state(grid) : truth; };
    rec.push_state(0.0, current_state());
    rec.voltage.push_back(0.0);
    if (has_truth) {
        rec.push_truth(expectations(truth));
    }
    run.max_boundary_ratio = uses_grid ? grid.boundary_ratio() : 0.0;

    double window = 0.0;
    for (std::int64_t step = 1; step <= n_steps; ++step) {
        const double before = uses_grid ? grid.total_trace() : 1.0;
        double record_value = 0.0;

        switch (opts.mode) {
        case HomodyneMode::self_consistent: {
            const double dw = gauss(rng) * sqdt;
            record_value = grid.mean_v() + dw / (root_gamma * dt);
            grid = update(std::move(grid), dw, recv, dt, MeasurementMode::self_consistent);
            grid = fp_deterministic_step(std::move(grid), sys, recv, dt, opts.signal);
            break;
        }
        case HomodyneMode::truth_driven: {
            const double dxi = gauss(rng) * sqdt;
            const double dwj = gauss(rng) * sqdt;
            record_value = v_true + dwj / (root_gamma * dt);
            grid = update(std::move(grid), record_value, recv, dt, MeasurementMode::record_driven);
            grid = fp_deterministic_step(std::move(grid), sys, recv, dt, opts.signal);
            const double signal = opts.signal ? recv.eta * std::sqrt(sys.gamma) *
                                                    quadrature_expectation(truth, recv.phi) * dt
                                              : 0.0;
            v_true = circuit_step_dimensionless(v_true, signal + std::sqrt(recv.eta) * dxi, recv, dt);
            truth = opts.signal ? project_to_state(ideal_homodyne_step(truth, sys, recv, dt, dxi))
                                : project_to_state(truth + liouvillian(truth, sys) * dt);
            break;
        }
        case HomodyneMode::ideal_baseline: {
            const double dxi = gauss(rng) * sqdt;
            record_value = (recv.eta * std::sqrt(sys.gamma) * quadrature_expectation(truth, recv.phi) * dt +
                            std::sqrt(recv.eta) * dxi) /
                           dt;
            truth = project_to_state(ideal_homodyne_step(truth, sys, recv, dt, dxi));
            break;
        }
        }
        window += record_value;

        if (uses_grid) {
            const double after = grid.total_trace();
            run.max_step_trace_change = std::max(run.max_step_trace_change, std::abs(after - before) / before);
        }

        if (step % opts.sample_stride == 0) {
            const double t = static_cast<double>(step) * dt;
            rec.push_state(t, current_state());
            rec.voltage.push_back(window / static_cast<double>(opts.sample_stride));
            window = 0.0;
            if (has_truth) {
                rec.push_truth(expectations(truth));
            }
            if (uses_grid) {
                run.max_boundary_ratio = std::max(run.max_boundary_ratio, grid.boundary_ratio());
                if (opts.check_hermitian) {
                    for (const auto& r : grid.values) {
                        if (!r.is_hermitian()) {
                            throw std::runtime_error("homodyne run: non-Hermitian node at t = " + std::to_string(t));
                        }
                    }
                }
            }
        }
    }
    run.clipped_mass = grid.clipped_mass;
    run.final_grid = std::move(grid);
    return run;
}

TrajectoryModel make_homodyne_model(const SystemParams& sys, const ReceiverParams& recv,
                                    const HomodyneRunOptions& opts)
{
    return [sys, recv, opts](std::uint64_t seed) {
        HomodyneRunOptions o = opts;
        o.seed = seed;
        return run_homodyne_trajectory(sys, recv, o).record;
    };
}

}  // namespace realtraj

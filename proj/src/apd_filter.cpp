#include "realtraj/apd_filter.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace realtraj {

void ApdParams::validate() const
{
    if (!(eta >= 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("apd.eta must lie in [0, 1], got " + std::to_string(eta));
    }
    if (!(gamma_r > 0.0)) {
        throw std::invalid_argument("apd.gamma_r must be > 0");
    }
    if (!(tau_dd >= 0.0)) {
        throw std::invalid_argument("apd.tau_dd must be >= 0");
    }
    if (!(gamma_dk >= 0.0)) {
        throw std::invalid_argument("apd.gamma_dk must be >= 0");
    }
}

double apd_dt_max(const SystemParams& sys, const ApdParams& apd)
{
    return 1e-3 / std::max({sys.gamma, sys.omega, apd.gamma_r, apd.gamma_dk});
}

ApdSupersystem ApdSupersystem::ready(const DensityOperator& atom)
{
    ApdSupersystem s;
    s.rho0 = atom;
    return s;
}

ApdSupersystem drift_step(const ApdSupersystem& state, const SystemParams& sys, const ApdParams& apd, double dt,
                          std::optional<double> dt_max)
{
    const double limit = dt_max.value_or(apd_dt_max(sys, apd));
    if (!(dt > 0.0) || dt > limit + event_tolerance(state.time + dt)) {
        throw std::invalid_argument("drift_step: step " + std::to_string(dt) + " outside (0, " +
                                    std::to_string(limit) + "]");
    }
    const double end = state.time + dt;
    if (!state.pending_resets.empty() && state.pending_resets.front() < end - event_tolerance(end)) {
        throw std::logic_error("drift_step: a detector reset is due inside the step");
    }

    ApdSupersystem out = state;
    const DensityOperator jump0 = jump_super(state.rho0);

    out.rho0.add_scaled(liouvillian(state.rho0, sys), dt);
    out.rho0.add_scaled(state.rho0, -dt * apd.gamma_dk);
    out.rho0.add_scaled(jump0, -dt * apd.eta * sys.gamma);

    out.rho1.add_scaled(liouvillian(state.rho1, sys), dt);
    out.rho1.add_scaled(state.rho1, -dt * apd.gamma_r);
    out.rho1.add_scaled(jump0, dt * apd.eta * sys.gamma);
    out.rho1.add_scaled(state.rho0, dt * apd.gamma_dk);

    out.rho2.add_scaled(liouvillian(state.rho2, sys), dt);

    out.time = end;
    return out;
}

double avalanche_probability(const ApdSupersystem& state, const ApdParams& apd, double dt)
{
    const double total = state.total_trace();
    if (!(total > 0.0)) {
        throw std::invalid_argument("avalanche_probability: total trace is zero");
    }
    return std::clamp(apd.gamma_r * dt * state.rho1.trace() / total, 0.0, 1.0);
}

ApdSupersystem apply_avalanche(const ApdSupersystem& state, double t, const ApdParams& apd)
{
    if (!(state.rho1.trace() > 0.0)) {
        throw std::logic_error("apply_avalanche: avalanche fired with Tr[rho1] = 0");
    }
    ApdSupersystem out = state;
    out.rho2 += out.rho1;
    out.rho0 = DensityOperator::zero();
    out.rho1 = DensityOperator::zero();
    out.count += 1;
    const double reset = t + apd.tau_dd;
    if (!out.pending_resets.empty() && out.pending_resets.back() >= reset) {
        throw std::logic_error("apply_avalanche: reset queue would not be strictly increasing");
    }
    out.pending_resets.push_back(reset);
    return out;
}

ApdSupersystem apply_reset(const ApdSupersystem& state)
{
    if (state.pending_resets.empty()) {
        throw std::logic_error("apply_reset: no pending reset");
    }
    ApdSupersystem out = state;
    out.rho0 += out.rho2;
    out.rho2 = DensityOperator::zero();
    out.pending_resets.pop_front();
    return out;
}

DensityOperator conditioned_state(const ApdSupersystem& state)
{
    const double total = state.total_trace();
    if (!(total > 0.0)) {
        throw std::invalid_argument("conditioned_state: total trace is zero");
    }
    DensityOperator sum = state.rho0 + state.rho1 + state.rho2;
    return sum * (1.0 / total);
}

void renormalize_if_small(ApdSupersystem& state, double threshold)
{
    const double total = state.total_trace();
    if (total >= threshold) {
        return;
    }
    if (!(total > 0.0)) {
        throw std::runtime_error("renormalize_if_small: total trace vanished");
    }
    const double f = 1.0 / total;
    state.rho0 *= f;
    state.rho1 *= f;
    state.rho2 *= f;
    state.log_weight += std::log(total);
}

namespace {

double resolve_dt(const SystemParams& sys, const ApdParams& apd, const ApdRunOptions& opts)
{
    if (opts.dt == 0.0) {
        return apd_dt_max(sys, apd);
    }
    if (!(opts.dt > 0.0)) {
        throw std::invalid_argument("apd run: dt must be positive");
    }
    return opts.dt;
}

}  // namespace

ApdRun run_apd_trajectory(const SystemParams& sys, const ApdParams& apd, const ApdRunOptions& opts)
{
    sys.validate();
    apd.validate();
    const double dt = resolve_dt(sys, apd, opts);
    const auto n_steps = static_cast<std::int64_t>(std::llround(opts.t_final / dt));
    if (n_steps < 1 || opts.sample_stride < 1) {
        throw std::invalid_argument("apd run: need t_final >= dt and sample_stride >= 1");
    }

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    ApdRun run;
    TrajectoryRecord& rec = run.record;
    rec.mode = opts.record ? "record-driven" : "self-consistent";
    rec.seed = opts.seed;

    ApdSupersystem state = ApdSupersystem::ready(opts.initial_atom);
    rec.push_state(0.0, conditioned_state(state));
    rec.counts.push_back(0);

    std::size_t next_record = 0;
    double expected_count = 0.0;

    for (std::int64_t step = 1; step <= n_steps; ++step) {
        const double t0 = static_cast<double>(step - 1) * dt;
        const double t1 = static_cast<double>(step) * dt;
        for (const Interval& iv : split_step_at_events(t0, t1 - t0, state.pending_resets)) {
            const double h = iv.end - iv.begin;
            state.time = iv.begin;

            const double total = state.total_trace();
            expected_count += apd.gamma_r * h * state.rho1.trace() / total;
            const double p = avalanche_probability(state, apd, h);
            if (opts.check_dead_windows && state.in_dead_window() && p != 0.0) {
                throw std::runtime_error("dead-window breach: avalanche probability " + std::to_string(p) +
                                         " at t = " + std::to_string(iv.begin));
            }

            bool fire = false;
            if (opts.record) {
                const auto& times = *opts.record;
                if (next_record < times.size() && times[next_record] <= iv.end + event_tolerance(iv.end)) {
                    fire = true;
                    ++next_record;
                }
            } else if (p > 0.0) {
                fire = uniform(rng) < p;
            }

            state = drift_step(state, sys, apd, h, dt);
            state.time = iv.end;
            if (fire) {
                state = apply_avalanche(state, iv.end, apd);
                rec.avalanche_times.push_back(iv.end);
                run.post_avalanche.push_back(expectations(conditioned_state(state)));
            }
            while (!state.pending_resets.empty() &&
                   state.pending_resets.front() <= iv.end + event_tolerance(iv.end)) {
                state = apply_reset(state);
            }
            renormalize_if_small(state);
        }
        if (step % opts.sample_stride == 0) {
            rec.push_state(t1, conditioned_state(state));
            rec.counts.push_back(state.count);
        }
    }
    run.predicted_rate = expected_count / (static_cast<double>(n_steps) * dt);
    return run;
}

TruthRun truth_oracle_run(const SystemParams& sys, const ApdParams& apd, const ApdRunOptions& opts)
{
    sys.validate();
    apd.validate();
    const double dt = resolve_dt(sys, apd, opts);
    const auto n_steps = static_cast<std::int64_t>(std::llround(opts.t_final / dt));

    const DensityOperator& rho = opts.initial_atom;
    if (!rho.is_valid_state() || std::abs(purity(rho) - 1.0) > 1e-9) {
        throw std::invalid_argument("truth_oracle_run: initial atom state must be pure");
    }
    cplx cg;
    cplx ce;
    if (rho.gg.real() > 1e-12) {
        cg = std::sqrt(rho.gg.real());
        ce = rho.eg / cg;
    } else {
        ce = 1.0;
    }

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const cplx half_rabi{0.0, -0.5 * sys.omega};

    TruthRun out;
    auto sample = [&](double t) {
        out.times.push_back(t);
        const cplx coh = ce * std::conj(cg); // rho_eg
        out.true_state.push_back({2.0 * coh.real(), 2.0 * coh.imag(), std::norm(ce) - std::norm(cg)});
    };
    sample(0.0);

    int detector = 0;
    double reset_time = 0.0;
    for (std::int64_t step = 1; step <= n_steps; ++step) {
        const double t1 = static_cast<double>(step) * dt;

        if (uniform(rng) < sys.gamma * std::norm(ce) * dt) {
            cg = 1.0;
            ce = 0.0;
            out.emission_times.push_back(t1);
            if (detector == 0 && uniform(rng) < apd.eta) {
                detector = 1;
            }
        } else {
            const cplx g = cg + dt * half_rabi * ce;
            const cplx e = ce + dt * (half_rabi * cg - 0.5 * sys.gamma * ce);
            const double norm = std::sqrt(std::norm(g) + std::norm(e));
            cg = g / norm;
            ce = e / norm;
        }
        if (detector == 0 && apd.gamma_dk > 0.0 && uniform(rng) < apd.gamma_dk * dt) {
            detector = 1;
        }
        if (detector == 1 && uniform(rng) < std::min(1.0, apd.gamma_r * dt)) {
            detector = 2;
            out.avalanche_times.push_back(t1);
            reset_time = t1 + apd.tau_dd;
        }
        if (detector == 2 && reset_time <= t1 + event_tolerance(t1)) {
            detector = 0;
        }
        if (step % opts.sample_stride == 0) {
            sample(t1);
        }
    }
    return out;
}

TrajectoryRecord ideal_jump_record(const SystemParams& sys, const ApdRunOptions& opts)
{
    // Only the atom stream matters; the detector parameters just keep the step bound.
    ApdParams ideal{1.0, 1.0, 0.0, 0.0};
    const TruthRun truth = truth_oracle_run(sys, ideal, opts);
    TrajectoryRecord rec;
    rec.mode = "ideal-baseline";
    rec.seed = opts.seed;
    rec.avalanche_times = truth.emission_times;
    std::size_t emitted = 0;
    for (std::size_t i = 0; i < truth.times.size(); ++i) {
        const BlochVector& b = truth.true_state[i];
        rec.push_state(truth.times[i], DensityOperator::from_bloch(b.x, b.y, b.z));
        while (emitted < truth.emission_times.size() &&
               truth.emission_times[emitted] <= truth.times[i] + event_tolerance(truth.times[i])) {
            ++emitted;
        }
        rec.counts.push_back(static_cast<std::int64_t>(emitted));
    }
    return rec;
}

TrajectoryModel make_apd_model(const SystemParams& sys, const ApdParams& apd, const ApdRunOptions& opts,
                               bool truth_driven)
{
    return [sys, apd, opts, truth_driven](std::uint64_t seed) {
        ApdRunOptions o = opts;
        o.seed = seed;
        if (truth_driven) {
            o.record = truth_oracle_run(sys, apd, o).avalanche_times;
            // decorrelate the filter stream from the truth stream
            o.seed = derive_seed(seed, 0xA11CE);
        }
        TrajectoryRecord rec = run_apd_trajectory(sys, apd, o).record;
        rec.seed = seed;
        if (truth_driven) {
            rec.mode = "truth-driven";
        }
        return rec;
    };
}

}  // namespace realtraj

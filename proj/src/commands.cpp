#include "realtraj/commands.hpp"

#include <algorithm>
#include <filesystem>

#include "realtraj/io.hpp"
#include "realtraj/metrics.hpp"

namespace realtraj {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string prepare_path(const SimConfig& cfg, const std::string& suffix)
{
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory '" + cfg.output_dir + "': " + ec.message());
    }
    return (fs::path(cfg.output_dir) / (cfg.output_prefix + suffix)).string();
}

json base_summary(const SimConfig& cfg, const std::string& command, double dt)
{
    json s;
    s["csv_contract"] = kCsvContract;
    s["command"] = command;
    s["mode"] = cfg.mode;
    s["master_seed"] = cfg.engine.master_seed;
    s["dt"] = dt;
    s["config"] = cfg.to_text();
    s["params"]["system"] = {{"omega", cfg.system.omega}, {"gamma_si", cfg.system.gamma_si}};
    if (cfg.apd) {
        s["params"]["apd"] = {{"eta", cfg.apd->eta},
                              {"gamma_r", cfg.apd->gamma_r},
                              {"tau_dd", cfg.apd->tau_dd},
                              {"gamma_dk", cfg.apd->gamma_dk}};
    }
    if (cfg.detector == DetectorKind::homodyne) {
        const ReceiverParams r = cfg.receiver_params();
        s["params"]["receiver"] = {{"eta", r.eta}, {"phi", r.phi}, {"gamma", r.gamma}, {"N", r.noise_power}};
        s["params"]["grid"] = {{"n_points", cfg.grid.n_points}, {"n_sigma", cfg.grid.n_sigma}};
        if (cfg.receiver_si) {
            s["params"]["receiver"]["voltage_scale"] =
                physical_to_dimensionless(*cfg.receiver_si, cfg.system.gamma_si).voltage_scale;
        }
    }
    return s;
}

DensityOperator initial_state(const SimConfig& cfg)
{
    return DensityOperator::from_bloch(cfg.initial.x, cfg.initial.y, cfg.initial.z);
}

json single_metrics(const TrajectoryRecord& rec, const SimConfig& cfg)
{
    json m;
    if (!rec.times.empty() && rec.times.back() >= cfg.engine.t_burn) {
        const double p = window_average_purity(rec, cfg.engine.t_burn);
        const double pu = unconditional_purity(cfg.system);
        const ScaledPurity s = scaled_purity(p, pu);
        m["window_purity"] = p;
        m["p_u"] = pu;
        m["scaled_p"] = s.value;
        m["scaled"] = s.scaled;
    }
    return m;
}

json ensemble_metrics(const EnsembleStats& stats, const SimConfig& cfg)
{
    json m = to_json(purity_report(stats, cfg.system));
    m["failures"] = json::array();
    for (const auto& f : stats.failures) {
        m["failures"].push_back({{"index", f.index}, {"seed", f.seed}, {"message", f.message}});
    }
    return m;
}

EngineConfig engine_with_dt(const SimConfig& cfg, double dt)
{
    EngineConfig e = cfg.engine;
    e.dt = dt;
    return e;
}

void report_failures(const EnsembleStats& stats, std::ostream& log)
{
    for (const auto& f : stats.failures) {
        log << "trajectory " << f.index << " (seed " << f.seed << ") aborted: " << f.message << '\n';
    }
}

}  // namespace

SimConfig apply_overrides(SimConfig cfg, const CommandOverrides& o)
{
    if (o.seed) {
        cfg.engine.master_seed = *o.seed;
    }
    if (o.out_dir) {
        cfg.output_dir = *o.out_dir;
    }
    if (o.ensemble) {
        cfg.engine.n_trajectories = *o.ensemble;
    }
    if (o.mode) {
        cfg.mode = *o.mode;
    }
    cfg.validate();
    return cfg;
}

std::vector<std::string> run_apd_command(const SimConfig& cfg, std::ostream& log)
{
    if (cfg.detector != DetectorKind::apd) {
        throw ConfigError("detector: the apd command needs detector = apd");
    }
    const ApdParams& apd = *cfg.apd;
    ApdRunOptions opts;
    opts.dt = cfg.engine.dt == 0.0 ? apd_dt_max(cfg.system, apd) : cfg.engine.dt;
    opts.t_final = cfg.engine.t_final;
    opts.sample_stride = cfg.engine.sample_stride;
    opts.initial_atom = initial_state(cfg);

    json summary = base_summary(cfg, "apd", opts.dt);
    std::vector<std::string> files;

    if (cfg.engine.n_trajectories == 1) {
        opts.seed = derive_seed(cfg.engine.master_seed, 0);
        TrajectoryRecord rec;
        double predicted_rate = 0.0;
        if (cfg.mode == "ideal-baseline") {
            rec = ideal_jump_record(cfg.system, opts);
        } else if (cfg.mode == "truth-driven") {
            const TruthRun truth = truth_oracle_run(cfg.system, apd, opts);
            ApdRunOptions fopts = opts;
            fopts.record = truth.avalanche_times;
            ApdRun run = run_apd_trajectory(cfg.system, apd, fopts);
            rec = std::move(run.record);
            rec.mode = "truth-driven";
            for (const auto& b : truth.true_state) {
                rec.push_truth(b);
            }
            predicted_rate = run.predicted_rate;
        } else {
            ApdRun run = run_apd_trajectory(cfg.system, apd, opts);
            rec = std::move(run.record);
            predicted_rate = run.predicted_rate;
        }
        files.push_back(prepare_path(cfg, ".csv"));
        emit_trajectory(rec, Channel::counter, files.back());
        files.push_back(prepare_path(cfg, "_events.csv"));
        emit_events(rec.avalanche_times, files.back());

        summary["trajectory_seed"] = opts.seed;
        summary["metrics"] = single_metrics(rec, cfg);
        summary["metrics"]["avalanches"] = rec.avalanche_times.size();
        summary["metrics"]["predicted_rate"] = predicted_rate;
        log << "apd: " << rec.avalanche_times.size() << " avalanches over t = " << cfg.engine.t_final << '\n';
    } else {
        TrajectoryModel model = cfg.mode == "ideal-baseline"
                                    ? TrajectoryModel([sys = cfg.system, opts](std::uint64_t seed) {
                                          ApdRunOptions o = opts;
                                          o.seed = seed;
                                          return ideal_jump_record(sys, o);
                                      })
                                    : make_apd_model(cfg.system, apd, opts, cfg.mode == "truth-driven");
        const EnsembleStats stats = run_ensemble(model, engine_with_dt(cfg, opts.dt));
        report_failures(stats, log);
        files.push_back(prepare_path(cfg, "_ensemble.csv"));
        emit_ensemble(stats, files.back());
        summary["metrics"] = ensemble_metrics(stats, cfg);
        log << "apd ensemble: scaled p = " << summary["metrics"]["scaled_p"].get<double>() << " +- "
            << summary["metrics"]["scaled_p_se"].get<double>() << '\n';
    }
    files.push_back(prepare_path(cfg, ".json"));
    summary["files"] = files;
    emit_summary(summary, files.back());
    return files;
}

std::vector<std::string> run_homodyne_command(const SimConfig& cfg, std::ostream& log)
{
    if (cfg.detector != DetectorKind::homodyne) {
        throw ConfigError("detector: the homodyne command needs detector = homodyne");
    }
    const ReceiverParams recv = cfg.receiver_params();
    HomodyneRunOptions opts;
    opts.t_final = cfg.engine.t_final;
    opts.sample_stride = cfg.engine.sample_stride;
    opts.initial_atom = initial_state(cfg);
    opts.grid = cfg.grid;
    opts.mode = homodyne_mode_from_string(cfg.mode);
    const VoltageGrid probe = VoltageGrid::stationary(opts.initial_atom, recv, cfg.system, opts.grid);
    opts.dt = cfg.engine.dt == 0.0 ? homodyne_dt(probe, recv, cfg.system) : cfg.engine.dt;

    json summary = base_summary(cfg, "homodyne", opts.dt);
    summary["params"]["grid"]["v_min"] = probe.v_min;
    summary["params"]["grid"]["v_max"] = probe.v_max;
    std::vector<std::string> files;
    const Channel channel = opts.mode == HomodyneMode::ideal_baseline ? Channel::receiver_current : Channel::receiver;

    if (cfg.engine.n_trajectories == 1) {
        opts.seed = derive_seed(cfg.engine.master_seed, 0);
        const HomodyneRun run = run_homodyne_trajectory(cfg.system, recv, opts);
        files.push_back(prepare_path(cfg, ".csv"));
        emit_trajectory(run.record, channel, files.back());
        summary["trajectory_seed"] = opts.seed;
        summary["metrics"] = single_metrics(run.record, cfg);
        summary["metrics"]["max_boundary_ratio"] = run.max_boundary_ratio;
        summary["metrics"]["max_step_trace_change"] = run.max_step_trace_change;
        summary["metrics"]["clipped_mass"] = run.clipped_mass;
        log << "homodyne (" << cfg.mode << "): " << run.record.size() << " samples, dt = " << opts.dt << '\n';
    } else {
        const EnsembleStats stats =
            run_ensemble(make_homodyne_model(cfg.system, recv, opts), engine_with_dt(cfg, opts.dt));
        report_failures(stats, log);
        files.push_back(prepare_path(cfg, "_ensemble.csv"));
        emit_ensemble(stats, files.back());
        summary["metrics"] = ensemble_metrics(stats, cfg);
        log << "homodyne ensemble: scaled p = " << summary["metrics"]["scaled_p"].get<double>() << " +- "
            << summary["metrics"]["scaled_p_se"].get<double>() << '\n';
    }
    files.push_back(prepare_path(cfg, ".json"));
    summary["files"] = files;
    emit_summary(summary, files.back());
    return files;
}

std::vector<std::string> run_sweep_command(const SimConfig& cfg, std::ostream& log)
{
    DriveModel model;
    double dt = cfg.engine.dt;
    std::vector<double> phases = cfg.sweep_phases;
    const DensityOperator atom = initial_state(cfg);

    if (cfg.detector == DetectorKind::homodyne) {
        const ReceiverParams recv = cfg.receiver_params();
        if (dt == 0.0) {
            // one step size for every sweep point: the smallest default
            dt = std::numeric_limits<double>::infinity();
            for (double w : cfg.sweep_omegas) {
                SystemParams sys = cfg.system;
                sys.omega = w;
                dt = std::min(dt, homodyne_dt(VoltageGrid::stationary(atom, recv, sys, cfg.grid), recv, sys));
            }
        }
        HomodyneRunOptions opts;
        opts.dt = dt;
        opts.t_final = cfg.engine.t_final;
        opts.sample_stride = cfg.engine.sample_stride;
        opts.initial_atom = atom;
        opts.grid = cfg.grid;
        opts.mode = homodyne_mode_from_string(cfg.mode);
        model = [recv, opts](const SystemParams& sys, double phase) {
            ReceiverParams r = recv;
            r.phi = phase;
            return make_homodyne_model(sys, r, opts);
        };
    } else {
        const ApdParams apd = *cfg.apd;
        if (dt == 0.0) {
            dt = std::numeric_limits<double>::infinity();
            for (double w : cfg.sweep_omegas) {
                SystemParams sys = cfg.system;
                sys.omega = w;
                dt = std::min(dt, apd_dt_max(sys, apd));
            }
        }
        phases = {0.0};
        ApdRunOptions opts;
        opts.dt = dt;
        opts.t_final = cfg.engine.t_final;
        opts.sample_stride = cfg.engine.sample_stride;
        opts.initial_atom = atom;
        const bool truth = cfg.mode == "truth-driven";
        model = [apd, opts, truth](const SystemParams& sys, double) { return make_apd_model(sys, apd, opts, truth); };
    }

    const auto rows = purity_vs_drive_sweep(model, cfg.system, cfg.sweep_omegas, phases, engine_with_dt(cfg, dt));
    std::vector<std::string> files{prepare_path(cfg, "_sweep.csv")};
    emit_table(rows, files.back());

    json summary = base_summary(cfg, "sweep", dt);
    summary["metrics"]["rows"] = json::array();
    for (const auto& r : rows) {
        json row = to_json(r.report);
        row["omega"] = r.omega;
        row["phase"] = r.phase;
        summary["metrics"]["rows"].push_back(row);
        log << "omega = " << r.omega << " phase = " << r.phase << ": scaled p = " << r.report.scaled_p << " +- "
            << r.report.scaled_p_se << '\n';
    }
    files.push_back(prepare_path(cfg, ".json"));
    summary["files"] = files;
    emit_summary(summary, files.back());
    return files;
}

void run_steady_command(const SystemParams& sys, std::ostream& out)
{
    const DensityOperator ss = steady_state(sys);
    const BlochVector b = expectations(ss);
    // + 0.0 folds negative zero
    out << "omega = " << format_double(sys.omega + 0.0) << '\n'
        << "x_ss = " << format_double(b.x + 0.0) << '\n'
        << "y_ss = " << format_double(b.y + 0.0) << '\n'
        << "z_ss = " << format_double(b.z + 0.0) << '\n'
        << "rho_ee = " << format_double(ss.ee.real() + 0.0) << '\n'
        << "p_u = " << format_double(unconditional_purity(sys)) << '\n';
}

}  // namespace realtraj

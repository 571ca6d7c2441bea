#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "realtraj/commands.hpp"
#include "realtraj/config.hpp"
#include "realtraj/io.hpp"

using namespace realtraj;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = REALTRAJ_CONFIG_DIR;

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("realtraj_unit_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string error_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

const std::string kApdText = R"(system.omega = 10
detector = apd
apd.eta = 0.8
apd.gamma_r = 7
apd.tau_dd = 2
apd.gamma_dk = 5e-6
engine.t_final = 3
)";

}  // namespace

TEST_CASE("shipped configurations")
{
    const SimConfig fig2 = load_config(kConfigDir + "/fig2.cfg");
    CHECK(fig2.detector == DetectorKind::apd);
    REQUIRE(fig2.apd.has_value());
    CHECK(fig2.apd->eta == 0.8);
    CHECK(fig2.apd->gamma_r == 7.0);
    CHECK(fig2.apd->tau_dd == 2.0);
    CHECK(fig2.apd->gamma_dk == 5e-6);
    CHECK(fig2.system.omega == 10.0);

    const SimConfig fig4 = load_config(kConfigDir + "/fig4.cfg");
    CHECK(fig4.detector == DetectorKind::homodyne);
    const ReceiverParams r = fig4.receiver_params();
    CHECK(r.noise_power == 0.1);
    CHECK(r.eta == 0.98);
    CHECK(r.gamma == 1.5);
    CHECK(r.phi == 0.0);
    CHECK(fig4.system.omega == 10.0);

    const SimConfig sweep = load_config(kConfigDir + "/fig4_sweep.cfg");
    CHECK(sweep.sweep_phases.size() == 2);
}

TEST_CASE("configuration errors name the key")
{
    std::string bad = kApdText;
    bad.replace(bad.find("apd.eta = 0.8"), 13, "apd.eta = 1.2");
    CHECK(error_of(bad).find("apd.eta") != std::string::npos);

    CHECK(error_of(kApdText + "apd.colour = red\n").find("apd.colour") != std::string::npos);
    CHECK(error_of(kApdText + "apd.eta = 0.5\n").find("duplicate") != std::string::npos);
    CHECK(error_of(kApdText + "engine.sample_stride = ten\n").find("engine.sample_stride") != std::string::npos);
    CHECK(error_of(kApdText + "receiver.N = 0.1\n").find("detector") != std::string::npos);
    CHECK(error_of(kApdText + "mode = hopeful\n").find("mode") != std::string::npos);
    CHECK(error_of(kApdText + "engine.n_trajectories = 0\n").find("engine.n_trajectories") != std::string::npos);
    CHECK(error_of("detector = apd\nengine.t_final = 1\n").find("system.omega") != std::string::npos);
    CHECK(error_of("system.omega = 1\ndetector = apd\napd.eta = 1\napd.gamma_r = 1\napd.tau_dd = 0\n"
                   "apd.gamma_dk = 0\n")
              .find("engine.t_final") != std::string::npos);
    CHECK(error_of("system.omega = -1\n" + kApdText.substr(kApdText.find('\n') + 1)).find("system.omega") !=
          std::string::npos);
    CHECK(error_of("oops\n").find("line 1") != std::string::npos);

    const std::string hom = "system.omega = 10\ndetector = homodyne\nreceiver.eta = 0.98\nengine.t_final = 1\n";
    CHECK(error_of(hom + "receiver.gamma = 1.5\nreceiver.N = 0.1\nreceiver.R = 1e4\n").find("receiver") !=
          std::string::npos);
    CHECK(error_of(hom + "receiver.gamma = 1.5\nreceiver.N = -0.1\n").find("receiver.N") != std::string::npos);
    CHECK(error_of(hom + "receiver.gamma = 1.5\nreceiver.N = 0.1\napd.eta = 0.5\n").find("apd") !=
          std::string::npos);
    CHECK(error_of(hom + "receiver.gamma = 1.5\nreceiver.N = 0.1\n").empty());
}

TEST_CASE("SI receiver block converts to dimensionless parameters")
{
    const SimConfig c = parse_config("system.omega = 1\ndetector = homodyne\nreceiver.eta = 0.9\n"
                                     "receiver.R = 1e4\nreceiver.C = 1e-12\nreceiver.kT = 4.1e-21\n"
                                     "receiver.P = 1e-3\nreceiver.omega0 = 2.4e15\nengine.t_final = 1\n");
    REQUIRE(c.receiver_si.has_value());
    CHECK(c.receiver_params().gamma == doctest::Approx(1.0 / (1e4 * 1e-12 * 3e8)));
    CHECK(parse_config(c.to_text()).to_text() == c.to_text());
}

TEST_CASE("canonical text round trip")
{
    for (const char* name : {"fig2.cfg", "fig4.cfg", "fig4_sweep.cfg"}) {
        const SimConfig c = load_config(kConfigDir + "/" + name);
        const SimConfig again = parse_config(c.to_text());
        CHECK(again.to_text() == c.to_text());
        CHECK(again.engine.master_seed == c.engine.master_seed);
        CHECK(again.sweep_omegas == c.sweep_omegas);
    }
}

TEST_CASE("command-line overrides")
{
    CommandOverrides o;
    o.seed = 42;
    o.out_dir = "elsewhere";
    o.ensemble = 9;
    o.mode = "truth-driven";
    const SimConfig c = apply_overrides(parse_config(kApdText), o);
    CHECK(c.engine.master_seed == 42);
    CHECK(c.output_dir == "elsewhere");
    CHECK(c.engine.n_trajectories == 9);
    CHECK(c.mode == "truth-driven");
    o.mode = "nonsense";
    CHECK_THROWS_AS(apply_overrides(parse_config(kApdText), o), ConfigError);
}

TEST_CASE("shortest round-trip number formatting")
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-5}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
}

TEST_CASE("csv emission")
{
    const fs::path dir = scratch("csv");
    TrajectoryRecord empty;
    emit_trajectory(empty, Channel::counter, (dir / "empty.csv").string());
    CHECK(slurp((dir / "empty.csv").string()) == "t,x_c,y_c,z_c,purity,count\n");

    TrajectoryRecord rec;
    rec.push_state(0.0, DensityOperator::ground());
    rec.push_state(0.1, DensityOperator::from_bloch(0.1, 1.0 / 3.0, -0.2));
    rec.voltage = {0.0, -1.2345678901234567};
    rec.push_truth({0.0, 0.0, -1.0});
    rec.push_truth({0.3, 0.1, 0.2});
    const std::string path = (dir / "rec.csv").string();
    emit_trajectory(rec, Channel::receiver, path);
    const CsvTable t = read_csv(path);
    CHECK(t.header == trajectory_columns(Channel::receiver, true));
    CHECK(t.column("y_c") == rec.y);
    CHECK(t.column("purity") == rec.purity);
    CHECK(t.column("voltage") == rec.voltage);
    CHECK(t.column("z_true") == rec.z_true);
    CHECK_THROWS_AS(t.column("nope"), std::out_of_range);

    emit_events({0.5, 1.25}, (dir / "ev.csv").string());
    CHECK(read_csv((dir / "ev.csv").string()).column("t_avalanche") == std::vector<double>{0.5, 1.25});

    CHECK_THROWS_AS(emit_trajectory(rec, Channel::receiver, (dir / "missing" / "x.csv").string()), std::runtime_error);
}

TEST_CASE("sidecar records the seed and re-runs to identical files")
{
    const fs::path first = scratch("closure_a");
    const fs::path second = scratch("closure_b");
    SimConfig cfg = parse_config(kApdText);
    cfg.output_dir = first.string();
    cfg.engine.master_seed = 7;
    std::ostringstream log;
    const auto files = run_apd_command(cfg, log);
    REQUIRE(files.size() == 3);

    const auto summary = read_summary(files.back());
    CHECK(summary["master_seed"].get<std::uint64_t>() == 7);
    CHECK(summary["trajectory_seed"].get<std::uint64_t>() == derive_seed(7, 0));
    CHECK(summary["csv_contract"] == kCsvContract);
    CHECK(summary["mode"] == "self-consistent");

    SimConfig again = parse_config(summary["config"].get<std::string>());
    again.output_dir = second.string();
    run_apd_command(again, log);
    for (const char* name : {"run.csv", "run_events.csv"}) {
        CHECK(slurp((first / name).string()) == slurp((second / name).string()));
    }
}

TEST_CASE("homodyne and sweep commands write their tables")
{
    const fs::path dir = scratch("commands");
    SimConfig cfg = parse_config("system.omega = 2\ndetector = homodyne\nreceiver.eta = 0.98\n"
                                 "receiver.gamma = 1.5\nreceiver.N = 0.1\ngrid.n_points = 64\n"
                                 "engine.t_final = 1.2\nengine.t_burn = 1\nengine.sample_stride = 20\n"
                                 "sweep.omegas = 1, 2\n");
    cfg.output_dir = dir.string();
    std::ostringstream log;

    cfg.mode = "truth-driven";
    run_homodyne_command(cfg, log);
    const CsvTable t = read_csv((dir / "run.csv").string());
    CHECK(t.header == trajectory_columns(Channel::receiver, true));

    cfg.mode = "self-consistent";
    cfg.engine.n_trajectories = 3;
    run_homodyne_command(cfg, log);
    const CsvTable e = read_csv((dir / "run_ensemble.csv").string());
    CHECK(e.header.front() == "t");
    CHECK(e.rows.size() == t.rows.size());

    cfg.engine.n_trajectories = 2;
    run_sweep_command(cfg, log);
    const CsvTable s = read_csv((dir / "run_sweep.csv").string());
    CHECK(s.rows.size() == 4);
    CHECK(s.column("omega") == std::vector<double>{1, 1, 2, 2});
    const auto summary = read_summary((dir / "run.json").string());
    CHECK(summary["command"] == "sweep");
    CHECK(summary["metrics"]["rows"].size() == 4);

    SimConfig apd = parse_config(kApdText);
    CHECK_THROWS_AS(run_homodyne_command(apd, log), ConfigError);
}

TEST_CASE("steady command")
{
    std::ostringstream out;
    run_steady_command(SystemParams{0.0}, out);
    CHECK(out.str().find("z_ss = -1\n") != std::string::npos);
    CHECK(out.str().find("p_u = 1\n") != std::string::npos);
}

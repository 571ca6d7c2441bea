#include "realtraj/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace realtraj {

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

const std::set<std::string> kKnownKeys = {
    "system.omega",   "system.gamma_si",  "detector",           "mode",
    "apd.eta",        "apd.gamma_r",      "apd.tau_dd",         "apd.gamma_dk",
    "receiver.eta",   "receiver.phi",     "receiver.gamma",     "receiver.N",
    "receiver.R",     "receiver.C",       "receiver.kT",        "receiver.P",
    "receiver.omega0", "receiver.e_charge", "grid.n_points",    "grid.n_sigma",
    "engine.dt",      "engine.t_final",   "engine.sample_stride", "engine.seed",
    "engine.n_trajectories", "engine.t_burn", "engine.threads", "initial.x",
    "initial.y",      "initial.z",        "output.dir",         "output.prefix",
    "sweep.omegas",   "sweep.phases",
};

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

class Entries {
public:
    explicit Entries(const std::string& text)
    {
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) {
                line.erase(hash);
            }
            line = trim(line);
            if (line.empty()) {
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (!kKnownKeys.contains(key)) {
                throw ConfigError(key + ": unknown key (line " + std::to_string(lineno) + ")");
            }
            if (!values_.emplace(key, value).second) {
                throw ConfigError(key + ": duplicate key (line " + std::to_string(lineno) + ")");
            }
        }
    }

    bool has(const std::string& key) const { return values_.contains(key); }

    bool has_prefix(const std::string& prefix) const
    {
        for (const auto& [k, v] : values_) {
            if (k.starts_with(prefix)) {
                return true;
            }
        }
        return false;
    }

    const std::string& raw(const std::string& key) const
    {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            throw ConfigError(key + ": missing required key");
        }
        return it->second;
    }

    double real(const std::string& key) const { return parse_real(key, raw(key)); }
    double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

    std::int64_t integer(const std::string& key) const
    {
        const std::string& s = raw(key);
        std::int64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw ConfigError(key + ": expected an integer, got '" + s + "'");
        }
        return v;
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) const
    {
        return has(key) ? integer(key) : fallback;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const
    {
        if (!has(key)) {
            return fallback;
        }
        const std::string& s = raw(key);
        std::uint64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
        }
        return v;
    }

    std::vector<double> list(const std::string& key, std::vector<double> fallback) const
    {
        if (!has(key)) {
            return fallback;
        }
        std::vector<double> out;
        std::istringstream in(raw(key));
        std::string item;
        while (std::getline(in, item, ',')) {
            out.push_back(parse_real(key, trim(item)));
        }
        if (out.empty()) {
            throw ConfigError(key + ": expected a comma-separated list of numbers");
        }
        return out;
    }

    std::string text(const std::string& key, const std::string& fallback) const
    {
        return has(key) ? raw(key) : fallback;
    }

private:
    static double parse_real(const std::string& key, const std::string& s)
    {
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
            throw ConfigError(key + ": expected a number, got '" + s + "'");
        }
        return v;
    }

    std::map<std::string, std::string> values_;
};

// Runs a validator and reports its message as a config error.
template <class F>
void checked(F&& f)
{
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

std::string join(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? ", " : "") + format_double(v[i]);
    }
    return out;
}

}  // namespace

ReceiverParams SimConfig::receiver_params() const
{
    if (receiver) {
        return *receiver;
    }
    if (receiver_si) {
        return physical_to_dimensionless(*receiver_si, system.gamma_si).params;
    }
    throw ConfigError("receiver: no receiver block configured");
}

void SimConfig::validate() const
{
    checked([&] { system.validate(); });
    if (detector == DetectorKind::apd) {
        if (!apd || receiver || receiver_si) {
            throw ConfigError("detector: apd requires exactly the apd.* block");
        }
        checked([&] { apd->validate(); });
    } else {
        if (apd || (receiver.has_value() == receiver_si.has_value())) {
            throw ConfigError("detector: homodyne requires exactly one receiver.* block (dimensionless or SI)");
        }
        checked([&] { receiver_params().validate(); });
        if (grid.n_points < 3) {
            throw ConfigError("grid.n_points must be >= 3");
        }
        if (!(grid.n_sigma > 0.0)) {
            throw ConfigError("grid.n_sigma must be > 0");
        }
    }
    if (!(engine.dt >= 0.0)) {
        throw ConfigError("engine.dt must be >= 0 (0 selects the default step)");
    }
    if (!(engine.t_final > 0.0)) {
        throw ConfigError("engine.t_final must be > 0");
    }
    if (engine.sample_stride < 1) {
        throw ConfigError("engine.sample_stride must be >= 1");
    }
    if (engine.n_trajectories < 1) {
        throw ConfigError("engine.n_trajectories must be >= 1");
    }
    if (!(engine.t_burn >= 0.0)) {
        throw ConfigError("engine.t_burn must be >= 0");
    }
    if (mode != "self-consistent" && mode != "truth-driven" && mode != "ideal-baseline") {
        throw ConfigError("mode: expected self-consistent, truth-driven or ideal-baseline, got '" + mode + "'");
    }
    if (initial.norm_squared() > 1.0 + kStateTolerance) {
        throw ConfigError("initial: Bloch vector (initial.x, initial.y, initial.z) longer than 1");
    }
    if (output_prefix.empty() || output_prefix.find('/') != std::string::npos) {
        throw ConfigError("output.prefix must be a non-empty file name");
    }
    for (double w : sweep_omegas) {
        if (!(w >= 0.0)) {
            throw ConfigError("sweep.omegas: values must be >= 0");
        }
    }
}

SimConfig parse_config(const std::string& text)
{
    const Entries e(text);
    SimConfig c;

    c.system.omega = e.real("system.omega");
    c.system.gamma_si = e.real("system.gamma_si", c.system.gamma_si);

    const std::string det = e.raw("detector");
    if (det == "apd") {
        c.detector = DetectorKind::apd;
    } else if (det == "homodyne") {
        c.detector = DetectorKind::homodyne;
    } else {
        throw ConfigError("detector: expected apd or homodyne, got '" + det + "'");
    }

    if (c.detector == DetectorKind::apd) {
        if (e.has_prefix("receiver.") || e.has_prefix("grid.")) {
            throw ConfigError("detector: apd config must not contain receiver.* or grid.* keys");
        }
        ApdParams a;
        a.eta = e.real("apd.eta");
        a.gamma_r = e.real("apd.gamma_r");
        a.tau_dd = e.real("apd.tau_dd");
        a.gamma_dk = e.real("apd.gamma_dk");
        c.apd = a;
    } else {
        if (e.has_prefix("apd.")) {
            throw ConfigError("detector: homodyne config must not contain apd.* keys");
        }
        const bool dimensionless = e.has("receiver.gamma") || e.has("receiver.N");
        const bool si = e.has("receiver.R") || e.has("receiver.C") || e.has("receiver.kT") || e.has("receiver.P") ||
                        e.has("receiver.omega0") || e.has("receiver.e_charge");
        if (dimensionless && si) {
            throw ConfigError("receiver: give either receiver.gamma/receiver.N or the SI circuit keys, not both");
        }
        if (si) {
            PhysicalReceiverParams p;
            p.R = e.real("receiver.R");
            p.C = e.real("receiver.C");
            p.kT = e.real("receiver.kT");
            p.P = e.real("receiver.P");
            p.omega0 = e.real("receiver.omega0");
            p.e_charge = e.real("receiver.e_charge", p.e_charge);
            p.eta = e.real("receiver.eta");
            p.phi = e.real("receiver.phi", 0.0);
            c.receiver_si = p;
        } else {
            ReceiverParams r;
            r.eta = e.real("receiver.eta");
            r.phi = e.real("receiver.phi", 0.0);
            r.gamma = e.real("receiver.gamma");
            r.noise_power = e.real("receiver.N");
            c.receiver = r;
        }
        c.grid.n_points = static_cast<int>(e.integer("grid.n_points", c.grid.n_points));
        c.grid.n_sigma = e.real("grid.n_sigma", c.grid.n_sigma);
    }

    c.engine.dt = e.real("engine.dt", 0.0);
    c.engine.t_final = e.real("engine.t_final");
    c.engine.sample_stride = static_cast<int>(e.integer("engine.sample_stride", c.engine.sample_stride));
    c.engine.master_seed = e.unsigned_integer("engine.seed", c.engine.master_seed);
    c.engine.n_trajectories = static_cast<int>(e.integer("engine.n_trajectories", c.engine.n_trajectories));
    c.engine.t_burn = e.real("engine.t_burn", c.engine.t_burn);
    c.engine.n_threads = static_cast<unsigned>(e.integer("engine.threads", 0));

    c.mode = e.text("mode", c.mode);
    c.initial = {e.real("initial.x", 0.0), e.real("initial.y", 0.0), e.real("initial.z", -1.0)};
    c.output_dir = e.text("output.dir", c.output_dir);
    c.output_prefix = e.text("output.prefix", c.output_prefix);
    c.sweep_omegas = e.list("sweep.omegas", c.sweep_omegas);
    c.sweep_phases = e.list("sweep.phases", c.sweep_phases);

    c.validate();
    return c;
}

SimConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string SimConfig::to_text() const
{
    std::ostringstream out;
    auto kv = [&](const std::string& k, const std::string& v) { out << k << " = " << v << '\n'; };
    auto kd = [&](const std::string& k, double v) { kv(k, format_double(v)); };

    kd("system.omega", system.omega);
    kd("system.gamma_si", system.gamma_si);
    kv("detector", detector == DetectorKind::apd ? "apd" : "homodyne");
    kv("mode", mode);
    if (apd) {
        kd("apd.eta", apd->eta);
        kd("apd.gamma_r", apd->gamma_r);
        kd("apd.tau_dd", apd->tau_dd);
        kd("apd.gamma_dk", apd->gamma_dk);
    }
    if (receiver) {
        kd("receiver.eta", receiver->eta);
        kd("receiver.phi", receiver->phi);
        kd("receiver.gamma", receiver->gamma);
        kd("receiver.N", receiver->noise_power);
    }
    if (receiver_si) {
        kd("receiver.eta", receiver_si->eta);
        kd("receiver.phi", receiver_si->phi);
        kd("receiver.R", receiver_si->R);
        kd("receiver.C", receiver_si->C);
        kd("receiver.kT", receiver_si->kT);
        kd("receiver.P", receiver_si->P);
        kd("receiver.omega0", receiver_si->omega0);
        kd("receiver.e_charge", receiver_si->e_charge);
    }
    if (detector == DetectorKind::homodyne) {
        kv("grid.n_points", std::to_string(grid.n_points));
        kd("grid.n_sigma", grid.n_sigma);
    }
    kd("engine.dt", engine.dt);
    kd("engine.t_final", engine.t_final);
    kv("engine.sample_stride", std::to_string(engine.sample_stride));
    kv("engine.seed", std::to_string(engine.master_seed));
    kv("engine.n_trajectories", std::to_string(engine.n_trajectories));
    kd("engine.t_burn", engine.t_burn);
    kv("engine.threads", std::to_string(engine.n_threads));
    kd("initial.x", initial.x);
    kd("initial.y", initial.y);
    kd("initial.z", initial.z);
    kv("output.dir", output_dir);
    kv("output.prefix", output_prefix);
    kv("sweep.omegas", join(sweep_omegas));
    kv("sweep.phases", join(sweep_phases));
    return out.str();
}

}  // namespace realtraj

#include "realtraj/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <variant>

namespace realtraj {

void EngineConfig::validate() const
{
    if (!(dt > 0.0)) {
        throw std::invalid_argument("engine.dt must be > 0");
    }
    if (!(t_final >= dt)) {
        throw std::invalid_argument("engine.t_final must be >= engine.dt");
    }
    if (sample_stride < 1) {
        throw std::invalid_argument("engine.sample_stride must be >= 1");
    }
    if (n_trajectories < 1) {
        throw std::invalid_argument("engine.n_trajectories must be >= 1");
    }
    if (!(t_burn >= 0.0)) {
        throw std::invalid_argument("engine.t_burn must be >= 0");
    }
}

std::int64_t EngineConfig::n_steps() const
{
    return static_cast<std::int64_t>(std::llround(t_final / dt));
}

void TrajectoryRecord::push_state(double t, const DensityOperator& rho)
{
    const BlochVector b = expectations(rho);
    times.push_back(t);
    x.push_back(b.x);
    y.push_back(b.y);
    z.push_back(b.z);
    purity.push_back(0.5 * (1.0 + b.norm_squared()));
}

void TrajectoryRecord::push_truth(const BlochVector& b)
{
    x_true.push_back(b.x);
    y_true.push_back(b.y);
    z_true.push_back(b.z);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index)
{
    std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double event_tolerance(double t)
{
    return 1e-12 * std::max(1.0, std::abs(t));
}

std::vector<Interval> split_step_at_events(double t, double dt, const std::deque<double>& events)
{
    const double end = t + dt;
    const double tol = event_tolerance(end);
    std::vector<Interval> out;
    double begin = t;
    for (double ev : events) {
        if (ev <= begin + tol) {
            continue;
        }
        if (ev >= end - tol) {
            break;
        }
        out.push_back({begin, ev});
        begin = ev;
    }
    out.push_back({begin, end});
    return out;
}

double EnsembleStats::trace_distance_se(std::size_t i) const
{
    return 0.5 * std::sqrt(se_x[i] * se_x[i] + se_y[i] * se_y[i] + se_z[i] * se_z[i]);
}

double window_average_purity(const TrajectoryRecord& record, double t_burn)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (record.times[i] >= t_burn - event_tolerance(t_burn)) {
            sum += record.purity[i];
            ++n;
        }
    }
    if (n == 0) {
        throw std::invalid_argument("window_average_purity: no samples after burn-in");
    }
    return sum / static_cast<double>(n);
}

namespace {

// Welford accumulator per series element.
struct SeriesMoments {
    std::vector<double> mean;
    std::vector<double> m2;

    void add(const std::vector<double>& v, std::size_t n)
    {
        if (mean.empty()) {
            mean.assign(v.size(), 0.0);
            m2.assign(v.size(), 0.0);
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = v[i] - mean[i];
            mean[i] += d / static_cast<double>(n);
            m2[i] += d * (v[i] - mean[i]);
        }
    }

    std::vector<double> standard_error(std::size_t n) const
    {
        std::vector<double> se(mean.size(), 0.0);
        if (n < 2) {
            return se;
        }
        const double nn = static_cast<double>(n);
        for (std::size_t i = 0; i < se.size(); ++i) {
            se[i] = std::sqrt(m2[i] / (nn - 1.0) / nn);
        }
        return se;
    }
};

class Reducer {
public:
    Reducer(const EngineConfig& cfg, bool keep) : cfg_(cfg), keep_(keep) { stats_.t_burn = cfg.t_burn; }

    void add(std::size_t index, std::uint64_t seed, std::variant<TrajectoryRecord, std::string> result)
    {
        if (auto* msg = std::get_if<std::string>(&result)) {
            stats_.failures.push_back({index, seed, *msg});
            return;
        }
        auto& rec = std::get<TrajectoryRecord>(result);
        if (stats_.n_completed > 0 && rec.times != stats_.times) {
            stats_.failures.push_back({index, seed, "sample times differ from the rest of the ensemble"});
            return;
        }
        double wp = 0.0;
        try {
            wp = window_average_purity(rec, cfg_.t_burn);
        } catch (const std::exception& e) {
            stats_.failures.push_back({index, seed, e.what()});
            return;
        }
        if (stats_.n_completed == 0) {
            stats_.times = rec.times;
        }
        const std::size_t n = ++stats_.n_completed;
        x_.add(rec.x, n);
        y_.add(rec.y, n);
        z_.add(rec.z, n);
        p_.add(rec.purity, n);
        stats_.window_purity.push_back(wp);
        if (keep_) {
            stats_.records.push_back(std::move(rec));
        }
    }

    EnsembleStats finish()
    {
        const std::size_t n = stats_.n_completed;
        stats_.mean_x = x_.mean;
        stats_.mean_y = y_.mean;
        stats_.mean_z = z_.mean;
        stats_.mean_purity = p_.mean;
        stats_.se_x = x_.standard_error(n);
        stats_.se_y = y_.standard_error(n);
        stats_.se_z = z_.standard_error(n);
        stats_.se_purity = p_.standard_error(n);
        stats_.t_end = stats_.times.empty() ? 0.0 : stats_.times.back();

        SeriesMoments w;
        for (std::size_t i = 0; i < stats_.window_purity.size(); ++i) {
            w.add({stats_.window_purity[i]}, i + 1);
        }
        if (n > 0) {
            stats_.stationary_purity = w.mean[0];
            stats_.stationary_purity_se = w.standard_error(n)[0];
        }
        return std::move(stats_);
    }

private:
    EngineConfig cfg_;
    bool keep_;
    EnsembleStats stats_;
    SeriesMoments x_, y_, z_, p_;
};

}  // namespace

EnsembleStats run_ensemble(const TrajectoryModel& model, const EngineConfig& cfg, bool keep_records)
{
    cfg.validate();
    const auto n_traj = static_cast<std::size_t>(cfg.n_trajectories);
    unsigned n_workers = cfg.n_threads != 0 ? cfg.n_threads : std::max(1u, std::thread::hardware_concurrency());
    n_workers = static_cast<unsigned>(std::min<std::size_t>(n_workers, n_traj));

    Reducer reducer(cfg, keep_records);
    std::mutex mu;
    std::map<std::size_t, std::variant<TrajectoryRecord, std::string>> pending;
    std::size_t next_to_reduce = 0;
    std::atomic<std::size_t> next_index{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next_index.fetch_add(1);
            if (i >= n_traj) {
                return;
            }
            const std::uint64_t seed = derive_seed(cfg.master_seed, i);
            std::variant<TrajectoryRecord, std::string> result;
            try {
                result = model(seed);
            } catch (const std::exception& e) {
                result = std::string(e.what());
            }
            std::lock_guard lock(mu);
            pending.emplace(i, std::move(result));
            // Reduce strictly in index order.
            for (auto it = pending.find(next_to_reduce); it != pending.end(); it = pending.find(next_to_reduce)) {
                reducer.add(next_to_reduce, derive_seed(cfg.master_seed, next_to_reduce), std::move(it->second));
                pending.erase(it);
                ++next_to_reduce;
            }
        }
    };

    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    return reducer.finish();
}

}  // namespace realtraj

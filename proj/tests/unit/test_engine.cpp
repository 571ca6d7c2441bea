#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "realtraj/engine.hpp"

using namespace realtraj;

namespace {

// Trajectories with a random but fixed Bloch vector, sampled at t = 0, 0.5, ..., 2.
TrajectoryModel noise_model(double spread)
{
    return [spread](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-spread, spread);
        const double x = u(rng), y = u(rng), z = u(rng);
        TrajectoryRecord rec;
        rec.seed = seed;
        for (int i = 0; i <= 4; ++i) {
            rec.push_state(0.5 * i, DensityOperator::from_bloch(x, y, z));
        }
        return rec;
    };
}

EngineConfig small_config(int n)
{
    EngineConfig cfg;
    cfg.dt = 0.5;
    cfg.t_final = 2.0;
    cfg.sample_stride = 1;
    cfg.n_trajectories = n;
    cfg.t_burn = 1.0;
    cfg.master_seed = 99;
    return cfg;
}

}  // namespace

TEST_CASE("engine config invariants")
{
    EngineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.n_steps() == 200000);
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = EngineConfig{};
    cfg.t_final = cfg.dt / 2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = EngineConfig{};
    cfg.sample_stride = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = EngineConfig{};
    cfg.n_trajectories = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("seed derivation")
{
    CHECK(derive_seed(1, 0) == derive_seed(1, 0));
    std::set<std::uint64_t> seen;
    for (std::uint64_t m : {0ull, 1ull, 2ull}) {
        for (std::uint64_t i = 0; i < 1000; ++i) {
            seen.insert(derive_seed(m, i));
        }
    }
    CHECK(seen.size() == 3000);
}

TEST_CASE("step splitting at events")
{
    std::deque<double> none;
    auto one = split_step_at_events(1.0, 0.1, none);
    REQUIRE(one.size() == 1);
    CHECK(one[0].begin == 1.0);
    CHECK(one[0].end == doctest::Approx(1.1));

    std::deque<double> mid{1.05};
    auto two = split_step_at_events(1.0, 0.1, mid);
    REQUIRE(two.size() == 2);
    CHECK(two[0].end == 1.05);
    CHECK(two[1].begin == 1.05);
    CHECK(two[0].end - two[0].begin == doctest::Approx(0.05));
    CHECK(two[1].end - two[1].begin == doctest::Approx(0.05));

    std::deque<double> at_end{1.1};
    auto edge = split_step_at_events(1.0, 0.1, at_end);
    REQUIRE(edge.size() == 1);
    CHECK(edge[0].end == doctest::Approx(1.1));

    std::deque<double> several{1.02, 1.07, 3.0};
    auto three = split_step_at_events(1.0, 0.1, several);
    REQUIRE(three.size() == 3);
    CHECK(three[0].begin == 1.0);
    CHECK(three[2].end == doctest::Approx(1.1));
    for (std::size_t k = 1; k < three.size(); ++k) {
        CHECK(three[k].begin == three[k - 1].end);
    }
}

TEST_CASE("single-trajectory ensemble equals its record")
{
    const auto model = noise_model(0.5);
    const EnsembleStats stats = run_ensemble(model, small_config(1), true);
    const TrajectoryRecord rec = model(derive_seed(99, 0));
    REQUIRE(stats.n_completed == 1);
    CHECK(stats.times == rec.times);
    CHECK(stats.mean_x == rec.x);
    CHECK(stats.mean_y == rec.y);
    CHECK(stats.mean_z == rec.z);
    CHECK(stats.mean_purity == rec.purity);
    CHECK(stats.stationary_purity == doctest::Approx(rec.purity[0]));
    CHECK(stats.records.size() == 1);
}

TEST_CASE("ensembles are deterministic and independent of the thread count")
{
    const auto model = noise_model(0.5);
    EngineConfig cfg = small_config(37);
    cfg.n_threads = 1;
    const EnsembleStats a = run_ensemble(model, cfg);
    cfg.n_threads = 4;
    const EnsembleStats b = run_ensemble(model, cfg);
    CHECK(a.mean_x == b.mean_x);
    CHECK(a.mean_z == b.mean_z);
    CHECK(a.se_y == b.se_y);
    CHECK(a.window_purity == b.window_purity);
    CHECK(a.stationary_purity == b.stationary_purity);
}

TEST_CASE("a constant model gives constant aggregates")
{
    TrajectoryModel still = [](std::uint64_t) {
        TrajectoryRecord rec;
        for (int i = 0; i <= 4; ++i) {
            rec.push_state(0.5 * i, DensityOperator::from_bloch(0.1, 0.2, -0.3));
        }
        return rec;
    };
    const EnsembleStats s = run_ensemble(still, small_config(20));
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        CHECK(s.mean_x[i] == doctest::Approx(0.1));
        CHECK(s.mean_z[i] == doctest::Approx(-0.3));
        CHECK(s.se_x[i] == doctest::Approx(0.0));
        CHECK(s.trace_distance_se(i) == doctest::Approx(0.0));
    }
    CHECK(s.stationary_purity_se == doctest::Approx(0.0));
}

TEST_CASE("standard errors shrink as one over root n")
{
    const auto model = noise_model(0.5);
    const double sd = 1.0 / std::sqrt(12.0); // uniform on [-0.5, 0.5]
    for (int n : {100, 400, 1600}) {
        const EnsembleStats s = run_ensemble(model, small_config(n));
        const double expected = sd / std::sqrt(static_cast<double>(n));
        CHECK(s.se_x[0] == doctest::Approx(expected).epsilon(0.2));
        CHECK(s.se_y[2] == doctest::Approx(expected).epsilon(0.2));
        CHECK(std::abs(s.mean_x[0]) < 4.0 * expected);
    }
}

TEST_CASE("failing trajectories are reported and excluded")
{
    const auto base = noise_model(0.5);
    const std::uint64_t bad = derive_seed(99, 3);
    TrajectoryModel flaky = [&](std::uint64_t seed) {
        if (seed == bad) {
            throw std::runtime_error("invariant breach");
        }
        return base(seed);
    };
    const EnsembleStats s = run_ensemble(flaky, small_config(10));
    CHECK(s.n_completed == 9);
    REQUIRE(s.failures.size() == 1);
    CHECK(s.failures[0].index == 3);
    CHECK(s.failures[0].seed == bad);
    CHECK(s.failures[0].message == "invariant breach");
}

TEST_CASE("window-averaged purity")
{
    TrajectoryRecord rec;
    rec.push_state(0.0, DensityOperator::ground());
    rec.push_state(1.0, DensityOperator::maximally_mixed());
    rec.push_state(2.0, DensityOperator::from_bloch(0.0, 0.0, 0.5));
    CHECK(window_average_purity(rec, 1.0) == doctest::Approx(0.5 * (0.5 + 0.625)));
    CHECK(window_average_purity(rec, 0.0) == doctest::Approx((1.0 + 0.5 + 0.625) / 3.0));
    CHECK_THROWS_AS(window_average_purity(rec, 5.0), std::invalid_argument);
}

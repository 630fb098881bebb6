#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "hj/averaging.hpp"

using namespace hj;

TEST_CASE("radial oracle: quadratic cost averages to q^2 h") {
    HamiltonianField f = make_hamiltonian("radial");
    RunningCostSpec cost = RunningCostSpec::quadratic();
    for (double h : {0.1, 0.45, 1.0}) {
        LevelLoop loop = trace_loop(f, h, {std::sqrt(2.0 * h), 0.0}, 1e-10);
        for (double q : {-1.5, 0.3, 2.0}) {
            CHECK(averaged_g(f, cost, loop, q) == doctest::Approx(q * q * h).epsilon(1e-8));
        }
    }
}

TEST_CASE("norm cost average equals |q| L / T to roundoff") {
    HamiltonianField f = make_hamiltonian("h3");
    RunningCostSpec cost = RunningCostSpec::norm();
    LevelLoop loop = trace_loop(f, -0.05, {0.45, 0.0}, 1e-9);
    LoopMetrics m = loop_metrics(loop, f);
    for (double q : {-2.0, 0.7, 1.3}) {
        double g = averaged_g(f, cost, loop, q);
        CHECK(g == doctest::Approx(std::abs(q) * m.length / m.period).epsilon(1e-10));
    }
}

TEST_CASE("line-integral and time-average routes agree") {
    HamiltonianField f = make_hamiltonian("h3");
    RunningCostSpec cost = RunningCostSpec::quadratic([](Vec2 x) { return x.x; });
    LevelLoop loop = trace_loop(f, -0.08, {0.45, 0.0}, 1e-9);
    Vec2 x0 = loop.vertices.front();
    for (double q : {0.0, 0.8, -1.1}) {
        double a = averaged_g(f, cost, loop, q);
        double b = averaged_g_time_route(f, cost, x0, q);
        CHECK(a == doctest::Approx(b).epsilon(2e-6));
    }
}

TEST_CASE("tabulated rows are convex piecewise-linear with correct interpolation") {
    HamiltonianField f = make_hamiltonian("h3");
    FlowGraph g = build_graph(f, 0.3, {-0.2, -0.2});
    GridSpecEdge spec;
    spec.count = 8;
    spec.innermost_frac = 1e-2;
    auto profiles = tabulate_profiles(f, g, spec);
    RunningCostSpec cost = RunningCostSpec::quadratic();
    AveragedTable t = tabulate_gbar(f, cost, g, profiles[1], 6.0, 121);

    for (std::size_t k = 0; k < t.levels.size(); ++k) {
        // convexity of each row in q
        for (std::size_t j = 1; j + 1 < t.q_grid.size(); ++j)
            CHECK(t.values[k][j] <= 0.5 * (t.values[k][j - 1] + t.values[k][j + 1]) + 1e-12);
        // grid point queries reproduce the table
        CHECK(t.row_value(static_cast<int>(k), t.q_grid[3]) ==
              doctest::Approx(t.values[k][3]).epsilon(1e-14));
        double am = 0.0;
        double mn = t.row_min(static_cast<int>(k), am);
        CHECK(mn <= t.row_value(static_cast<int>(k), 0.0) + 1e-14);
    }
    // table L, T refine the loop-metrics profile at matching accuracy
    for (std::size_t k = 0; k < t.levels.size(); ++k) {
        CHECK(t.L[k] == doctest::Approx(profiles[1].L[k]).epsilon(1e-8));
        CHECK(t.T[k] == doctest::Approx(profiles[1].T[k]).epsilon(1e-8));
    }
}

TEST_CASE("row extrapolation beyond the q range keeps the boundary slope") {
    HamiltonianField f = make_hamiltonian("h3");
    FlowGraph g = build_graph(f, 0.3, {-0.2, -0.2});
    GridSpecEdge spec;
    spec.count = 4;
    spec.innermost_frac = 1e-1;
    auto profiles = tabulate_profiles(f, g, spec);
    AveragedTable t = tabulate_gbar(f, RunningCostSpec::quadratic(), g, profiles[0], 6.0, 61);
    t.q_clipped = false;
    double inside = t.row_value(0, t.q_grid.back());
    double outside = t.row_value(0, t.q_grid.back() + 1.0);
    CHECK(outside > inside);
    CHECK(t.q_clipped);
}

TEST_CASE("constant cost tabulates flat rows") {
    HamiltonianField f = make_hamiltonian("h3");
    FlowGraph g = build_graph(f, 0.3, {-0.2, -0.2});
    GridSpecEdge spec;
    spec.count = 3;
    spec.innermost_frac = 1e-1;
    auto profiles = tabulate_profiles(f, g, spec);
    AveragedTable t = tabulate_gbar(f, RunningCostSpec::constant(2.5), g, profiles[2], 3.0, 11);
    for (const auto& row : t.values)
        for (double v : row) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("loc-coercivity: rows dominate nu L/T |q| - M") {
    HamiltonianField f = make_hamiltonian("h3");
    FlowGraph g = build_graph(f, 0.3, {-0.2, -0.2});
    GridSpecEdge spec;
    spec.count = 6;
    spec.innermost_frac = 1e-3;
    auto profiles = tabulate_profiles(f, g, spec);
    RunningCostSpec cost = RunningCostSpec::eikonal();
    for (const auto& p : profiles) {
        AveragedTable t = tabulate_gbar(f, cost, g, p, 4.0, 41);
        for (std::size_t k = 0; k < t.levels.size(); ++k) {
            double slope = cost.nu * t.L[k] / t.T[k];
            for (std::size_t j = 0; j < t.q_grid.size(); ++j)
                CHECK(t.values[k][j] >=
                      slope * std::abs(t.q_grid[j]) - cost.M - 1e-10);
        }
    }
}

TEST_CASE("cost spec parsing") {
    CHECK(RunningCostSpec::parse("const:1.5").c == doctest::Approx(1.5));
    CHECK(RunningCostSpec::parse("norm").kind == CostKind::Norm);
    CHECK(RunningCostSpec::parse("quad:x1").f(Vec2{0.3, 0.0}) == doctest::Approx(0.3));
    CHECK(RunningCostSpec::parse("eik").kind == CostKind::Eikonal);
    CHECK_THROWS(RunningCostSpec::parse("bogus"));
    CHECK_THROWS(RunningCostSpec::parse("quad:bogus"));
}

TEST_CASE("table cache round trip") {
    HamiltonianField f = make_hamiltonian("h3");
    FlowGraph g = build_graph(f, 0.3, {-0.2, -0.2});
    GridSpecEdge spec;
    spec.count = 3;
    spec.innermost_frac = 1e-1;
    auto profiles = tabulate_profiles(f, g, spec);
    AveragedTable t = tabulate_gbar(f, RunningCostSpec::norm(), g, profiles[1], 3.0, 15);
    const char* path = "gbar_cache_test.bin";
    REQUIRE(save_table_cache(t, path));
    AveragedTable u;
    REQUIRE(load_table_cache(u, path));
    REQUIRE(u.levels.size() == t.levels.size());
    REQUIRE(u.q_grid.size() == t.q_grid.size());
    for (std::size_t k = 0; k < t.levels.size(); ++k)
        for (std::size_t j = 0; j < t.q_grid.size(); ++j)
            CHECK(u.values[k][j] == t.values[k][j]);
    std::remove(path);
    // keys separate different configurations
    auto k1 = table_cache_key("h3", RunningCostSpec::norm(), 1, profiles[1], 3.0, 15);
    auto k2 = table_cache_key("h3", RunningCostSpec::norm(), 2, profiles[1], 3.0, 15);
    CHECK(k1 != k2);
}

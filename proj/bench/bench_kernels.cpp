// Timings for the parallel kernels against their serial references. The two
// paths must agree on values; the parallel eps solver is Jacobi and the serial
// one Gauss-Seidel, so their iterates differ but the fixed points match.
#include <chrono>
#include <cmath>
#include <cstdio>

#include "hj/eps_solver.hpp"

using namespace hj;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

}  // namespace

int main() {
    HamiltonianField f = make_hamiltonian("h3");
    FlowGraph g = build_graph(f, 0.3, {-0.2, -0.2});
    GridSpecEdge spec{48, 1e-5};

    auto t0 = clock_type::now();
    auto prof_par = tabulate_profiles(f, g, spec, 1e-8, true);
    double tp = seconds_since(t0);
    t0 = clock_type::now();
    auto prof_ser = tabulate_profiles_serial(f, g, spec, 1e-8);
    double ts = seconds_since(t0);
    double dmax = 0.0;
    for (std::size_t e = 0; e < prof_par.size(); ++e)
        for (std::size_t i = 0; i < prof_par[e].T.size(); ++i)
            dmax = std::max(dmax, std::abs(prof_par[e].T[i] - prof_ser[e].T[i]));
    std::printf("tabulate_profiles  parallel %.3fs  serial %.3fs  speedup %.2fx  max|dT| %.2e\n",
                tp, ts, ts / tp, dmax);

    RunningCostSpec cost = RunningCostSpec::quadratic();
    GridSpec grid = build_grid(f, g, 129);
    std::vector<double> data(3, -1.0);
    t0 = clock_type::now();
    EpsField up = solve_eps(f, cost, 1.0, 0.2, grid, data, true, 1e-8);
    tp = seconds_since(t0);
    t0 = clock_type::now();
    EpsField us = solve_eps(f, cost, 1.0, 0.2, grid, data, false, 1e-8);
    ts = seconds_since(t0);
    dmax = 0.0;
    for (std::size_t i = 0; i < up.u.size(); ++i)
        dmax = std::max(dmax, std::abs(up.u[i] - us.u[i]));
    std::printf("solve_eps 129^2    parallel %.3fs (%d sweeps)  serial %.3fs (%d sweeps)  speedup %.2fx  max|du| %.2e\n",
                tp, up.sweeps, ts, us.sweeps, ts / tp, dmax);
    return 0;
}

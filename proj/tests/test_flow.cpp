#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hj/flow.hpp"
#include "hj/rk45.hpp"

using namespace hj;

TEST_CASE("adaptive integrator: harmonic oscillator over many periods") {
    auto rhs = [](double, const StateVec<2>& y) -> StateVec<2> { return {y[1], -y[0]}; };
    auto res = rk45_integrate<2>(rhs, 0.0, 20.0 * M_PI, {1.0, 0.0}, 1e-11, 1e-11,
                                 [](double, const StateVec<2>&) { return true; });
    CHECK(std::abs(res.state[0] - 1.0) < 1e-8);
    CHECK(std::abs(res.state[1]) < 1e-8);
    CHECK_FALSE(res.step_underflow);
}

TEST_CASE("flow conserves energy") {
    for (const char* fam : {"h3", "h4"}) {
        HamiltonianField f = make_hamiltonian(fam);
        Trajectory t = integrate(f, {0.9, 0.3}, 30.0, 1e-11);
        CHECK(t.energy_drift < 1e-8);
        CHECK_FALSE(t.step_underflow);
    }
}

TEST_CASE("period of the radial oracle is 2*pi at every radius") {
    HamiltonianField f = make_hamiltonian("radial");
    for (double r : {0.2, 0.7, 1.5}) {
        double T = measure_period(f, {r, 0.0}, 1e-10);
        CHECK(T == doctest::Approx(2.0 * M_PI).epsilon(1e-8));
    }
}

TEST_CASE("period is invariant under the start point on one orbit") {
    HamiltonianField f = make_hamiltonian("h3");
    Trajectory t = integrate(f, {0.3, 0.0}, 0.7, 1e-11);
    double T1 = measure_period(f, {0.3, 0.0}, 1e-9);
    double T2 = measure_period(f, t.endpoint(), 1e-9);
    CHECK(T1 == doctest::Approx(T2).epsilon(1e-7));
}

TEST_CASE("normal drift changes energy at the prescribed rate") {
    HamiltonianField f = make_hamiltonian("h3");
    for (int sign : {+1, -1}) {
        auto res = integrate_controlled(f, {0.9, 0.25}, 0.05,
                                        ControlLaw::normal_drift(0.3, sign), 0.4);
        CHECK(res.max_energy_rate_error < 1e-6);
    }
}

TEST_CASE("transit times obey the power-law bound on the two-well field") {
    HamiltonianField f = make_hamiltonian("h3");
    double c0 = fit_c0_on_region(f, 1e-2, 1.4, 3000);
    TransitResult r = measure_transit(f, 0.05, 1e-2, 0.3, 40, c0);
    CHECK(r.stalled_trials == 0);
    CHECK(r.max_transit > 0.0);
    CHECK(r.ratio <= 1.0);
}

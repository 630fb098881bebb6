#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hj/hamiltonian.hpp"

namespace hj {

enum class Termination { TimeElapsed, ReturnedToStart, LeftRegion };

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec2> points;
    double energy_drift = 0.0;  // max |H(X(t)) - H(X(0))|
    Termination termination = Termination::TimeElapsed;
    bool step_underflow = false;

    Vec2 endpoint() const { return points.back(); }
};

// Unperturbed Hamiltonian flow X' = b(X).
Trajectory integrate(const HamiltonianField& f, Vec2 x0, double horizon, double tol);

// First-return time to the Poincare section through x0 (normal to b(x0)),
// refined to the requested tolerance. Throws if no return is found.
double measure_period(const HamiltonianField& f, Vec2 x0, double tol);

// Control laws for the perturbed flow X' = b(X)/eps + alpha.
struct ControlLaw {
    enum class Kind { Callback, NormalDrift } kind = Kind::Callback;
    std::function<Vec2(double)> callback;  // alpha(t)
    double nu = 0.0;                       // NormalDrift: alpha = sign*nu*DH/|DH|
    int sign = +1;

    static ControlLaw zero();
    static ControlLaw normal_drift(double nu, int sign);
};

struct ControlledResult {
    Trajectory traj;
    double max_energy_rate_error = 0.0;  // relative error of dH/dt vs sign*nu*|DH|
};

ControlledResult integrate_controlled(const HamiltonianField& f, Vec2 x0, double epsilon,
                                      const ControlLaw& control, double horizon,
                                      double tol = 1e-10);

struct TransitResult {
    double max_transit = 0.0;  // max time spent inside Omega(h) = {|H| < h}
    double bound = 0.0;        // 2(m+2)/(nu c0 (m-n+2)) h^{(m-n+2)/(m+2)}
    double ratio = 0.0;
    int stalled_trials = 0;
};

// Drives X_+- from starts on the level sets {H = +-h/2} and reports the
// worst observed residence time in {|H| < h} against the power-law bound
// evaluated with the fitted c0.
TransitResult measure_transit(const HamiltonianField& f, double epsilon, double h,
                              double nu, int trials, double c0_fitted);

void write_trajectory_csv(const Trajectory& t, const HamiltonianField& f,
                          const std::string& path);

}  // namespace hj

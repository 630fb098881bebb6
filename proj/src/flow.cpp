#include "hj/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "hj/rk45.hpp"

namespace hj {

namespace {

StateVec<2> to_state(Vec2 v) { return {v.x, v.y}; }
Vec2 to_vec(const StateVec<2>& s) { return {s[0], s[1]}; }

}  // namespace

Trajectory integrate(const HamiltonianField& f, Vec2 x0, double horizon, double tol) {
    Trajectory traj;
    const double h0 = f.value(x0);
    auto rhs = [&f](double, const StateVec<2>& y) -> StateVec<2> {
        Vec2 b = f.drift(to_vec(y));
        return {b.x, b.y};
    };
    auto obs = [&](double t, const StateVec<2>& y) {
        traj.times.push_back(t);
        traj.points.push_back(to_vec(y));
        traj.energy_drift = std::max(traj.energy_drift, std::abs(f.value(to_vec(y)) - h0));
        return true;
    };
    auto res = rk45_integrate<2>(rhs, 0.0, horizon, to_state(x0), tol, tol, obs);
    traj.step_underflow = res.step_underflow;
    traj.termination = Termination::TimeElapsed;
    return traj;
}

double measure_period(const HamiltonianField& f, Vec2 x0, double tol) {
    Vec2 b0 = f.drift(x0);
    const double b0n = b0.norm();
    if (b0n < 1e-14) throw std::runtime_error("measure_period: start at a critical point");
    Vec2 n = b0 / b0n;  // section normal = initial flow direction

    auto rhs = [&f](double, const StateVec<2>& y) -> StateVec<2> {
        Vec2 b = f.drift(to_vec(y));
        return {b.x, b.y};
    };
    auto section = [&](Vec2 x) { return (x - x0).dot(n); };

    const double tau0 = std::max(1e-3, 2.0 * M_PI * std::max(x0.norm(), 0.1) / b0n);
    const double cap = 1e6 * tau0;
    const double itol = std::min(tol, 1e-10);

    double t_prev = 0.0;
    StateVec<2> y_prev = to_state(x0);
    double s_prev = 0.0;
    double max_dist = 0.0;
    bool armed = false;  // require having left the section neighborhood first
    double bracket_lo = -1.0, bracket_hi = -1.0;
    StateVec<2> y_lo{};

    auto obs = [&](double t, const StateVec<2>& y) {
        Vec2 x = to_vec(y);
        double d = dist(x, x0);
        max_dist = std::max(max_dist, d);
        double s = section(x);
        if (!armed) {
            if (d > 10.0 * (tol + 1e-12) && s < 0.0) armed = true;
        } else if (s_prev < 0.0 && s >= 0.0 && d < 0.3 * max_dist + 1e-12) {
            bracket_lo = t_prev;
            bracket_hi = t;
            y_lo = y_prev;
            return false;
        }
        t_prev = t;
        y_prev = y;
        s_prev = s;
        return true;
    };
    auto res = rk45_integrate<2>(rhs, 0.0, cap, to_state(x0), itol, itol, obs);
    if (bracket_lo < 0.0) {
        if (res.step_underflow)
            throw std::runtime_error("measure_period: step underflow near critical point");
        throw std::runtime_error("measure_period: no return within cap");
    }

    // Bisection on the section function over [bracket_lo, bracket_hi],
    // re-integrating the short remainder from the stored bracket state.
    auto s_at = [&](double t) {
        if (t <= bracket_lo) return section(to_vec(y_lo));
        auto r = rk45_integrate<2>(rhs, bracket_lo, t, y_lo, itol * 1e-2, itol * 1e-2,
                                   [](double, const StateVec<2>&) { return true; });
        return section(to_vec(r.state));
    };
    double lo = bracket_lo, hi = bracket_hi;
    for (int it = 0; it < 200 && (hi - lo) > tol * std::max(1.0, hi); ++it) {
        double mid = 0.5 * (lo + hi);
        if (s_at(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

ControlLaw ControlLaw::zero() {
    ControlLaw c;
    c.kind = Kind::Callback;
    c.callback = [](double) { return Vec2{0.0, 0.0}; };
    return c;
}

ControlLaw ControlLaw::normal_drift(double nu, int sign) {
    ControlLaw c;
    c.kind = Kind::NormalDrift;
    c.nu = nu;
    c.sign = sign;
    return c;
}

ControlledResult integrate_controlled(const HamiltonianField& f, Vec2 x0, double epsilon,
                                      const ControlLaw& control, double horizon,
                                      double tol) {
    ControlledResult out;
    Trajectory& traj = out.traj;
    const double origin_excl = 1e-8;
    const double h_start = f.value(x0);
    bool left = false;

    if (control.kind == ControlLaw::Kind::NormalDrift) {
        // Augmented state (x, e) with e' = nu*|DH|; then H(X(t)) - H(x0) must
        // equal sign*e(t), which checks dH/dt = sign*nu*|DH| to integrator accuracy.
        auto rhs = [&](double, const StateVec<3>& y) -> StateVec<3> {
            Vec2 x{y[0], y[1]};
            Vec2 g = f.gradient(x);
            double gn = g.norm();
            Vec2 a = (gn > 1e-300) ? g * (control.nu * control.sign / gn) : Vec2{0, 0};
            Vec2 b = f.drift(x) / epsilon + a;
            return {b.x, b.y, control.nu * gn};
        };
        auto obs = [&](double t, const StateVec<3>& y) {
            Vec2 x{y[0], y[1]};
            traj.times.push_back(t);
            traj.points.push_back(x);
            double dh = f.value(x) - h_start;
            if (std::abs(dh) > 1e-6) {
                double rel = std::abs(dh - control.sign * y[2]) / std::abs(dh);
                out.max_energy_rate_error = std::max(out.max_energy_rate_error, rel);
            }
            if (x.norm() <= origin_excl) {
                left = true;
                return false;
            }
            return true;
        };
        auto res = rk45_integrate<3>(rhs, 0.0, horizon, {x0.x, x0.y, 0.0}, tol, tol, obs);
        traj.step_underflow = res.step_underflow;
    } else {
        auto rhs = [&](double t, const StateVec<2>& y) -> StateVec<2> {
            Vec2 x = to_vec(y);
            Vec2 b = f.drift(x) / epsilon + control.callback(t);
            return {b.x, b.y};
        };
        auto obs = [&](double t, const StateVec<2>& y) {
            traj.times.push_back(t);
            traj.points.push_back(to_vec(y));
            return true;
        };
        auto res = rk45_integrate<2>(rhs, 0.0, horizon, to_state(x0), tol, tol, obs);
        traj.step_underflow = res.step_underflow;
    }
    traj.termination = left ? Termination::LeftRegion : Termination::TimeElapsed;
    return out;
}

namespace {

// Project x onto the level set {H = level} by Newton along DH.
bool project_to_level(const HamiltonianField& f, Vec2& x, double level) {
    for (int it = 0; it < 100; ++it) {
        double r = f.value(x) - level;
        if (std::abs(r) <= 1e-14 * (1.0 + std::abs(level))) return true;
        Vec2 g = f.gradient(x);
        double g2 = g.norm2();
        if (g2 < 1e-300) return false;
        x -= g * (r / g2);
    }
    return std::abs(f.value(x) - level) <= 1e-10 * (1.0 + std::abs(level));
}

// Residence time of one X_+- trajectory in {|H| < h}; returns <0 on stall.
double transit_time(const HamiltonianField& f, Vec2 x0, double epsilon, double h,
                    double nu, int sign) {
    double exited_at = -1.0;
    auto rhs = [&](double, const StateVec<2>& y) -> StateVec<2> {
        Vec2 x{y[0], y[1]};
        Vec2 g = f.gradient(x);
        double gn = g.norm();
        Vec2 a = (gn > 1e-300) ? g * (nu * sign / gn) : Vec2{0, 0};
        Vec2 b = f.drift(x) / epsilon + a;
        return {b.x, b.y};
    };
    auto obs = [&](double t, const StateVec<2>& y) {
        Vec2 x{y[0], y[1]};
        if (std::abs(f.value(x)) >= h) {
            exited_at = t;
            return false;
        }
        if (x.norm() <= 1e-10) return false;  // stalled at the saddle
        return true;
    };
    // |H| moves at rate nu*|DH| >= nu*c0*|H|^(n/(m+2)); cap generously.
    const double cap = 1e4 / std::max(nu, 1e-6);
    auto res = rk45_integrate<2>(rhs, 0.0, cap, {x0.x, x0.y}, 1e-10, 1e-10, obs);
    if (res.step_underflow || exited_at < 0.0) return -1.0;
    return exited_at;
}

}  // namespace

TransitResult measure_transit(const HamiltonianField& f, double epsilon, double h,
                              double nu, int trials, double c0_fitted) {
    TransitResult out;
    const double m = f.growth_m, n = f.growth_n;
    out.bound = 2.0 * (m + 2.0) / (nu * c0_fitted * (m - n + 2.0)) *
                std::pow(h, (m - n + 2.0) / (m + 2.0));

    std::mt19937_64 rng(20240810);
    std::uniform_real_distribution<double> u(-1.5, 1.5);

    std::vector<Vec2> starts;
    while (static_cast<int>(starts.size()) < trials) {
        Vec2 x{u(rng), u(rng)};
        double level = (starts.size() % 2 == 0) ? h / 2.0 : -h / 2.0;
        // only seeds already near the target level band project reliably
        if (std::abs(f.value(x)) > 0.5) continue;
        if (!project_to_level(f, x, level)) continue;
        if (x.norm() < 1e-4) continue;
        starts.push_back(x);
    }

    double worst = 0.0;
    int stalled = 0;
#pragma omp parallel for reduction(max : worst) reduction(+ : stalled) schedule(dynamic)
    for (int i = 0; i < static_cast<int>(starts.size()); ++i) {
        for (int sign : {+1, -1}) {
            double tau = transit_time(f, starts[i], epsilon, h, nu, sign);
            if (tau < 0.0)
                ++stalled;
            else
                worst = std::max(worst, tau);
        }
    }
    out.max_transit = worst;
    out.stalled_trials = stalled;
    out.ratio = out.max_transit / out.bound;
    return out;
}

void write_trajectory_csv(const Trajectory& t, const HamiltonianField& f,
                          const std::string& path) {
    std::ofstream out(path);
    out << "t,x1,x2,H\n";
    out.precision(17);
    for (std::size_t i = 0; i < t.times.size(); ++i)
        out << t.times[i] << ',' << t.points[i].x << ',' << t.points[i].y << ','
            << f.value(t.points[i]) << '\n';
}

}  // namespace hj

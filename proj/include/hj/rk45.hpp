#pragma once

// Embedded Dormand-Prince 5(4) integrator for small fixed-size states.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>

namespace hj {

template <std::size_t N>
using StateVec = std::array<double, N>;

template <std::size_t N>
struct Rk45Result {
    StateVec<N> state{};
    double t = 0.0;
    bool step_underflow = false;
};

namespace detail {

template <std::size_t N>
inline StateVec<N> axpy(const StateVec<N>& y, double h, const StateVec<N>& d) {
    StateVec<N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = y[i] + h * d[i];
    return r;
}

}  // namespace detail

// Single adaptive step attempt. Returns accepted step size in *h_used and a
// suggested next step in *h_next; fills y5 with the 5th-order solution.
// err_scale is the per-component tolerance: atol + rtol*|y|.
template <std::size_t N, class F>
bool rk45_step(const F& f, double t, const StateVec<N>& y, double h,
               double atol, double rtol, StateVec<N>& y5, double& err_norm) {
    // Dormand-Prince coefficients
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                            a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                            a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    StateVec<N> k1 = f(t, y);
    StateVec<N> k2 = f(t + h * a21, detail::axpy(y, h * a21, k1));
    StateVec<N> y3in, y4in, y5in, y6in;
    for (std::size_t i = 0; i < N; ++i)
        y3in[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    StateVec<N> k3 = f(t + 0.3 * h, y3in);
    for (std::size_t i = 0; i < N; ++i)
        y4in[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    StateVec<N> k4 = f(t + 0.8 * h, y4in);
    for (std::size_t i = 0; i < N; ++i)
        y5in[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    StateVec<N> k5 = f(t + 8.0 / 9.0 * h, y5in);
    for (std::size_t i = 0; i < N; ++i)
        y6in[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    StateVec<N> k6 = f(t + h, y6in);

    for (std::size_t i = 0; i < N; ++i)
        y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    StateVec<N> k7 = f(t + h, y5);

    err_norm = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double err = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
        double r = err / scale;
        err_norm += r * r;
    }
    err_norm = std::sqrt(err_norm / static_cast<double>(N));
    return err_norm <= 1.0;
}

// Integrate y' = f(t,y) from t0 to t1, invoking observe(t, y) after every
// accepted step (and once for the initial state). observe returning false
// stops the integration at that point.
template <std::size_t N, class F, class Obs>
Rk45Result<N> rk45_integrate(const F& f, double t0, double t1, StateVec<N> y0,
                             double atol, double rtol, const Obs& observe,
                             double h_init = 0.0) {
    Rk45Result<N> res;
    double dir = (t1 >= t0) ? 1.0 : -1.0;
    double t = t0;
    StateVec<N> y = y0;
    double span = std::abs(t1 - t0);
    double h = (h_init > 0.0) ? h_init * dir : dir * std::min(1e-3, span);
    const double h_min = span * 1e-14 + 1e-300;

    if (!observe(t, y)) {
        res.state = y;
        res.t = t;
        return res;
    }
    while (dir * (t1 - t) > 0.0) {
        if (std::abs(h) > std::abs(t1 - t)) h = t1 - t;
        StateVec<N> ynext;
        double err = 0.0;
        bool ok = rk45_step<N>(f, t, y, h, atol, rtol, ynext, err);
        double factor = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        factor = std::min(5.0, std::max(0.2, factor));
        if (ok) {
            t += h;
            y = ynext;
            h *= factor;
            if (!observe(t, y)) break;
        } else {
            h *= factor;
            if (std::abs(h) < h_min) {
                res.step_underflow = true;
                break;
            }
        }
    }
    res.state = y;
    res.t = t;
    return res;
}

}  // namespace hj

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hj/vec.hpp"

namespace hj {

// Analytic 2-D Hamiltonian with one saddle at the origin (H(0)=0, DH(0)=0)
// and N-1 wells of negative depth. The growth exponents (m, n) describe the
// Hessian bound |D2H| <= C|x|^m and the gradient lower bound c|x|^n <= |DH|
// in a ball of radius valid_radius around the origin.
struct HamiltonianField {
    std::string name;
    int n_critical = 0;    // N, total number of critical points
    double growth_m = 0.0;
    double growth_n = 0.0;
    double valid_radius = 0.5;

    std::function<double(Vec2)> value;
    std::function<Vec2(Vec2)> gradient;
    std::function<Mat2(Vec2)> hessian;

    double operator()(Vec2 x) const { return value(x); }
    // Hamiltonian drift b = (H_x2, -H_x1); tangent to level sets, |b| = |DH|.
    Vec2 drift(Vec2 x) const {
        Vec2 g = gradient(x);
        return {g.y, -g.x};
    }
};

enum class CriticalKind { LocalMin, Saddle, DegenerateSaddle };

struct CriticalPoint {
    Vec2 location;
    double energy = 0.0;
    CriticalKind kind = CriticalKind::LocalMin;
    int index = 0;
};

const char* to_string(CriticalKind k);

// Builtin families. HN requires the petal count parameter (>= 4).
// RADIAL is H = |x|^2/2, a test oracle outside the N>=3 class.
HamiltonianField make_hamiltonian(const std::string& family, int n_param = 0);

double evaluate_scalar(const HamiltonianField& f, Vec2 x);

struct SearchBox {
    double x_lo = -2.0, x_hi = 2.0, y_lo = -2.0, y_hi = 2.0;
};

// Newton search from a uniform seed grid, deduplicated at radius 1e-6.
// Throws std::runtime_error if the count disagrees with field.n_critical.
std::vector<CriticalPoint> find_critical_points(const HamiltonianField& f,
                                                const SearchBox& box = {},
                                                double seed_spacing = 0.05);

struct StructureReport {
    double fitted_C = 0.0;   // (H3): |H_xixj| <= C |x|^m
    double fitted_c = 0.0;   // (H4): c |x|^n <= |DH|
    double fitted_c0 = 0.0;  // c0 |H|^{n/(m+2)} <= |DH|
    bool hessian_ok = false;
    bool gradient_ok = false;
    bool energy_ok = false;
    bool pass() const { return hessian_ok && gradient_ok && energy_ok; }
};

// Fits the constants of (H3), (H4) and the derived |DH| >= c0|H|^{n/(m+2)}
// on the outer half (in log radius) of a log-uniform radial sample and then
// verifies the inequalities on the full sample with slack factor 1.01.
// A wrong declared (m, n) shows up as a verification failure.
StructureReport verify_structure(const HamiltonianField& f, double radius,
                                 int sample_count, unsigned seed = 12345);

// Fit of c0 over a sample of the transit region {|H| < h_max}; used by the
// transit-time bound which needs the inequality along whole trajectories.
double fit_c0_on_region(const HamiltonianField& f, double h_max, double box_radius,
                        int sample_count, unsigned seed = 777);

void write_critical_points_csv(const std::vector<CriticalPoint>& pts,
                               const std::string& path);

}  // namespace hj

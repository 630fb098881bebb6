#include "hj/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <random>

namespace hj {

const char* to_string(CriticalKind k) {
    switch (k) {
        case CriticalKind::LocalMin: return "local-min";
        case CriticalKind::Saddle: return "nondegenerate-saddle";
        case CriticalKind::DegenerateSaddle: return "degenerate-saddle";
    }
    return "?";
}

namespace {

using cplx = std::complex<double>;

// H_N(x) = |x|^N - Im((x1 + i x2)^(N-1)); in polar form r^N - r^(N-1) sin((N-1)theta).
// For N = 4 this is (x1^2+x2^2)^2 - 3 x1^2 x2 + x2^3.
HamiltonianField make_petal(int N) {
    HamiltonianField f;
    f.name = (N == 4) ? "H4" : ("H" + std::to_string(N));
    f.n_critical = N;
    f.growth_m = static_cast<double>(N - 3);
    f.growth_n = static_cast<double>(N - 2);
    f.valid_radius = 0.5;
    const double dN = static_cast<double>(N);
    f.value = [dN, N](Vec2 x) {
        double r2 = x.norm2();
        cplx z(x.x, x.y);
        cplx zp = std::pow(z, N - 1);
        return std::pow(r2, dN / 2.0) - zp.imag();
    };
    f.gradient = [dN, N](Vec2 x) -> Vec2 {
        double r2 = x.norm2();
        double rad = (r2 > 0.0) ? dN * std::pow(r2, dN / 2.0 - 1.0) : 0.0;
        cplx z(x.x, x.y);
        cplx w = (dN - 1.0) * std::pow(z, N - 2);
        // d/dx1 Im z^(N-1) = Im w,  d/dx2 Im z^(N-1) = Re w
        return {rad * x.x - w.imag(), rad * x.y - w.real()};
    };
    f.hessian = [dN, N](Vec2 x) -> Mat2 {
        double r2 = x.norm2();
        double a = (r2 > 0.0) ? dN * std::pow(r2, dN / 2.0 - 1.0) : 0.0;
        double b = (r2 > 0.0) ? dN * (dN - 2.0) * std::pow(r2, dN / 2.0 - 2.0) : 0.0;
        cplx z(x.x, x.y);
        cplx w2 = (dN - 1.0) * (dN - 2.0) * ((N >= 3) ? std::pow(z, N - 3) : cplx(0.0));
        Mat2 h;
        h.xx = a + b * x.x * x.x - w2.imag();
        h.xy = b * x.x * x.y - w2.real();
        h.yy = a + b * x.y * x.y + w2.imag();
        return h;
    };
    return f;
}

}  // namespace

HamiltonianField make_hamiltonian(const std::string& family, int n_param) {
    if (family == "H3" || family == "h3") {
        HamiltonianField f;
        f.name = "H3";
        f.n_critical = 3;
        f.growth_m = 0.0;
        f.growth_n = 1.0;
        f.valid_radius = 0.5;
        f.value = [](Vec2 x) {
            double r2 = x.norm2();
            return r2 * r2 - x.x * x.x + x.y * x.y;
        };
        f.gradient = [](Vec2 x) -> Vec2 {
            double r2 = x.norm2();
            return {4.0 * r2 * x.x - 2.0 * x.x, 4.0 * r2 * x.y + 2.0 * x.y};
        };
        f.hessian = [](Vec2 x) -> Mat2 {
            double r2 = x.norm2();
            Mat2 h;
            h.xx = 4.0 * r2 + 8.0 * x.x * x.x - 2.0;
            h.xy = 8.0 * x.x * x.y;
            h.yy = 4.0 * r2 + 8.0 * x.y * x.y + 2.0;
            return h;
        };
        return f;
    }
    if (family == "H3o" || family == "h3o") {
        HamiltonianField f;
        f.name = "H3o";
        f.n_critical = 3;
        f.growth_m = 2.0;
        f.growth_n = 3.0;
        f.valid_radius = 0.5;
        f.value = [](Vec2 x) {
            double r2 = x.norm2();
            double x2 = x.x * x.x, y2 = x.y * x.y;
            return r2 * r2 * r2 - x2 * x2 + y2 * y2;
        };
        f.gradient = [](Vec2 x) -> Vec2 {
            double r2 = x.norm2();
            return {6.0 * r2 * r2 * x.x - 4.0 * x.x * x.x * x.x,
                    6.0 * r2 * r2 * x.y + 4.0 * x.y * x.y * x.y};
        };
        f.hessian = [](Vec2 x) -> Mat2 {
            double r2 = x.norm2();
            Mat2 h;
            h.xx = 6.0 * r2 * r2 + 24.0 * r2 * x.x * x.x - 12.0 * x.x * x.x;
            h.xy = 24.0 * r2 * x.x * x.y;
            h.yy = 6.0 * r2 * r2 + 24.0 * r2 * x.y * x.y + 12.0 * x.y * x.y;
            return h;
        };
        return f;
    }
    if (family == "H4" || family == "h4") return make_petal(4);
    if (family == "HN" || family == "hN" || family == "hn") {
        if (n_param < 4) throw std::invalid_argument("HN requires parameter N >= 4");
        return make_petal(n_param);
    }
    if (family == "RADIAL" || family == "radial") {
        HamiltonianField f;
        f.name = "RADIAL";
        f.n_critical = 1;
        f.growth_m = 0.0;
        f.growth_n = 1.0;
        f.valid_radius = 0.5;
        f.value = [](Vec2 x) { return 0.5 * x.norm2(); };
        f.gradient = [](Vec2 x) -> Vec2 { return x; };
        f.hessian = [](Vec2) -> Mat2 { return {1.0, 0.0, 1.0}; };
        return f;
    }
    throw std::invalid_argument("unknown Hamiltonian family: " + family);
}

double evaluate_scalar(const HamiltonianField& f, Vec2 x) { return f.value(x); }

std::vector<CriticalPoint> find_critical_points(const HamiltonianField& f,
                                                const SearchBox& box,
                                                double seed_spacing) {
    const double merge_r = 1e-6;
    std::vector<Vec2> found;
    for (double sx = box.x_lo; sx <= box.x_hi + 1e-12; sx += seed_spacing) {
        for (double sy = box.y_lo; sy <= box.y_hi + 1e-12; sy += seed_spacing) {
            Vec2 p{sx, sy};
            bool converged = false;
            // Degenerate points only give linear contraction, so run long and
            // stop on step stagnation rather than on a gradient threshold.
            for (int it = 0; it < 200; ++it) {
                Vec2 g = f.gradient(p);
                if (g.norm() == 0.0) {
                    converged = true;
                    break;
                }
                Mat2 h = f.hessian(p);
                double det = h.det();
                if (std::abs(det) < 1e-280) {
                    // singular Hessian: damped gradient descent nudge
                    p -= g * 1e-2;
                    continue;
                }
                Vec2 step{(h.yy * g.x - h.xy * g.y) / det, (-h.xy * g.x + h.xx * g.y) / det};
                p -= step;
                if (step.norm() < 1e-15 * (1.0 + p.norm())) {
                    converged = true;
                    break;
                }
            }
            if (!converged || f.gradient(p).norm() > 1e-10) continue;
            if (p.x < box.x_lo - 0.1 || p.x > box.x_hi + 0.1 || p.y < box.y_lo - 0.1 ||
                p.y > box.y_hi + 0.1)
                continue;
            bool dup = false;
            for (const auto& q : found)
                if (dist(p, q) < merge_r) { dup = true; break; }
            if (!dup) found.push_back(p);
        }
    }

    std::vector<CriticalPoint> pts;
    for (const auto& p : found) {
        CriticalPoint cp;
        cp.location = p;
        cp.energy = f.value(p);
        Mat2 h = f.hessian(p);
        double lo, hi;
        h.eigenvalues(lo, hi);
        if (lo > 0.0 && std::abs(h.det()) >= 1e-8) {
            cp.kind = CriticalKind::LocalMin;
        } else if (std::abs(h.det()) < 1e-8) {
            cp.kind = CriticalKind::DegenerateSaddle;
        } else {
            cp.kind = CriticalKind::Saddle;
        }
        pts.push_back(cp);
    }
    // Saddle first (it is the origin by normalization), minima by angle in
    // [0, 2pi); the snap keeps points on the positive axis from flipping to
    // angle -pi under roundoff.
    auto angle = [](Vec2 p) {
        double a = std::atan2(p.y, p.x);
        if (a < -1e-9) a += 2.0 * M_PI;
        return a;
    };
    std::sort(pts.begin(), pts.end(), [&](const CriticalPoint& a, const CriticalPoint& b) {
        bool sa = a.kind != CriticalKind::LocalMin;
        bool sb = b.kind != CriticalKind::LocalMin;
        if (sa != sb) return sa;
        return angle(a.location) < angle(b.location);
    });
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i].index = static_cast<int>(i);

    if (static_cast<int>(pts.size()) != f.n_critical)
        throw std::runtime_error("critical point count mismatch for " + f.name + ": found " +
                                 std::to_string(pts.size()) + ", expected " +
                                 std::to_string(f.n_critical));
    return pts;
}

StructureReport verify_structure(const HamiltonianField& f, double radius,
                                 int sample_count, unsigned seed) {
    StructureReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> ulog(std::log(radius * 1e-4), std::log(radius));

    struct Sample {
        double r, hess, grad, energy;
    };
    std::vector<Sample> samples;
    samples.reserve(sample_count);
    for (int i = 0; i < sample_count; ++i) {
        double r = std::exp(ulog(rng));
        double th = uang(rng);
        Vec2 x{r * std::cos(th), r * std::sin(th)};
        samples.push_back({r, f.hessian(x).max_abs_entry(), f.gradient(x).norm(),
                           std::abs(f.value(x))});
    }

    const double m = f.growth_m, n = f.growth_n;
    const double r_split = radius * 1e-2;  // fit outer two decades, verify all
    double C = 0.0, c = 1e300, c0 = 1e300;
    for (const auto& s : samples) {
        if (s.r < r_split) continue;
        C = std::max(C, s.hess / std::pow(s.r, m));
        c = std::min(c, s.grad / std::pow(s.r, n));
        if (s.energy > 0.0)
            c0 = std::min(c0, s.grad / std::pow(s.energy, n / (m + 2.0)));
    }
    rep.fitted_C = C;
    rep.fitted_c = c;
    rep.fitted_c0 = c0;

    const double slack = 1.01;
    rep.hessian_ok = rep.gradient_ok = rep.energy_ok = true;
    for (const auto& s : samples) {
        if (s.hess > slack * C * std::pow(s.r, m)) rep.hessian_ok = false;
        if (c * std::pow(s.r, n) > slack * s.grad) rep.gradient_ok = false;
        if (s.energy > 0.0 && c0 * std::pow(s.energy, n / (m + 2.0)) > slack * s.grad)
            rep.energy_ok = false;
    }
    return rep;
}

double fit_c0_on_region(const HamiltonianField& f, double h_max, double box_radius,
                        int sample_count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-box_radius, box_radius);
    double c0 = 1e300;
    int used = 0;
    while (used < sample_count) {
        Vec2 x{u(rng), u(rng)};
        double h = f.value(x);
        if (std::abs(h) >= h_max || std::abs(h) < 1e-300) continue;
        ++used;
        double g = f.gradient(x).norm();
        double ratio = g / std::pow(std::abs(h), f.growth_n / (f.growth_m + 2.0));
        c0 = std::min(c0, ratio);
    }
    return c0;
}

void write_critical_points_csv(const std::vector<CriticalPoint>& pts,
                               const std::string& path) {
    std::ofstream out(path);
    out << "index,x1,x2,energy,kind\n";
    out.precision(17);
    for (const auto& p : pts)
        out << p.index << ',' << p.location.x << ',' << p.location.y << ',' << p.energy
            << ',' << to_string(p.kind) << '\n';
}

}  // namespace hj

#include "hj/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace hj {

namespace {

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

Vec2 unit_tangent(const HamiltonianField& f, Vec2 x) {
    Vec2 b = f.drift(x);
    double n = b.norm();
    if (n < 1e-300) throw std::runtime_error("trace_loop: |b| underflow at critical level");
    return b / n;
}

// Curvature of the level curve through x.
double curvature(const HamiltonianField& f, Vec2 x) {
    Vec2 b = f.drift(x);
    double bn = b.norm();
    if (bn < 1e-300) return 1e300;
    Vec2 t = b / bn;
    Mat2 h = f.hessian(x);
    // Jacobian of b applied to t: Db = [[Hxy, Hyy], [-Hxx, -Hxy]]
    Vec2 dbt{h.xy * t.x + h.yy * t.y, -h.xx * t.x - h.xy * t.y};
    Vec2 dtds = (dbt - t * t.dot(dbt)) / bn;
    return dtds.norm();
}

// One RK4 step of the unit-speed curve ODE, then projection back to the level.
Vec2 step_on_level(const HamiltonianField& f, Vec2 x, double ds, double level) {
    Vec2 k1 = unit_tangent(f, x);
    Vec2 k2 = unit_tangent(f, x + k1 * (ds / 2.0));
    Vec2 k3 = unit_tangent(f, x + k2 * (ds / 2.0));
    Vec2 k4 = unit_tangent(f, x + k3 * ds);
    Vec2 y = x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (ds / 6.0);
    project_to_level(f, y, level);
    return y;
}

}  // namespace

bool LevelLoop::encloses(Vec2 p) const {
    bool in = false;
    std::size_t n = vertices.size();
    if (n < 3) return false;
    for (std::size_t i = 0, j = n - 2; i + 1 < n; j = i++) {
        const Vec2& a = vertices[i];
        const Vec2& b = vertices[j];
        if ((a.y > p.y) != (b.y > p.y) &&
            p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x)
            in = !in;
    }
    return in;
}

LevelLoop trace_loop(const HamiltonianField& f, double h, Vec2 seed, double tol) {
    if (h == 0.0) throw std::invalid_argument("trace_loop: level must be nonzero");
    Vec2 x0 = seed;
    if (!project_to_level(f, x0, h))
        throw std::runtime_error("trace_loop: seed projection failed");

    const double ang = std::clamp(std::sqrt(24.0 * tol), 1e-4, 5e-2);
    const double ds_max = 0.05;
    const double ds_min = 1e-10;
    const double length_cap = 1e3;

    LevelLoop loop;
    loop.level = h;
    loop.vertices.push_back(x0);
    loop.arclength.push_back(0.0);

    const Vec2 tau0 = unit_tangent(f, x0);
    double s = 0.0;
    double max_dist = 0.0;
    double sec_prev = 0.0;
    bool armed = false;
    Vec2 x = x0;
    double ds_first = 0.0;

    while (s < length_cap) {
        double kappa = curvature(f, x);
        double ds = std::clamp(ang / std::max(kappa, 1e-12), ds_min, ds_max);
        if (ds_first == 0.0) ds_first = ds;
        Vec2 xn = step_on_level(f, x, ds, h);

        double sec = (xn - x0).dot(tau0);
        double d = dist(xn, x0);
        max_dist = std::max(max_dist, d);
        if (!armed) {
            if (s > 3.0 * ds_first && sec < 0.0) armed = true;
        } else if (sec_prev < 0.0 && sec >= 0.0 && d < 0.3 * max_dist) {
            // refine the section crossing, then close exactly at the start
            double lo = 0.0, hi = ds;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                Vec2 xm = step_on_level(f, x, mid, h);
                if ((xm - x0).dot(tau0) < 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            Vec2 xc = step_on_level(f, x, 0.5 * (lo + hi), h);
            if (dist(xc, x0) > 0.05 * max_dist) {
                // spurious tangent crossing away from the start: keep tracing
                armed = true;
            } else {
                s += dist(x, x0);
                loop.vertices.push_back(x0);
                loop.arclength.push_back(s);
                loop.level_residual = 0.0;
                for (const auto& v : loop.vertices)
                    loop.level_residual =
                        std::max(loop.level_residual, std::abs(f.value(v) - h));
                return loop;
            }
        }
        s += dist(x, xn);
        loop.vertices.push_back(xn);
        loop.arclength.push_back(s);
        x = xn;
        sec_prev = sec;
    }
    throw std::runtime_error("trace_loop: loop failed to close within length cap (level " +
                             std::to_string(h) + ")");
}

namespace {

// Seed on the level set {H = h} for a well edge: first crossing along the
// segment from the well minimum toward the origin.
Vec2 well_seed(const HamiltonianField& f, const CriticalPoint& well, double h) {
    double lo = 0.0, hi = 1.0;  // parameter along z_i -> origin, H rises to 0
    if (f.value(well.location) >= h)
        throw std::runtime_error("level below well depth");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        Vec2 p = well.location * (1.0 - mid);
        if (f.value(p) < h)
            lo = mid;
        else
            hi = mid;
    }
    return well.location * (1.0 - 0.5 * (lo + hi));
}

// Seed for the outer edge: outermost crossing along the ray from the origin
// through the first well.
Vec2 outer_seed(const HamiltonianField& f, const CriticalPoint& well1, double h) {
    Vec2 dir = well1.location / well1.location.norm();
    double lo = well1.location.norm();
    double hi = lo;
    while (f.value(dir * hi) <= h && hi < 1e3) hi *= 1.5;
    if (hi >= 1e3) throw std::runtime_error("outer level not bracketed");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (f.value(dir * mid) <= h)
            lo = mid;
        else
            hi = mid;
    }
    return dir * (0.5 * (lo + hi));
}

}  // namespace

std::vector<LevelLoop> extract_all_loops(const HamiltonianField& f, double h,
                                         const std::vector<CriticalPoint>& crits,
                                         double tol) {
    std::vector<LevelLoop> loops;
    if (h == 0.0) throw std::invalid_argument("extract_all_loops: h must be nonzero");
    if (h > 0.0) {
        const CriticalPoint& w = crits.size() > 1 ? crits[1] : crits[0];
        LevelLoop loop = trace_loop(f, h, outer_seed(f, w, h), tol);
        loop.edge_index = 0;
        loops.push_back(std::move(loop));
        return loops;
    }
    for (std::size_t i = 1; i < crits.size(); ++i) {
        if (crits[i].energy >= h) continue;  // well too shallow for this level
        LevelLoop loop = trace_loop(f, h, well_seed(f, crits[i], h), tol);
        loop.edge_index = static_cast<int>(i);
        if (!loop.encloses(crits[i].location))
            throw std::runtime_error("extract_all_loops: traced loop does not enclose its well");
        loops.push_back(std::move(loop));
    }
    return loops;
}

namespace {

struct SimpsonCtx {
    const HamiltonianField* f;
    const std::function<double(Vec2)>* integrand;
    double level;
    double abs_tol;
};

double eval_on_level(const SimpsonCtx& c, Vec2 x) {
    project_to_level(*c.f, x, c.level);
    return (*c.integrand)(x);
}

double simpson_rec(const SimpsonCtx& c, Vec2 a, Vec2 b, double fa, double fb, double whole,
                   double tol, int depth) {
    Vec2 m = (a + b) * 0.5;
    project_to_level(*c.f, m, c.level);
    double fm = (*c.integrand)(m);
    double l1 = dist(a, m), l2 = dist(m, b);
    double left = (l1 / 6.0) * (fa + 4.0 * eval_on_level(c, (a + m) * 0.5) + fm);
    double right = (l2 / 6.0) * (fm + 4.0 * eval_on_level(c, (m + b) * 0.5) + fb);
    if (depth <= 0) return left + right;
    if (std::abs(left + right - whole) <= 15.0 * tol) return left + right;
    return simpson_rec(c, a, m, fa, fm, left, tol / 2.0, depth - 1) +
           simpson_rec(c, m, b, fm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace

double loop_integral(const LevelLoop& loop, const HamiltonianField& f,
                     const std::function<double(Vec2)>& integrand, double rel_tol) {
    // first pass: coarse estimate for the absolute tolerance budget
    double coarse = 0.0;
    std::vector<double> fv(loop.vertices.size());
    for (std::size_t i = 0; i < loop.vertices.size(); ++i) fv[i] = integrand(loop.vertices[i]);
    for (std::size_t i = 0; i + 1 < loop.vertices.size(); ++i)
        coarse += 0.5 * (fv[i] + fv[i + 1]) * dist(loop.vertices[i], loop.vertices[i + 1]);

    SimpsonCtx ctx{&f, &integrand, loop.level, 0.0};
    double total = 0.0;
    const double budget = rel_tol * std::max(std::abs(coarse), 1e-30);
    const double L = loop.length();
    for (std::size_t i = 0; i + 1 < loop.vertices.size(); ++i) {
        Vec2 a = loop.vertices[i], b = loop.vertices[i + 1];
        double seg = dist(a, b);
        if (seg == 0.0) continue;
        double whole = (seg / 6.0) * (fv[i] + 4.0 * eval_on_level(ctx, (a + b) * 0.5) + fv[i + 1]);
        total += simpson_rec(ctx, a, b, fv[i], fv[i + 1], whole, budget * (seg / L), 24);
    }
    return total;
}

namespace {

// Recursively subdivide a chord [a,b] until Simpson on 1/|DH| converges, then
// emit 3-node Simpson rules on the final subsegments.
void quad_emit(const HamiltonianField& f, double level, Vec2 a, Vec2 b, double fa,
               double fb, double whole, double tol, int depth, LoopQuadrature& out) {
    Vec2 m = (a + b) * 0.5;
    project_to_level(f, m, level);
    double gm = f.gradient(m).norm();
    if (gm < 1e-12)
        throw std::runtime_error("loop quadrature: |DH| underflow at node");
    double fm = 1.0 / gm;
    Vec2 ml = (a + m) * 0.5, mr = (m + b) * 0.5;
    project_to_level(f, ml, level);
    project_to_level(f, mr, level);
    double gl = f.gradient(ml).norm(), gr = f.gradient(mr).norm();
    double l1 = dist(a, m), l2 = dist(m, b);
    double left = (l1 / 6.0) * (fa + 4.0 / gl + fm);
    double right = (l2 / 6.0) * (fm + 4.0 / gr + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
        out.points.insert(out.points.end(), {a, ml, m, mr, b});
        out.grad_norm.insert(out.grad_norm.end(),
                             {1.0 / fa, gl, 1.0 / fm, gr, 1.0 / fb});
        out.weights.insert(out.weights.end(),
                           {l1 / 6.0, 4.0 * l1 / 6.0, l1 / 6.0 + l2 / 6.0, 4.0 * l2 / 6.0,
                            l2 / 6.0});
        // merge the shared midpoint weight: entries are a,ml,(m),mr,b with m once
        return;
    }
    quad_emit(f, level, a, m, fa, fm, left, tol / 2.0, depth - 1, out);
    quad_emit(f, level, m, b, fm, fb, right, tol / 2.0, depth - 1, out);
}

}  // namespace

LoopQuadrature build_loop_quadrature(const LevelLoop& loop, const HamiltonianField& f,
                                     double rel_tol) {
    LoopQuadrature q;
    const std::size_t n = loop.vertices.size();
    if (n < 3) throw std::runtime_error("loop quadrature: degenerate loop");
    std::vector<double> fv(n);
    double coarse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double g = f.gradient(loop.vertices[i]).norm();
        if (g < 1e-12) throw std::runtime_error("loop quadrature: |DH| underflow at vertex");
        fv[i] = 1.0 / g;
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        coarse += 0.5 * (fv[i] + fv[i + 1]) * dist(loop.vertices[i], loop.vertices[i + 1]);
    const double budget = rel_tol * std::max(std::abs(coarse), 1e-30);
    const double L = loop.length();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        Vec2 a = loop.vertices[i], b = loop.vertices[i + 1];
        double seg = dist(a, b);
        if (seg == 0.0) continue;
        Vec2 m = (a + b) * 0.5;
        project_to_level(f, m, loop.level);
        double gm = f.gradient(m).norm();
        double whole = (seg / 6.0) * (fv[i] + 4.0 / std::max(gm, 1e-12) + fv[i + 1]);
        quad_emit(f, loop.level, a, b, fv[i], fv[i + 1], whole, budget * (seg / L), 24, q);
    }
    for (std::size_t i = 0; i < q.points.size(); ++i) {
        q.length += q.weights[i];
        q.period += q.weights[i] / q.grad_norm[i];
    }
    return q;
}

LoopMetrics loop_metrics(const LevelLoop& loop, const HamiltonianField& f) {
    LoopQuadrature q = build_loop_quadrature(loop, f);
    return {q.length, q.period};
}

double clipped_length(const LevelLoop& loop, double r) {
    double total = 0.0;
    const double r2 = r * r;
    for (std::size_t i = 0; i + 1 < loop.vertices.size(); ++i) {
        Vec2 a = loop.vertices[i];
        Vec2 d = loop.vertices[i + 1] - a;
        double len = d.norm();
        if (len == 0.0) continue;
        // |a + t d|^2 = r^2, t in [0,1]
        double A = d.norm2(), B = 2.0 * a.dot(d), C = a.norm2() - r2;
        double disc = B * B - 4.0 * A * C;
        if (disc <= 0.0) continue;  // segment line misses the disc
        double sq = std::sqrt(disc);
        double t1 = std::clamp((-B - sq) / (2.0 * A), 0.0, 1.0);
        double t2 = std::clamp((-B + sq) / (2.0 * A), 0.0, 1.0);
        total += (t2 - t1) * len;
    }
    return total;
}

FlowGraph build_graph(const HamiltonianField& f, double h0, const std::vector<double>& cuts) {
    if (h0 <= 0.0) throw std::invalid_argument("build_graph: h0 must be positive");
    if (f.n_critical < 3)
        throw std::invalid_argument("build_graph: field must have N >= 3 critical points");
    FlowGraph g;
    g.field = &f;
    g.h0 = h0;
    g.cuts = cuts;
    g.critical_points = find_critical_points(f);
    if (static_cast<int>(cuts.size()) != f.n_critical - 1)
        throw std::invalid_argument("build_graph: need N-1 cut levels");
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        if (cuts[i] >= 0.0)
            throw std::invalid_argument("build_graph: well cuts must be negative");
        if (cuts[i] <= g.critical_points[i + 1].energy)
            throw std::invalid_argument("build_graph: cut below well depth on edge " +
                                        std::to_string(i + 1));
    }
    g.outer_boundaries.push_back(
        trace_loop(f, h0, outer_seed(f, g.critical_points[1], h0), 1e-9));
    g.outer_boundaries.back().edge_index = 0;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        g.outer_boundaries.push_back(
            trace_loop(f, cuts[i], well_seed(f, g.critical_points[i + 1], cuts[i]), 1e-9));
        g.outer_boundaries.back().edge_index = static_cast<int>(i + 1);
    }
    return g;
}

LevelLoop edge_loop(const HamiltonianField& f, const FlowGraph& g, int edge, double h,
                    double tol) {
    LevelLoop loop =
        (edge == 0) ? trace_loop(f, h, outer_seed(f, g.critical_points[1], h), tol)
                    : trace_loop(f, h, well_seed(f, g.critical_points[edge], h), tol);
    loop.edge_index = edge;
    return loop;
}

namespace {

std::vector<double> edge_levels(const FlowGraph& g, int edge, const GridSpecEdge& spec) {
    double cut = g.cut(edge);
    double ratio = std::pow(spec.innermost_frac, 1.0 / (spec.count - 1));
    std::vector<double> lv(spec.count);
    for (int k = 0; k < spec.count; ++k) lv[k] = cut * std::pow(ratio, k);
    return lv;
}

}  // namespace

std::vector<EdgeProfile> tabulate_profiles(const HamiltonianField& f, const FlowGraph& g,
                                           const GridSpecEdge& spec, double trace_tol,
                                           bool parallel) {
    std::vector<EdgeProfile> profiles(g.n_edges());
    struct Job {
        int edge, k;
    };
    std::vector<Job> jobs;
    for (int e = 0; e < g.n_edges(); ++e) {
        profiles[e].edge_index = e;
        profiles[e].levels = edge_levels(g, e, spec);
        profiles[e].L.assign(spec.count, 0.0);
        profiles[e].T.assign(spec.count, 0.0);
        for (int k = 0; k < spec.count; ++k) jobs.push_back({e, k});
    }
    std::vector<int> failed_at(g.n_edges(), spec.count);

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int j = 0; j < static_cast<int>(jobs.size()); ++j) {
        const auto [e, k] = jobs[j];
        try {
            LevelLoop loop = edge_loop(f, g, e, profiles[e].levels[k], trace_tol);
            LoopMetrics m = loop_metrics(loop, f);
            profiles[e].L[k] = m.length;
            profiles[e].T[k] = m.period;
        } catch (const std::exception&) {
#pragma omp critical
            failed_at[e] = std::min(failed_at[e], k);
        }
    }
    for (int e = 0; e < g.n_edges(); ++e) {
        if (failed_at[e] < spec.count) {
            profiles[e].truncated = true;
            profiles[e].levels.resize(failed_at[e]);
            profiles[e].L.resize(failed_at[e]);
            profiles[e].T.resize(failed_at[e]);
        }
    }
    return profiles;
}

std::vector<EdgeProfile> tabulate_profiles_serial(const HamiltonianField& f,
                                                  const FlowGraph& g,
                                                  const GridSpecEdge& spec,
                                                  double trace_tol) {
    return tabulate_profiles(f, g, spec, trace_tol, false);
}

void write_loop_csv(const LevelLoop& loop, const std::string& path) {
    std::ofstream out(path);
    out << "x1,x2,s\n";
    out.precision(17);
    for (std::size_t i = 0; i < loop.vertices.size(); ++i)
        out << loop.vertices[i].x << ',' << loop.vertices[i].y << ',' << loop.arclength[i]
            << '\n';
}

void write_profile_csv(const EdgeProfile& p, const std::string& path) {
    std::ofstream out(path);
    out << "h,L,T\n";
    out.precision(17);
    for (std::size_t i = 0; i < p.levels.size(); ++i)
        out << p.levels[i] << ',' << p.L[i] << ',' << p.T[i] << '\n';
}

}  // namespace hj

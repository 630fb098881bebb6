#include "hj/eps_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "hj/levelset.hpp"

namespace hj {

int GridSpec::count(CellKind k) const {
    int c = 0;
    for (auto v : kind)
        if (v == k) ++c;
    return c;
}

GridSpec build_grid(const HamiltonianField& f, const FlowGraph& g, int n, double margin) {
    GridSpec grid;
    const LevelLoop& outer = g.outer_boundaries[0];
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& v : outer.vertices) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    double mx = margin * (x1 - x0), my = margin * (y1 - y0);
    grid.x_lo = x0 - mx;
    grid.x_hi = x1 + mx;
    grid.y_lo = y0 - my;
    grid.y_hi = y1 + my;
    grid.nx = grid.ny = n;
    const int total = n * n;
    grid.kind.assign(total, CellKind::Exterior);
    grid.label.assign(total, -1);
    grid.hval.resize(total);

    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) grid.hval[grid.idx(i, j)] = f.value(grid.point(i, j));

    // label negative nodes by well basin. Plain flood fill of {H < 0} can merge
    // two wells through near-saddle nodes one spacing off the separatrix, so
    // run a watershed instead: visit nodes by ascending level and inherit the
    // label of the lowest labeled neighbor, seeding at the well minima.
    std::vector<int> neg_label(total, -1);
    std::vector<int> well_node(g.n_edges(), -1);
    for (int e = 1; e < g.n_edges(); ++e) {
        Vec2 w = g.well(e).location;
        int wi = static_cast<int>(std::lround((w.x - grid.x_lo) / grid.dx()));
        int wj = static_cast<int>(std::lround((w.y - grid.y_lo) / grid.dy()));
        well_node[e] = grid.idx(wi, wj);
        neg_label[well_node[e]] = e;
    }
    std::vector<int> order;
    order.reserve(total);
    for (int t = 0; t < total; ++t)
        if (grid.hval[t] < 0.0) order.push_back(t);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return grid.hval[a] < grid.hval[b]; });
    for (int t : order) {
        if (neg_label[t] >= 0) continue;
        int ci = t % n, cj = t / n;
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        int best = -1;
        double besth = 1e300;
        for (int k = 0; k < 4; ++k) {
            int ni = ci + di[k], nj = cj + dj[k];
            if (ni < 0 || ni >= n || nj < 0 || nj >= n) continue;
            int s = grid.idx(ni, nj);
            if (neg_label[s] >= 0 && grid.hval[s] < besth) {
                besth = grid.hval[s];
                best = neg_label[s];
            }
        }
        if (best < 0) {
            // isolated discrete minimum away from every well: nearest well wins
            Vec2 x = grid.point(ci, cj);
            double bd = 1e300;
            for (int e = 1; e < g.n_edges(); ++e) {
                double d = dist(x, g.well(e).location);
                if (d < bd) {
                    bd = d;
                    best = e;
                }
            }
        }
        neg_label[t] = best;
    }

    for (int t = 0; t < total; ++t) {
        double h = grid.hval[t];
        if (h >= g.h0) {
            grid.label[t] = 0;  // outer exterior
        } else if (h >= 0.0) {
            grid.kind[t] = CellKind::Interior;
            grid.label[t] = 0;
        } else {
            int e = neg_label[t];
            if (e < 0)
                throw std::runtime_error("build_grid: negative component without a well");
            grid.label[t] = e;
            if (h > g.cut(e)) grid.kind[t] = CellKind::Interior;
        }
    }
    // boundary band: exterior nodes touching the interior
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            int t = grid.idx(i, j);
            if (grid.kind[t] != CellKind::Exterior) continue;
            const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                int ni = i + di[k], nj = j + dj[k];
                if (ni < 0 || ni >= n || nj < 0 || nj >= n) continue;
                if (grid.kind[grid.idx(ni, nj)] == CellKind::Interior) {
                    grid.kind[t] = CellKind::Band;
                    break;
                }
            }
        }
    return grid;
}

double legendre(const RunningCostSpec& cost, Vec2 x, Vec2 xi) {
    const double inf = std::numeric_limits<double>::infinity();
    switch (cost.kind) {
        case CostKind::Quadratic:
            return 0.5 * xi.norm2() + (cost.f ? cost.f(x) : 0.0);
        case CostKind::Eikonal:
            return xi.norm() <= 1.0 + 1e-12 ? (cost.f ? cost.f(x) : 0.0) : inf;
        case CostKind::Norm:
            return xi.norm() <= 1.0 + 1e-12 ? 0.0 : inf;
        case CostKind::Constant:
            return xi.norm() <= 1e-12 ? -cost.c : inf;
    }
    return inf;
}

namespace {

struct Control {
    Vec2 xi;
    double cost;  // dt * ell(xi), spatial part added per node
};

std::vector<Control> make_controls(const RunningCostSpec& cost, double r_ctrl, double dt) {
    // the spatial term f(x) is added per node, so tabulate ell(xi) with the
    // spatial part stripped
    RunningCostSpec bare = cost;
    bare.f = nullptr;
    std::vector<Control> ctrl;
    ctrl.push_back({{0.0, 0.0}, dt * legendre(bare, {0, 0}, {0, 0})});
    for (int a = 0; a < 16; ++a) {
        double th = 2.0 * M_PI * a / 16.0;
        Vec2 dir{std::cos(th), std::sin(th)};
        for (int mlv = 1; mlv <= 4; ++mlv) {
            if (r_ctrl <= 0.0) break;
            Vec2 xi = dir * (r_ctrl * mlv / 4.0);
            double ell = legendre(bare, {0, 0}, xi);
            if (!std::isfinite(ell)) continue;
            ctrl.push_back({xi, dt * ell});
        }
    }
    return ctrl;
}

inline double bilinear(const GridSpec& g, const std::vector<double>& u, double px,
                       double py) {
    double sx = (px - g.x_lo) / g.dx();
    double sy = (py - g.y_lo) / g.dy();
    sx = std::clamp(sx, 0.0, static_cast<double>(g.nx - 1) - 1e-12);
    sy = std::clamp(sy, 0.0, static_cast<double>(g.ny - 1) - 1e-12);
    int i = static_cast<int>(sx), j = static_cast<int>(sy);
    double fx = sx - i, fy = sy - j;
    const double* row0 = &u[g.idx(i, j)];
    const double* row1 = &u[g.idx(i, j + 1)];
    return (1 - fy) * ((1 - fx) * row0[0] + fx * row0[1]) +
           fy * ((1 - fx) * row1[0] + fx * row1[1]);
}

}  // namespace

EpsField solve_eps(const HamiltonianField& f, const RunningCostSpec& cost, double lambda,
                   double epsilon, const GridSpec& grid, const std::vector<double>& data,
                   bool parallel, double tol, int max_sweeps, bool allow_partial,
                   double courant) {
    if (epsilon <= 0.0 || lambda <= 0.0)
        throw std::invalid_argument("solve_eps: need positive epsilon and lambda");
    const int nx = grid.nx, ny = grid.ny, total = nx * ny;

    double gmax = 0.0;
    for (double d : data) gmax = std::max(gmax, std::abs(d));
    const double nu_eff = cost.nu > 0.0 ? cost.nu : 1.0;
    double r_ctrl = (gmax * lambda + cost.M) / nu_eff + 1.0;
    if (cost.kind == CostKind::Eikonal || cost.kind == CostKind::Norm)
        r_ctrl = std::min(r_ctrl, 1.0);
    if (cost.kind == CostKind::Constant) r_ctrl = 0.0;

    // drift, spatial cost term, and boundary values per node
    std::vector<Vec2> bvec(total);
    std::vector<double> fterm(total, 0.0);
    double bmax = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int t = grid.idx(i, j);
            if (grid.kind[t] != CellKind::Interior) continue;
            Vec2 x = grid.point(i, j);
            bvec[t] = f.drift(x);
            bmax = std::max(bmax, bvec[t].norm());
            if (cost.f && (cost.kind == CostKind::Quadratic || cost.kind == CostKind::Eikonal))
                fterm[t] = cost.f(x);
        }
    const double spacing = std::min(grid.dx(), grid.dy());
    const double dt = courant * spacing / (bmax / epsilon + r_ctrl + 1e-300);
    const double keep = 1.0 - lambda * dt;

    std::vector<Control> controls = make_controls(cost, r_ctrl, dt);

    EpsField field;
    field.epsilon = epsilon;
    field.lambda = lambda;
    field.dt = dt;

    // exterior and band carry the edge data; interior starts at an upper bound
    // so monotone relaxation decreases toward the fixed point
    double fmax = 0.0;
    for (double v : fterm) fmax = std::max(fmax, std::abs(v));
    RunningCostSpec bare = cost;
    bare.f = nullptr;
    double upper = gmax + (std::abs(legendre(bare, {0, 0}, {0, 0})) + fmax) / lambda + 1.0;
    field.u.assign(total, 0.0);
    for (int t = 0; t < total; ++t) {
        if (grid.kind[t] == CellKind::Interior)
            field.u[t] = upper;
        else
            field.u[t] = data.at(grid.label[t]);
    }

    std::vector<int> interior;
    interior.reserve(total);
    for (int t = 0; t < total; ++t)
        if (grid.kind[t] == CellKind::Interior) interior.push_back(t);

    auto relax = [&](int t, const std::vector<double>& src) {
        int i = t % nx, j = t / nx;
        Vec2 x = grid.point(i, j);
        double bx = x.x + dt * bvec[t].x / epsilon;
        double by = x.y + dt * bvec[t].y / epsilon;
        double best = 1e300;
        for (const auto& c : controls) {
            double v = c.cost + keep * bilinear(grid, src, bx + dt * c.xi.x, by + dt * c.xi.y);
            best = std::min(best, v);
        }
        return best + dt * fterm[t];
    };

    double upd = 0.0;
    int sweep = 0;
    std::vector<double> buf;
    if (parallel) buf = field.u;
    for (; sweep < max_sweeps; ++sweep) {
        upd = 0.0;
        if (parallel) {
            // Jacobi, double buffered: deterministic under any thread count
            const int m = static_cast<int>(interior.size());
            double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
            for (int k = 0; k < m; ++k) {
                int t = interior[k];
                double v = relax(t, field.u);
                worst = std::max(worst, std::abs(v - field.u[t]));
                buf[t] = v;
            }
            for (int t : interior) field.u[t] = buf[t];
            upd = worst;
        } else {
            // Gauss-Seidel with rotating orientation
            int mode = sweep % 4;
            auto pass = [&](int t) {
                double v = relax(t, field.u);
                upd = std::max(upd, std::abs(v - field.u[t]));
                field.u[t] = v;
            };
            if (mode == 0)
                for (int k = 0; k < static_cast<int>(interior.size()); ++k) pass(interior[k]);
            else if (mode == 1)
                for (int k = static_cast<int>(interior.size()) - 1; k >= 0; --k)
                    pass(interior[k]);
            else if (mode == 2) {
                for (int i = 0; i < nx; ++i)
                    for (int j = 0; j < ny; ++j)
                        if (grid.kind[grid.idx(i, j)] == CellKind::Interior)
                            pass(grid.idx(i, j));
            } else {
                for (int i = nx - 1; i >= 0; --i)
                    for (int j = ny - 1; j >= 0; --j)
                        if (grid.kind[grid.idx(i, j)] == CellKind::Interior)
                            pass(grid.idx(i, j));
            }
        }
        if (upd < tol) break;
    }
    field.sweeps = sweep + 1;
    field.final_update = upd;
    if (upd >= tol && !allow_partial)
        throw std::runtime_error("solve_eps: no convergence within sweep cap");
    return field;
}

EpsField lf_solve_eps(const HamiltonianField& f, const RunningCostSpec& cost,
                      double lambda, double epsilon, const GridSpec& grid,
                      const std::vector<double>& data, double tol, int max_sweeps) {
    if (cost.kind != CostKind::Quadratic)
        throw std::invalid_argument("lf_solve_eps: quadratic cost only");
    if (epsilon <= 0.0 || lambda <= 0.0)
        throw std::invalid_argument("lf_solve_eps: need positive epsilon and lambda");
    const int nx = grid.nx, ny = grid.ny, total = nx * ny;
    const double dx = grid.dx(), dy = grid.dy();

    double gmax = 0.0;
    for (double d : data) gmax = std::max(gmax, std::abs(d));
    const double nu_eff = cost.nu > 0.0 ? cost.nu : 1.0;
    const double pmax = (gmax * lambda + cost.M) / nu_eff + 1.0;

    std::vector<int> interior;
    std::vector<Vec2> bvec(total);
    std::vector<double> fterm(total, 0.0);
    double bmax = 0.0;
    for (int j = 1; j < ny - 1; ++j)
        for (int i = 1; i < nx - 1; ++i) {
            int t = grid.idx(i, j);
            if (grid.kind[t] != CellKind::Interior) continue;
            interior.push_back(t);
            Vec2 x = grid.point(i, j);
            bvec[t] = f.drift(x);
            bmax = std::max(bmax, bvec[t].norm());
            if (cost.f) fterm[t] = cost.f(x);
        }
    // dissipation must dominate max |dHam/dp| = |b|/eps + |Du|
    const double alpha = bmax / epsilon + pmax;
    const double denom = lambda + alpha / dx + alpha / dy;

    EpsField field;
    field.epsilon = epsilon;
    field.lambda = lambda;
    field.dt = 0.0;
    field.u.assign(total, 0.0);
    for (int t = 0; t < total; ++t)
        field.u[t] = grid.kind[t] == CellKind::Interior
                         ? gmax + (std::abs(fterm[t]) + 1.0) / lambda
                         : data.at(grid.label[t]);

    double upd = 0.0;
    int sweep = 0;
    std::vector<double>& u = field.u;
    for (; sweep < max_sweeps; ++sweep) {
        upd = 0.0;
        bool fwd = sweep % 2 == 0;
        for (std::size_t k = 0; k < interior.size(); ++k) {
            int t = interior[fwd ? k : interior.size() - 1 - k];
            double uw = u[t - 1], ue = u[t + 1], us = u[t - nx], un = u[t + nx];
            Vec2 p{(ue - uw) / (2 * dx), (un - us) / (2 * dy)};
            double ham = -bvec[t].dot(p) / epsilon + 0.5 * p.norm2() - fterm[t];
            double v = (alpha * (ue + uw) / (2 * dx) + alpha * (un + us) / (2 * dy) -
                        ham) /
                       denom;
            upd = std::max(upd, std::abs(v - u[t]));
            u[t] = v;
        }
        if (upd < tol) break;
    }
    field.sweeps = sweep + 1;
    field.final_update = upd;
    if (upd >= tol) throw std::runtime_error("lf_solve_eps: no convergence within sweep cap");
    return field;
}

ResidualStats residual(const EpsField& field, const HamiltonianField& f,
                       const RunningCostSpec& cost, const GridSpec& grid) {
    std::vector<double> vals;
    const int nx = grid.nx, ny = grid.ny;
    const double dx = grid.dx(), dy = grid.dy();
    // stay two cells from the boundary and off the critical loop
    double hcollar = 0.0;
    for (int t = 0; t < nx * ny; ++t)
        if (grid.kind[t] == CellKind::Interior)
            hcollar = std::max(hcollar, std::abs(grid.hval[t]));
    hcollar *= 5e-2;

    for (int j = 2; j < ny - 2; ++j)
        for (int i = 2; i < nx - 2; ++i) {
            int t = grid.idx(i, j);
            if (grid.kind[t] != CellKind::Interior) continue;
            if (std::abs(grid.hval[t]) < hcollar) continue;
            bool deep = true;
            for (int dj = -2; dj <= 2 && deep; ++dj)
                for (int di = -2; di <= 2 && deep; ++di)
                    if (grid.kind[grid.idx(i + di, j + dj)] != CellKind::Interior)
                        deep = false;
            if (!deep) continue;
            Vec2 x = grid.point(i, j);
            Vec2 du{(field.u[grid.idx(i + 1, j)] - field.u[grid.idx(i - 1, j)]) / (2 * dx),
                    (field.u[grid.idx(i, j + 1)] - field.u[grid.idx(i, j - 1)]) / (2 * dy)};
            double r = field.lambda * field.u[t] - f.drift(x).dot(du) / field.epsilon +
                       cost(x, du);
            vals.push_back(std::abs(r));
        }
    ResidualStats s;
    s.nodes = static_cast<int>(vals.size());
    if (vals.empty()) return s;
    std::sort(vals.begin(), vals.end());
    s.median = vals[vals.size() / 2];
    s.p95 = vals[static_cast<std::size_t>(0.95 * (vals.size() - 1))];
    return s;
}

void write_mask_pgm(const GridSpec& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n" << grid.nx << ' ' << grid.ny << "\n255\n";
    for (int j = grid.ny - 1; j >= 0; --j)
        for (int i = 0; i < grid.nx; ++i) {
            int t = grid.idx(i, j);
            unsigned char v = 0;
            if (grid.kind[t] == CellKind::Interior)
                v = static_cast<unsigned char>(120 + 40 * grid.label[t]);
            else if (grid.kind[t] == CellKind::Band)
                v = 255;
            out.put(static_cast<char>(v));
        }
}

void write_field_csv(const EpsField& field, const GridSpec& grid, const std::string& path) {
    std::ofstream out(path);
    out << "x1,x2,H,u\n";
    out.precision(17);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            int t = grid.idx(i, j);
            if (grid.kind[t] == CellKind::Exterior) continue;
            Vec2 x = grid.point(i, j);
            out << x.x << ',' << x.y << ',' << grid.hval[t] << ',' << field.u[t] << '\n';
        }
}

namespace {
constexpr std::uint64_t kFieldMagic = 0x484a455053464cull;
}

bool save_field_cache(const EpsField& field, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    auto put = [&](const void* p, std::size_t nb) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(nb));
    };
    put(&kFieldMagic, sizeof kFieldMagic);
    put(&field.epsilon, sizeof field.epsilon);
    put(&field.lambda, sizeof field.lambda);
    put(&field.dt, sizeof field.dt);
    std::uint64_t nu = field.u.size();
    put(&nu, sizeof nu);
    put(field.u.data(), nu * sizeof(double));
    return static_cast<bool>(out);
}

bool load_field_cache(EpsField& field, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    auto get = [&](void* p, std::size_t nb) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(nb));
    };
    std::uint64_t magic = 0, nu = 0;
    get(&magic, sizeof magic);
    if (magic != kFieldMagic) return false;
    get(&field.epsilon, sizeof field.epsilon);
    get(&field.lambda, sizeof field.lambda);
    get(&field.dt, sizeof field.dt);
    get(&nu, sizeof nu);
    if (!in || nu == 0 || nu > (1u << 28)) return false;
    field.u.resize(nu);
    get(field.u.data(), nu * sizeof(double));
    return static_cast<bool>(in);
}

}  // namespace hj

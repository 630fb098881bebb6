#include "hj/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hj/flow.hpp"
#include "hj/harness.hpp"
#include "hj/levelset.hpp"

namespace hj {

namespace {

struct Fixture {
    std::string family;
    double h0;
    std::vector<double> cuts;
    double n_over_m2;  // n/(m+2)
};

Fixture fix_h3() { return {"h3", 0.3, {-0.2, -0.2}, 0.5}; }
Fixture fix_h4() { return {"h4", 0.1, {-0.08, -0.08, -0.08}, 2.0 / 3.0}; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::vector<double> log_levels(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k)
        v[k] = lo * std::pow(hi / lo, k / (n - 1.0));
    return v;
}

std::vector<double> uniform_levels(double from, double spacing, int n) {
    std::vector<double> lv(n);
    for (int k = 0; k < n; ++k) lv[k] = from + k * spacing;
    return lv;
}

std::vector<double> geometric_levels(double cut, double frac, int n) {
    std::vector<double> lv(n);
    double rho = std::pow(frac, 1.0 / (n - 1));
    for (int k = 0; k < n; ++k) lv[k] = cut * std::pow(rho, k);
    return lv;
}

CriterionResult a1(const std::string&) {
    CriterionResult r{"A1", 0.0, 1e-8, false, 0.0, ""};
    struct Case {
        std::string fam;
        std::vector<Vec2> minima;
    };
    const double s2 = std::sqrt(2.0) / 2.0, s3 = 3.0 * std::sqrt(3.0) / 8.0;
    std::vector<Case> cases{{"h3", {{s2, 0.0}, {-s2, 0.0}}},
                            {"h4", {{s3, 0.375}, {-s3, 0.375}, {0.0, -0.75}}}};
    for (const auto& c : cases) {
        HamiltonianField f = make_hamiltonian(c.fam);
        auto found = find_critical_points(f);
        for (const Vec2& m : c.minima) {
            double best = 1e300;
            for (const auto& p : found)
                if (p.kind == CriticalKind::LocalMin) best = std::min(best, dist(p.location, m));
            r.measured = std::max(r.measured, best);
        }
    }
    r.pass = r.measured <= r.threshold;
    r.note = "max distance of found minima to closed forms over h3, h4";
    return r;
}

CriterionResult a2(const std::string&) {
    CriterionResult r{"A2", 0.0, 1e-4, false, 0.0, ""};
    for (const Fixture& fx : {fix_h3(), fix_h4()}) {
        HamiltonianField f = make_hamiltonian(fx.family);
        FlowGraph g = build_graph(f, fx.h0, fx.cuts);
        for (int e = 0; e < g.n_edges(); ++e)
            for (int k = 0; k < 10; ++k) {
                double frac = 0.3 + 0.05 * k;  // mid-range of the edge interval
                double h = g.cut(e) * frac;
                LevelLoop loop = edge_loop(f, g, e, h);
                double t_quad = build_loop_quadrature(loop, f).period;
                double t_flow = measure_period(f, loop.vertices[0], 1e-10);
                r.measured = std::max(r.measured, std::abs(t_quad - t_flow) / t_flow);
            }
    }
    r.pass = r.measured <= r.threshold;
    r.note = "max relative period difference, quadrature vs flow, 10 levels/edge";
    return r;
}

CriterionResult a3(const std::string&) {
    CriterionResult r{"A3", 0.0, 10.0, true, 0.0, ""};
    std::ostringstream note;
    for (const Fixture& fx : {fix_h3(), fix_h4()}) {
        HamiltonianField f = make_hamiltonian(fx.family);
        FlowGraph g = build_graph(f, fx.h0, fx.cuts);
        double slope_bound = -fx.n_over_m2 - 0.05;
        for (int e = 0; e < g.n_edges(); ++e) {
            double sign = e == 0 ? 1.0 : -1.0;
            std::vector<double> ah = log_levels(1e-5, 1e-2, 19), T;
            for (double a : ah)
                T.push_back(build_loop_quadrature(edge_loop(f, g, e, sign * a), f).period);
            PowerLawFit fit = fit_powerlaw(ah, T);
            if (fit.slope < slope_bound) r.pass = false;
            note << fx.family << " e" << e << " slope=" << fmt(fit.slope)
                 << " (bound " << fmt(slope_bound) << "); ";
            // compensated period bounded within each decade
            for (int dec = -5; dec < -2; ++dec) {
                double mx = 0.0, mn = 1e300;
                for (std::size_t k = 0; k < ah.size(); ++k) {
                    double l10 = std::log10(ah[k]);
                    if (l10 < dec - 1e-9 || l10 > dec + 1.0 + 1e-9) continue;
                    double comp = std::pow(ah[k], fx.n_over_m2) * T[k];
                    mx = std::max(mx, comp);
                    mn = std::min(mn, comp);
                }
                r.measured = std::max(r.measured, mx / mn);
            }
        }
    }
    if (r.measured > r.threshold) r.pass = false;
    r.note = "headline: worst per-decade max/min of |h|^{n/(m+2)} T; " + note.str();
    return r;
}

CriterionResult a4(const std::string&) {
    CriterionResult r{"A4", 0.0, 3.0, false, 0.0, ""};
    Fixture fx = fix_h4();
    HamiltonianField f = make_hamiltonian(fx.family);
    FlowGraph g = build_graph(f, fx.h0, fx.cuts);
    const double radii[] = {0.2, 0.1, 0.05, 0.025};
    auto factor = [&](double ah) {
        double worst = 0.0;
        for (int e = 0; e < g.n_edges(); ++e) {
            double h = (e == 0 ? 1.0 : -1.0) * ah;
            LevelLoop loop = edge_loop(f, g, e, h);
            double mx = 0.0, mn = 1e300;
            for (double rad : radii) {
                double v = clipped_length(loop, rad) / rad;  // m - n + 2 = 1
                mx = std::max(mx, v);
                mn = std::min(mn, v);
            }
            worst = std::max(worst, mn > 0.0 ? mx / mn
                                             : std::numeric_limits<double>::infinity());
        }
        return worst;
    };
    r.measured = factor(1e-4);
    r.pass = r.measured <= r.threshold;
    // at |h| = 1e-4 the loop cannot enter B_{0.025}: its closest approach to
    // the saddle is |h|^{1/(m+2)} ~ 0.046, forced by the growth inequalities
    // themselves, so the smallest ball clips nothing and the stated variation
    // factor is infinite. The comparability the bound expresses does hold once
    // every ball is wider than the approach distance; reported as diagnostics.
    r.note = "variation factor of L(c∩B_r)/r at |h|=1e-4 (empty smallest ball => inf); "
             "diagnostic factor at |h|=1e-6: " + fmt(factor(1e-6));
    return r;
}

CriterionResult a5(const std::string&) {
    CriterionResult r{"A5", 0.0, 1e-6, true, 0.0, ""};
    // norm-cost identity against independently tabulated profiles
    HamiltonianField f = make_hamiltonian("h3");
    Fixture fx = fix_h3();
    FlowGraph g = build_graph(f, fx.h0, fx.cuts);
    auto profiles = tabulate_profiles(f, g, {24, 1e-4});
    RunningCostSpec nrm = RunningCostSpec::norm();
    for (int e = 0; e < g.n_edges(); ++e) {
        double q_max = default_q_max(nrm, profiles[e], 1.0, 1.0);
        AveragedTable t = tabulate_gbar(f, nrm, g, profiles[e], q_max, 33);
        for (std::size_t hi = 0; hi < t.levels.size(); ++hi)
            for (std::size_t qi = 0; qi < t.q_grid.size(); ++qi) {
                double expect =
                    std::abs(t.q_grid[qi]) * profiles[e].L[hi] / profiles[e].T[hi];
                double rel = std::abs(t.values[hi][qi] - expect) /
                             std::max(std::abs(expect), 1e-12);
                if (t.q_grid[qi] != 0.0) r.measured = std::max(r.measured, rel);
            }
    }
    if (r.measured > r.threshold) r.pass = false;

    // radial oracle: quadratic cost gives q^2 h exactly
    HamiltonianField rad = make_hamiltonian("radial");
    RunningCostSpec quad = RunningCostSpec::quadratic();
    auto crits = find_critical_points(rad, {-1.0, 1.0, -1.0, 1.0}, 0.2);
    double rad_err = 0.0;
    for (double h : {0.125, 0.5, 1.125}) {
        LevelLoop loop = trace_loop(rad, h, {std::sqrt(2.0 * h), 0.0}, 1e-10);
        for (double q : {-2.0, -0.5, 0.7, 1.3}) {
            double v = averaged_g(rad, quad, loop, q);
            rad_err = std::max(rad_err,
                               std::abs(v - q * q * h) / std::max(1.0, q * q * h));
        }
    }
    (void)crits;
    if (rad_err > 1e-8) r.pass = false;

    // route equivalence at random (h, q) pairs on the h3 well edge
    std::mt19937_64 rng(20240811);
    std::uniform_real_distribution<double> hd(-0.15, -0.03), qd(-2.0, 2.0);
    double route_err = 0.0;
    for (int k = 0; k < 20; ++k) {
        double h = hd(rng), q = qd(rng);
        LevelLoop loop = edge_loop(f, g, 1, h);
        double line = averaged_g(f, quad, loop, q);
        double time = averaged_g_time_route(f, quad, loop.vertices[0], q);
        route_err = std::max(route_err, std::abs(line - time));
    }
    if (route_err > 1e-5) r.pass = false;
    r.note = "headline: norm identity rel err; radial err " + fmt(rad_err) +
             " (tol 1e-8); route err " + fmt(route_err) + " (tol 1e-5)";
    return r;
}

CriterionResult a6(const std::string&) {
    CriterionResult r{"A6", 0.0, 0.05, true, 0.0, ""};
    RunningCostSpec quad = RunningCostSpec::quadratic();
    double coerc_viol = 0.0;
    for (const Fixture& fx : {fix_h3(), fix_h4()}) {
        HamiltonianField f = make_hamiltonian(fx.family);
        FlowGraph g = build_graph(f, fx.h0, fx.cuts);
        for (int e = 0; e < g.n_edges(); ++e) {
            double frac = 1e-5 / std::abs(g.cut(e));  // innermost |h| = 1e-5
            auto profiles = tabulate_profiles(f, g, {40, frac});
            const EdgeProfile& pr = profiles[e];
            double q_max = default_q_max(quad, pr, 1.0, 1.0);
            AveragedTable t = tabulate_gbar(f, quad, g, pr, q_max, 129);
            for (std::size_t hi = 0; hi < t.levels.size(); ++hi) {
                double lt = t.L[hi] / t.T[hi];
                for (std::size_t qi = 0; qi < t.q_grid.size(); ++qi)
                    coerc_viol = std::max(
                        coerc_viol, quad.nu * lt * std::abs(t.q_grid[qi]) - quad.M -
                                        1e-9 - t.values[hi][qi]);
            }
            int last = static_cast<int>(t.levels.size()) - 1;
            double arg = 0.0;
            double mn = t.row_min(last, arg);
            double at0 = t.row_value(last, 0.0);
            // G(0,0) = 0 for the quadratic cost without a spatial term
            r.measured = std::max(r.measured, std::abs(mn));
            r.measured = std::max(r.measured, std::abs(at0));
        }
    }
    if (coerc_viol > 0.0) r.pass = false;
    if (r.measured > r.threshold) r.pass = false;
    r.note = "headline: |min_q Gbar| and |Gbar(h,0)| at |h|=1e-5; coercivity slack " +
             fmt(coerc_viol) + " (must be <= 0)";
    return r;
}

CriterionResult a7(const std::string&) {
    CriterionResult r{"A7", 0.0, 1e-4, true, 0.0, ""};
    auto row = [](double, double q) { return std::abs(q) - 1.0; };
    auto t = make_synthetic_table(uniform_levels(-1.0, 1.0 / 2048, 2047), row, 6.0, 121);
    EdgeSolution s = solve_edge(t, 1.0, BoundaryCondition::dirichlet(0.0),
                                BoundaryCondition::free_end());
    r.measured = std::abs(s.node_value - (1.0 - std::exp(-1.0)));
    if (r.measured > r.threshold) r.pass = false;

    const double c = 0.8;
    auto tc = make_synthetic_table(geometric_levels(-0.5, 1e-4, 50),
                                   [&](double, double) { return c; }, 4.0, 41);
    EdgeSolution sc = solve_edge(tc, 1.0, BoundaryCondition::dirichlet(-c),
                                 BoundaryCondition::free_end());
    double const_err = 0.0;
    for (double u : sc.u) const_err = std::max(const_err, std::abs(u + c));
    if (const_err > 1e-10) r.pass = false;

    // comparison and shift on random data pairs
    auto t2 = make_synthetic_table(geometric_levels(-0.7, 1e-5, 80), row, 5.0, 121);
    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> dd(-1.0, 0.5), kk(0.01, 0.5);
    bool order_ok = true, shift_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        double dl = dd(rng);
        double dh = std::min(dl + kk(rng), 0.9);
        EdgeSolution ul = solve_edge(t2, 1.0, BoundaryCondition::dirichlet(dl),
                                     BoundaryCondition::free_end());
        EdgeSolution uh = solve_edge(t2, 1.0, BoundaryCondition::dirichlet(dh),
                                     BoundaryCondition::free_end());
        for (std::size_t j = 0; j < ul.u.size(); ++j)
            if (uh.u[j] < ul.u[j] - 1e-9) order_ok = false;
        // u - kappa stays a subsolution of the scheme
        EdgeSolution sh = ul;
        double kappa = kk(rng);
        for (double& u : sh.u) u -= kappa;
        if (scheme_residual(t2, 1.0, sh) > 1e-9) shift_ok = false;
    }
    if (!order_ok || !shift_ok) r.pass = false;
    r.note = "headline: |rho(0) - (1 - 1/e)|; constant-row err " + fmt(const_err) +
             " (tol 1e-10); comparison " + (order_ok ? "ok" : "VIOLATED") + ", shift " +
             (shift_ok ? "ok" : "VIOLATED");
    return r;
}

CriterionResult a8(const std::string&) {
    CriterionResult r{"A8", 0.0, 0.0, false, 0.0, ""};
    int failed = 0;
    auto expect = [&](bool ok) {
        if (!ok) ++failed;
    };
    auto row = [](double, double q) { return std::abs(q) - 1.0; };
    std::vector<AveragedTable> tables;
    for (int i = 0; i < 2; ++i)
        tables.push_back(make_synthetic_table(geometric_levels(-1.0, 1e-4, 60), row, 6.0, 121));

    auto interior = check_admissible(tables, 1.0, -0.5, {-0.5, -0.5});
    expect(interior.verdict && interior.in_interior && interior.margin > 0.0);

    auto infeas = check_admissible(tables, 1.0, -0.5, {2.0, -0.5});
    expect(!infeas.verdict && !infeas.cond_feasible && !infeas.edge_feasible[0] &&
           infeas.edge_feasible[1]);

    auto rho = check_admissible(tables, 1.0, 0.9, {-2.0, -2.0});
    expect(!rho.verdict && !rho.cond_rho && rho.cond_feasible);

    auto sol_nu = maximal_subsolution_nu(tables[0], 1.0, -0.9);
    auto nu = check_admissible(tables, 1.0, -0.9,
                               {sol_nu.boundary_value() + 0.05, -2.0});
    expect(!nu.verdict && !nu.cond_nu && !nu.edge_nu_ok[0] && nu.edge_nu_ok[1]);

    std::vector<double> data{-0.2, -0.6};
    GraphSolution sol = junction_solve(tables, 1.0, data);
    auto boundary = check_admissible(tables, 1.0, sol.d, data);
    expect(boundary.verdict && !boundary.in_interior);
    auto inner = check_admissible(tables, 1.0, sol.d - 0.05, data);
    expect(inner.verdict && inner.in_interior);

    r.measured = failed;
    r.pass = failed == 0;
    r.note = "failed subchecks out of 6 (interior, three targeted violations, D\\D0 "
             "boundary tuple, nudged interior); D0 margin " + fmt(interior.margin);
    return r;
}

ExperimentConfig a9_config(const Fixture& fx, int grid_n, const std::string& outdir) {
    ExperimentConfig c;
    c.hamiltonian = fx.family;
    c.h0 = fx.h0;
    c.cuts = fx.cuts;
    c.cost = "quad";
    c.lambda = 1.0;
    c.data.assign(fx.cuts.size() + 1, -1.0);
    c.eps_list = {0.4, 0.2, 0.1, 0.05};
    c.grid_n = grid_n;
    c.outdir = outdir;
    return c;
}

// collar tolerance: the junction error compares u^eps with the constant d*
// over nodes whose |H| reaches junction_band, so the graph solution's own
// variation over that band is part of the budget, plus the node extrapolation
// error estimate
double collar_tolerance(const ConvergenceReport& rep) {
    double extent = std::max(rep.collar, rep.junction_band);
    double tol = 0.0;
    for (const EdgeSolution& e : rep.graph.edges) {
        double sign = e.node_on_left ? 1.0 : -1.0;
        tol = std::max(tol, std::abs(e.value_at(sign * extent) - rep.d_star));
        tol = std::max(tol, e.node_value_error);
    }
    return tol;
}

CriterionResult a9(const std::string& outdir) {
    CriterionResult r{"A9", 0.0, 0.5, true, 0.0, ""};
    std::ostringstream note;
    int which = 0;
    for (const Fixture& fx : {fix_h3(), fix_h4()}) {
        int grid = which == 0 ? 257 : 321;
        ExperimentConfig cfg = a9_config(fx, grid, outdir + "/a9_" + fx.family);
        ConvergenceReport rep = run_convergence(cfg);
        double ratio = rep.E.back() / rep.E.front();
        // the halving threshold is quantitative for the nondegenerate h3
        // fixture; h4 must pass qualitatively (decrease plus sandwich), its
        // slower rate is reported but not thresholded
        if (which == 0) r.measured = ratio;
        if (!rep.monotone) r.pass = false;
        double ctol = collar_tolerance(rep);
        bool sandwich = rep.junction_err.back() <= rep.E.back() + ctol;
        if (!sandwich) r.pass = false;
        note << fx.family << " E=[";
        for (double e : rep.E) note << fmt(e) << " ";
        note << "] ratio=" << fmt(ratio) << " monotone=" << rep.monotone
             << " junction=" << fmt(rep.junction_err.back())
             << " vs E+ctol=" << fmt(rep.E.back() + ctol) << "; ";
        ++which;
    }
    if (r.measured > r.threshold) r.pass = false;
    r.note = "headline: h3 E(0.05)/E(0.4); " + note.str();
    return r;
}

CriterionResult a10(const std::string&) {
    CriterionResult r{"A10", 0.0, 1.0, true, 0.0, ""};
    int stalled = 0;
    for (const Fixture& fx : {fix_h3(), fix_h4()}) {
        HamiltonianField f = make_hamiltonian(fx.family);
        double c0 = fit_c0_on_region(f, 1e-2, 1.4, 3000);
        for (double h : {1e-2, 1e-3, 1e-4}) {
            TransitResult t = measure_transit(f, 0.05, h, 0.3, 32, c0);
            r.measured = std::max(r.measured, t.ratio);
            stalled += t.stalled_trials;
        }
    }
    if (stalled > 0) r.pass = false;
    if (r.measured > r.threshold) r.pass = false;
    r.note = "max transit/bound ratio over h in {1e-2,1e-3,1e-4}, h3 and h4; stalled "
             "trials " + std::to_string(stalled);
    return r;
}

CriterionResult a11(const std::string& outdir) {
    CriterionResult r{"A11", -1e300, 1e-3, false, 0.0, ""};
    RunningCostSpec quad = RunningCostSpec::quadratic();
    for (const Fixture& fx : {fix_h3(), fix_h4()}) {
        ExperimentConfig cfg = a9_config(fx, 65, outdir + "/a11_" + fx.family);
        HamiltonianField f = config_field(cfg);
        FlowGraph g = build_graph(f, cfg.h0, cfg.cuts);
        auto profiles = tabulate_profiles(f, g, {cfg.profile_count, cfg.innermost_frac});
        std::vector<AveragedTable> tables;
        for (int e = 0; e < g.n_edges(); ++e) {
            double q_max = default_q_max(quad, profiles[e], cfg.lambda, 1.0);
            tables.push_back(tabulate_gbar(f, quad, g, profiles[e], q_max, cfg.q_count));
        }
        GraphSolution sol = junction_solve(tables, cfg.lambda, cfg.data);
        for (const EdgeSolution& e : sol.edges)
            r.measured = std::max(r.measured,
                                  cfg.lambda * e.node_value + quad.at_origin());
    }
    r.pass = r.measured <= r.threshold;
    r.note = "max over fixture edges of lambda u(node) + G(0,0)";
    return r;
}

using Runner = std::function<CriterionResult(const std::string&)>;

const std::vector<std::pair<std::string, Runner>>& registry() {
    static const std::vector<std::pair<std::string, Runner>> reg = {
        {"A1", a1}, {"A2", a2}, {"A3", a3},  {"A4", a4},  {"A5", a5}, {"A6", a6},
        {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11},
    };
    return reg;
}

}  // namespace

std::vector<std::string> acceptance_selectors() {
    std::vector<std::string> s{"all", "geometry"};
    for (const auto& [id, fn] : registry()) s.push_back(id);
    return s;
}

std::vector<CriterionResult> run_acceptance(const std::string& selector,
                                            std::ostream& log,
                                            const std::string& outdir) {
    std::vector<std::pair<std::string, Runner>> todo;
    if (selector == "all") {
        todo = registry();
    } else if (selector == "geometry") {
        for (const auto& p : registry())
            if (p.first <= "A5" && p.first.size() == 2) todo.push_back(p);
    } else {
        for (const auto& p : registry())
            if (p.first == selector) todo.push_back(p);
    }
    if (todo.empty()) {
        std::string valid;
        for (const auto& s : acceptance_selectors()) valid += s + " ";
        throw std::invalid_argument("unknown acceptance selector '" + selector +
                                    "'; valid: " + valid);
    }
    std::vector<CriterionResult> out;
    for (const auto& [id, fn] : todo) {
        auto t0 = std::chrono::steady_clock::now();
        CriterionResult r = fn(outdir);
        auto t1 = std::chrono::steady_clock::now();
        r.seconds = std::chrono::duration<double>(t1 - t0).count();
        char line[256];
        std::snprintf(line, sizeof line, "%-4s %s  measured=%.6g threshold=%.6g [%.1fs]",
                      r.id.c_str(), r.pass ? "PASS" : "FAIL", r.measured, r.threshold,
                      r.seconds);
        log << line << "\n    " << r.note << "\n";
        out.push_back(std::move(r));
    }
    return out;
}

void write_acceptance_csv(const std::vector<CriterionResult>& rows,
                          const std::string& path) {
    std::ofstream out(path);
    out << "id,measured,threshold,verdict,seconds,note\n";
    out.precision(17);
    for (const auto& r : rows) {
        std::string note = r.note;
        for (char& c : note)
            if (c == ',' || c == '\n') c = ';';
        out << r.id << ',' << r.measured << ',' << r.threshold << ','
            << (r.pass ? "pass" : "fail") << ',' << r.seconds << ',' << note << "\n";
    }
}

}  // namespace hj

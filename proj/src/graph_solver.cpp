#include "hj/graph_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hj {

namespace {

// Ascending-h view of a table: the junction side is the end whose levels
// approach 0, which is the last table row for both edge orientations.
struct EdgeGrid {
    const AveragedTable* table;
    std::vector<double> h;     // ascending
    std::vector<int> row;      // grid index -> table row
    std::vector<double> qstar;     // per grid node row argmin
    std::vector<double> row_min;   // per grid node row minimum value
    bool node_on_left;

    int n() const { return static_cast<int>(h.size()); }
    double H(int j, double q) const { return table->row_value(row[j], q); }
};

EdgeGrid make_grid(const AveragedTable& t) {
    EdgeGrid g;
    g.table = &t;
    const int n = static_cast<int>(t.levels.size());
    if (n < 4) throw std::invalid_argument("solve_edge: need at least 4 levels");
    g.node_on_left = t.levels.front() > 0.0;
    g.h.resize(n);
    g.row.resize(n);
    for (int k = 0; k < n; ++k) {
        int r = g.node_on_left ? n - 1 - k : k;
        g.h[k] = t.levels[r];
        g.row[k] = r;
    }
    for (int k = 0; k + 1 < n; ++k)
        if (g.h[k] >= g.h[k + 1]) throw std::invalid_argument("solve_edge: levels not monotone");
    g.qstar.resize(n);
    g.row_min.resize(n);
    for (int k = 0; k < n; ++k) g.row_min[k] = t.row_min(g.row[k], g.qstar[k]);
    return g;
}

// Godunov flux at node j given neighbor values; a missing side contributes
// the row minimum, which also realizes the free-end (state constraint) closure.
double flux_at(const EdgeGrid& g, int j, double uj, const std::vector<double>& u,
               bool use_left, bool use_right) {
    double left_term = g.row_min[j];
    double right_term = g.row_min[j];
    if (use_left) {
        double p = (uj - u[j - 1]) / (g.h[j] - g.h[j - 1]);
        left_term = g.H(j, std::max(p, g.qstar[j]));
    }
    if (use_right) {
        double p = (u[j + 1] - uj) / (g.h[j + 1] - g.h[j]);
        right_term = g.H(j, std::min(p, g.qstar[j]));
    }
    return std::max(left_term, right_term);
}

// Root of lambda v + flux(v) = 0; the residual is strictly increasing in v.
double node_solve(const EdgeGrid& g, int j, double lambda, const std::vector<double>& u,
                  bool use_left, bool use_right) {
    auto resid = [&](double v) {
        return lambda * v + flux_at(g, j, v, u, use_left, use_right);
    };
    double lo = u[j], hi = u[j];
    double w = 1.0 + std::abs(u[j]);
    while (resid(lo) > 0.0) { lo -= w; w *= 2.0; if (w > 1e30) break; }
    w = 1.0 + std::abs(u[j]);
    while (resid(hi) < 0.0) { hi += w; w *= 2.0; if (w > 1e30) break; }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (resid(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double update_node(const EdgeGrid& g, int j, double lambda, std::vector<double>& u,
                   const BoundaryCondition& left, const BoundaryCondition& right,
                   bool& attained) {
    const int n = g.n();
    bool use_left = j > 0, use_right = j < n - 1;
    double cand = node_solve(g, j, lambda, u, use_left, use_right);
    attained = true;
    if (j == 0 && left.kind == BoundaryCondition::Kind::Dirichlet) {
        attained = left.value <= cand + 1e-12;
        cand = std::min(left.value, cand);
    }
    if (j == n - 1 && right.kind == BoundaryCondition::Kind::Dirichlet) {
        attained = right.value <= cand + 1e-12;
        cand = std::min(right.value, cand);
    }
    return cand;
}

// Polynomial extrapolation to t = 0 through the given points (Neville).
double extrapolate0(const std::vector<double>& t, const std::vector<double>& v) {
    std::vector<double> p = v;
    const std::size_t n = t.size();
    for (std::size_t m = 1; m < n; ++m)
        for (std::size_t i = 0; i + m < n; ++i)
            p[i] = ((0.0 - t[i + m]) * p[i] + (t[i] - 0.0) * p[i + 1]) / (t[i] - t[i + m]);
    return p[0];
}

void fill_node_value(const EdgeGrid& g, EdgeSolution& s) {
    const int n = g.n();
    std::vector<double> t4, v4, t3, v3;
    for (int k = 0; k < 4; ++k) {
        int j = g.node_on_left ? k : n - 1 - k;
        t4.push_back(std::abs(g.h[j]));
        v4.push_back(s.u[j]);
        if (k < 3) {
            t3.push_back(std::abs(g.h[j]));
            v3.push_back(s.u[j]);
        }
    }
    double e4 = extrapolate0(t4, v4);
    double e3 = extrapolate0(t3, v3);
    s.node_value = e4;
    s.node_value_error = std::abs(e4 - e3);
}

}  // namespace

double EdgeSolution::value_at(double level) const {
    if (h.empty()) throw std::logic_error("EdgeSolution::value_at: empty solution");
    if (level <= h.front()) return u.front();
    if (level >= h.back()) return u.back();
    auto it = std::upper_bound(h.begin(), h.end(), level);
    std::size_t k = static_cast<std::size_t>(it - h.begin());
    double w = (level - h[k - 1]) / (h[k] - h[k - 1]);
    return (1.0 - w) * u[k - 1] + w * u[k];
}

EdgeSolution solve_edge(const AveragedTable& table, double lambda,
                        BoundaryCondition left, BoundaryCondition right, double tol,
                        int max_sweeps) {
    if (lambda <= 0.0) throw std::invalid_argument("solve_edge: lambda must be positive");
    EdgeGrid g = make_grid(table);
    const int n = g.n();

    EdgeSolution s;
    s.edge_index = table.edge_index;
    s.h = g.h;
    s.left = left;
    s.right = right;
    s.node_on_left = g.node_on_left;

    // rest state ignoring the gradient, clipped by the Dirichlet data
    s.u.resize(n);
    for (int j = 0; j < n; ++j) s.u[j] = -g.row_min[j] / lambda;
    if (left.kind == BoundaryCondition::Kind::Dirichlet)
        s.u[0] = std::min(s.u[0], left.value);
    if (right.kind == BoundaryCondition::Kind::Dirichlet)
        s.u[n - 1] = std::min(s.u[n - 1], right.value);

    bool attained = true;
    double upd = 0.0;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        upd = 0.0;
        if (sweep % 2 == 0) {
            for (int j = 0; j < n; ++j) {
                double v = update_node(g, j, lambda, s.u, left, right, attained);
                upd = std::max(upd, std::abs(v - s.u[j]));
                s.u[j] = v;
                if (j == 0) s.left_attained = attained;
                if (j == n - 1) s.right_attained = attained;
            }
        } else {
            for (int j = n - 1; j >= 0; --j) {
                double v = update_node(g, j, lambda, s.u, left, right, attained);
                upd = std::max(upd, std::abs(v - s.u[j]));
                s.u[j] = v;
                if (j == 0) s.left_attained = attained;
                if (j == n - 1) s.right_attained = attained;
            }
        }
        if (upd < tol) break;
    }
    s.sweeps = sweep + 1;
    s.final_update = upd;
    if (upd >= tol)
        throw std::runtime_error("solve_edge: no convergence within sweep budget");

    // converged upwind slopes must stay inside the tabulated q range where
    // the row actually depends on q (clipping a flat row is harmless)
    for (int j = 1; j < n; ++j) {
        double p = (s.u[j] - s.u[j - 1]) / (g.h[j] - g.h[j - 1]);
        double pc = std::clamp(p, table.q_grid.front(), table.q_grid.back());
        if (std::abs(table.row_value(g.row[j], p) - table.row_value(g.row[j], pc)) > 1e-9)
            throw std::runtime_error("solve_edge: solution slope left the tabulated q range");
    }
    table.q_clipped = false;

    fill_node_value(g, s);
    return s;
}

double scheme_residual(const AveragedTable& table, double lambda,
                       const EdgeSolution& sol) {
    EdgeGrid g = make_grid(table);
    double worst = -1e300;
    for (int j = 1; j + 1 < g.n(); ++j)
        worst = std::max(worst,
                         lambda * sol.u[j] + flux_at(g, j, sol.u[j], sol.u, true, true));
    return worst;
}

double feasibility_ceiling(const AveragedTable& table, double lambda) {
    EdgeSolution s = solve_edge(table, lambda, BoundaryCondition::free_end(),
                                BoundaryCondition::free_end());
    return s.boundary_value();
}

EdgeSolution maximal_subsolution_rho(const AveragedTable& table, double lambda, double d) {
    double a = feasibility_ceiling(table, lambda);
    if (d > a + 1e-9)
        throw std::runtime_error("FEASIBILITY: boundary value above ceiling on edge " +
                                 std::to_string(table.edge_index));
    bool node_left = table.levels.front() > 0.0;
    BoundaryCondition bd = BoundaryCondition::dirichlet(d);
    BoundaryCondition fr = BoundaryCondition::free_end();
    return node_left ? solve_edge(table, lambda, fr, bd)
                     : solve_edge(table, lambda, bd, fr);
}

EdgeSolution maximal_subsolution_nu(const AveragedTable& table, double lambda, double d) {
    EdgeSolution unconstrained = solve_edge(table, lambda, BoundaryCondition::free_end(),
                                            BoundaryCondition::free_end());
    if (d > unconstrained.node_value + 1e-9)
        throw std::runtime_error("FEASIBILITY: node value above ceiling on edge " +
                                 std::to_string(table.edge_index));
    bool node_left = table.levels.front() > 0.0;
    BoundaryCondition bd = BoundaryCondition::dirichlet(d);
    BoundaryCondition fr = BoundaryCondition::free_end();
    return node_left ? solve_edge(table, lambda, bd, fr)
                     : solve_edge(table, lambda, fr, bd);
}

namespace {

const double kTolD = 1e-9;

// Evaluate the three admissibility condition groups for one tuple.
void evaluate_conditions(const std::vector<AveragedTable>& tables, double lambda,
                         double d, const std::vector<double>& data,
                         const std::vector<double>& a, double rho0,
                         AdmissibilityReport& r) {
    const std::size_t m = tables.size();
    r.rho_at_node.assign(m, 0.0);
    r.nu_at_boundary.assign(m, 0.0);
    r.edge_feasible.assign(m, true);
    r.edge_rho_ok.assign(m, true);
    r.edge_nu_ok.assign(m, true);

    r.cond_feasible = d <= rho0 + kTolD;
    for (std::size_t i = 0; i < m; ++i) {
        r.edge_feasible[i] = data[i] <= a[i] + kTolD;
        if (!r.edge_feasible[i]) r.cond_feasible = false;
    }

    r.cond_rho = true;
    r.cond_nu = true;
    for (std::size_t i = 0; i < m; ++i) {
        bool node_left = tables[i].levels.front() > 0.0;
        BoundaryCondition fr = BoundaryCondition::free_end();
        // the scheme clamps infeasible data on its own, which keeps the
        // report well defined outside D
        BoundaryCondition bdi = BoundaryCondition::dirichlet(data[i]);
        EdgeSolution rho = node_left ? solve_edge(tables[i], lambda, fr, bdi)
                                     : solve_edge(tables[i], lambda, bdi, fr);
        r.rho_at_node[i] = rho.node_value;
        r.edge_rho_ok[i] = rho.node_value >= d - kTolD;
        if (!r.edge_rho_ok[i]) r.cond_rho = false;

        BoundaryCondition bdn = BoundaryCondition::dirichlet(d);
        EdgeSolution nu = node_left ? solve_edge(tables[i], lambda, bdn, fr)
                                    : solve_edge(tables[i], lambda, fr, bdn);
        r.nu_at_boundary[i] = nu.boundary_value();
        r.edge_nu_ok[i] = nu.boundary_value() >= data[i] - kTolD;
        if (!r.edge_nu_ok[i]) r.cond_nu = false;
    }
    r.verdict = r.cond_feasible && r.cond_rho && r.cond_nu;
}

}  // namespace

AdmissibilityReport check_admissible(const std::vector<AveragedTable>& tables,
                                     double lambda, double d,
                                     const std::vector<double>& data) {
    if (tables.size() != data.size())
        throw std::invalid_argument("check_admissible: data size mismatch");
    AdmissibilityReport r;
    const std::size_t m = tables.size();
    r.a.resize(m);
    r.rho0 = 1e300;
    for (std::size_t i = 0; i < m; ++i) {
        EdgeSolution free_sol = solve_edge(tables[i], lambda, BoundaryCondition::free_end(),
                                           BoundaryCondition::free_end());
        r.a[i] = free_sol.boundary_value();
        r.rho0 = std::min(r.rho0, free_sol.node_value);
    }
    evaluate_conditions(tables, lambda, d, data, r.a, r.rho0, r);

    r.in_interior = false;
    r.margin = 0.0;
    if (r.verdict) {
        for (int k = 0; k <= 20 && !r.in_interior; ++k) {
            double shift = std::pow(2.0, -k);
            AdmissibilityReport probe;
            probe.a = r.a;
            std::vector<double> sdata(data);
            for (auto& v : sdata) v += shift;
            evaluate_conditions(tables, lambda, d + shift, sdata, r.a, r.rho0, probe);
            if (probe.verdict) {
                r.in_interior = true;
                r.margin = shift;
            }
        }
    }
    return r;
}

GraphSolution junction_solve(const std::vector<AveragedTable>& tables, double lambda,
                             const std::vector<double>& data) {
    if (tables.size() != data.size())
        throw std::invalid_argument("junction_solve: data size mismatch");
    GraphSolution sol;
    sol.data = data;
    sol.d = 1e300;
    for (std::size_t i = 0; i < tables.size(); ++i) {
        EdgeSolution rho = maximal_subsolution_rho(tables[i], lambda, data[i]);
        sol.d = std::min(sol.d, rho.node_value);
    }
    for (std::size_t i = 0; i < tables.size(); ++i) {
        bool node_left = tables[i].levels.front() > 0.0;
        BoundaryCondition bdi = BoundaryCondition::dirichlet(data[i]);
        BoundaryCondition bdn = BoundaryCondition::dirichlet(sol.d);
        sol.edges.push_back(node_left ? solve_edge(tables[i], lambda, bdn, bdi)
                                      : solve_edge(tables[i], lambda, bdi, bdn));
    }
    sol.report = check_admissible(tables, lambda, sol.d, data);
    return sol;
}

std::string AdmissibilityReport::to_text() const {
    std::ostringstream out;
    out.precision(12);
    out << "admissibility report\n";
    out << "  rho0 = " << rho0 << "\n";
    for (std::size_t i = 0; i < a.size(); ++i) {
        out << "  edge " << i << ": a_i = " << a[i] << "  rho_i(0) = " << rho_at_node[i]
            << "  nu_i(h_i) = " << nu_at_boundary[i] << "  feasible=" << edge_feasible[i]
            << " rho_ok=" << edge_rho_ok[i] << " nu_ok=" << edge_nu_ok[i] << "\n";
    }
    out << "  conditions: feasible=" << cond_feasible << " rho=" << cond_rho
        << " nu=" << cond_nu << "\n";
    out << "  verdict: " << (verdict ? "admissible" : "not admissible");
    if (verdict)
        out << (in_interior ? " (interior, margin " + std::to_string(margin) + ")"
                            : " (boundary of the admissible set)");
    out << "\n";
    return out.str();
}

AveragedTable make_synthetic_table(const std::vector<double>& levels,
                                   const std::function<double(double, double)>& row,
                                   double q_max, int q_count) {
    AveragedTable t;
    t.levels = levels;
    t.L.assign(levels.size(), 1.0);
    t.T.assign(levels.size(), 1.0);
    t.q_grid.resize(q_count);
    for (int j = 0; j < q_count; ++j)
        t.q_grid[j] = -q_max + 2.0 * q_max * j / (q_count - 1);
    t.values.assign(levels.size(), std::vector<double>(q_count));
    for (std::size_t k = 0; k < levels.size(); ++k)
        for (int j = 0; j < q_count; ++j) t.values[k][j] = row(levels[k], t.q_grid[j]);
    return t;
}

void write_edge_csv(const EdgeSolution& sol, const std::string& path) {
    std::ofstream out(path);
    out << "h,u\n";
    out.precision(17);
    for (std::size_t j = 0; j < sol.h.size(); ++j)
        out << sol.h[j] << ',' << sol.u[j] << '\n';
}

}  // namespace hj

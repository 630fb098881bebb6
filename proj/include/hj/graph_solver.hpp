#pragma once

#include <string>
#include <vector>

#include "hj/averaging.hpp"

namespace hj {

struct BoundaryCondition {
    enum class Kind { Dirichlet, Free } kind = Kind::Free;
    double value = 0.0;

    static BoundaryCondition dirichlet(double v) { return {Kind::Dirichlet, v}; }
    static BoundaryCondition free_end() { return {Kind::Free, 0.0}; }
};

// Discrete solution of lambda u + Gbar_i(h, u') = 0 on one edge. The grid is
// stored ascending in h; the junction side is the end whose levels approach 0.
struct EdgeSolution {
    int edge_index = 0;
    std::vector<double> h;  // ascending
    std::vector<double> u;
    BoundaryCondition left, right;
    bool node_on_left = false;       // true for the outer edge (h > 0)
    bool left_attained = true;       // Dirichlet value kept in the viscosity sense
    bool right_attained = true;
    double node_value = 0.0;         // extrapolated to h = 0
    double node_value_error = 0.0;   // 4- vs 3-point extrapolant difference
    int sweeps = 0;
    double final_update = 0.0;

    double boundary_value() const { return node_on_left ? u.back() : u.front(); }

    // linear interpolation on the h grid, clamped at the ends
    double value_at(double level) const;
};

struct AdmissibilityReport {
    std::vector<double> a;         // feasibility ceilings, I_i = (-inf, a_i]
    double rho0 = 0.0;             // min_i sup_d rho_i^d(0)
    std::vector<double> rho_at_node;       // rho_i^{d_i}(0)
    std::vector<double> nu_at_boundary;    // nu_i^d(h_i)
    bool cond_feasible = false;    // d <= rho0 and d_i <= a_i
    bool cond_rho = false;         // min_i rho_i^{d_i}(0) >= d
    bool cond_nu = false;          // nu_i^d(h_i) >= d_i
    std::vector<bool> edge_feasible;
    std::vector<bool> edge_rho_ok;
    std::vector<bool> edge_nu_ok;
    bool verdict = false;
    bool in_interior = false;      // some positive shift stays admissible
    double margin = 0.0;           // largest tested surviving shift

    std::string to_text() const;
};

struct GraphSolution {
    std::vector<EdgeSolution> edges;
    double d = 0.0;                // junction value
    std::vector<double> data;      // d_i per edge
    AdmissibilityReport report;
};

// Monotone upwind (Godunov) scheme with Gauss-Seidel sweeps; Dirichlet ends
// are imposed in the viscosity sense (value = min(imposed, interior
// candidate)) with an attainment flag.
EdgeSolution solve_edge(const AveragedTable& table, double lambda,
                        BoundaryCondition left, BoundaryCondition right,
                        double tol = 1e-10, int max_sweeps = 1000000);

// Largest boundary value d with a subsolution matching u(h_i) = d: the
// boundary trace of the fully unconstrained maximal subsolution.
double feasibility_ceiling(const AveragedTable& table, double lambda);

// rho_i^d: maximal subsolution with u(h_i) = d, free at the junction.
// Throws if d exceeds the feasibility ceiling.
EdgeSolution maximal_subsolution_rho(const AveragedTable& table, double lambda, double d);

// nu_i^d: maximal subsolution with u(0) = d at the junction, free at h_i.
EdgeSolution maximal_subsolution_nu(const AveragedTable& table, double lambda, double d);

// Junction value from the boundary data alone: d* = min_i rho_i^{d_i}(0),
// then each edge re-solved with both Dirichlet values.
GraphSolution junction_solve(const std::vector<AveragedTable>& tables, double lambda,
                             const std::vector<double>& data);

AdmissibilityReport check_admissible(const std::vector<AveragedTable>& tables,
                                     double lambda, double d,
                                     const std::vector<double>& data);

// Max over interior nodes of lambda u + flux (zero at the fixed point; a
// shifted subsolution stays <= 0).
double scheme_residual(const AveragedTable& table, double lambda,
                       const EdgeSolution& sol);

// Synthetic table from an analytic row Gbar(h, q), for oracles and tests.
// Rows convex in q; piecewise-linear in q is exact when the row is.
AveragedTable make_synthetic_table(const std::vector<double>& levels,
                                   const std::function<double(double, double)>& row,
                                   double q_max, int q_count);

void write_edge_csv(const EdgeSolution& sol, const std::string& path);

}  // namespace hj

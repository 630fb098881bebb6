#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hj/levelset.hpp"

namespace hj {

enum class CostKind { Quadratic, Eikonal, Constant, Norm };

// Running cost G(x, p), convex and coercive in p (except the Constant test
// form). Builtins:
//   Quadratic: |p|^2/2 - f(x)      Eikonal: |p| - f(x)
//   Constant:  c                   Norm:    |p|
struct RunningCostSpec {
    CostKind kind = CostKind::Quadratic;
    std::function<double(Vec2)> f;  // Quadratic/Eikonal spatial term
    double c = 0.0;                 // Constant value
    double nu = 1.0;                // coercivity: G >= nu|p| - M
    double M = 0.5;
    double lipschitz_x = 0.0;       // modulus datum for bounded p

    double operator()(Vec2 x, Vec2 p) const;
    double at_origin() const;  // G(0, 0), evaluated analytically

    static RunningCostSpec quadratic(std::function<double(Vec2)> f = nullptr);
    static RunningCostSpec eikonal(std::function<double(Vec2)> f = nullptr);
    static RunningCostSpec constant(double c);
    static RunningCostSpec norm();
    // Parse "const:<c>" | "norm" | "quad" | "quad:x1" | "eik" | "eik:x1".
    static RunningCostSpec parse(const std::string& text);
};

// Averaged Hamiltonian value by the line-integral formula
//   Gbar(h, q) = (1/T) * integral over c(h) of G(x, q DH)/|DH| dl.
double averaged_g(const HamiltonianField& f, const RunningCostSpec& cost,
                  const LevelLoop& loop, double q, double T = 0.0);

// Independent route: time average of G(X(t), q DH(X(t))) along the flow over
// one period (brute-force oracle for averaged_g).
double averaged_g_time_route(const HamiltonianField& f, const RunningCostSpec& cost,
                             Vec2 x_on_loop, double q, double tol = 1e-10);

// Tabulated Gbar_i on the profile h-grid x a symmetric q-grid. Rows are
// convex piecewise-linear in q; h-interpolation is monotone cubic.
struct AveragedTable {
    int edge_index = 0;
    std::vector<double> levels;    // shared with EdgeProfile, |h| decreasing
    std::vector<double> L, T;
    std::vector<double> q_grid;    // symmetric, uniform
    std::vector<std::vector<double>> values;  // values[h_idx][q_idx]

    double row_value(int h_idx, double q) const;  // PL in q, clamped with flag
    double row_min(int h_idx, double& argmin) const;
    double value(double h, double q) const;       // monotone cubic in h
    mutable bool q_clipped = false;  // set when a query left the q range
};

AveragedTable tabulate_gbar(const HamiltonianField& f, const RunningCostSpec& cost,
                            const FlowGraph& g, const EdgeProfile& profile,
                            double q_max, int q_count = 257, double trace_tol = 1e-8,
                            bool parallel = true);

// Default q_max: 8 * (M + lambda*max|data| + 1) * max(T/L) over the edge.
double default_q_max(const RunningCostSpec& cost, const EdgeProfile& profile,
                     double lambda, double data_sup);

struct MinOverQ {
    double value = 0.0;
    double argmin = 0.0;
};
MinOverQ min_over_q(const AveragedTable& table, double h);

void write_table_csv(const AveragedTable& t, const std::string& path);
bool save_table_cache(const AveragedTable& t, const std::string& path);
bool load_table_cache(AveragedTable& t, const std::string& path);
// Content hash of (field name, cost, grids) used to key the cache.
unsigned long long table_cache_key(const std::string& field_name,
                                   const RunningCostSpec& cost, int edge,
                                   const EdgeProfile& profile, double q_max, int q_count);

}  // namespace hj

#pragma once

#include <string>
#include <vector>

#include "hj/averaging.hpp"

namespace hj {

enum class CellKind : unsigned char { Exterior, Interior, Band };

// Cartesian grid over a box covering the domain between the outer level set
// {H = h0} and the well level sets {H = h_i}. Interior nodes carry the region
// label of their edge; band nodes are the discrete boundary ring just outside
// the interior and hold the Dirichlet data.
struct GridSpec {
    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    int nx = 0, ny = 0;
    std::vector<CellKind> kind;    // row-major, j*nx + i
    std::vector<int> label;        // edge label; -1 where unassigned
    std::vector<double> hval;      // H at each node

    double dx() const { return (x_hi - x_lo) / (nx - 1); }
    double dy() const { return (y_hi - y_lo) / (ny - 1); }
    int idx(int i, int j) const { return j * nx + i; }
    Vec2 point(int i, int j) const {
        return {x_lo + i * dx(), y_lo + j * dy()};
    }
    int count(CellKind k) const;
};

// Mask construction: components of {H < 0} are labeled by the well they
// contain; nodes past the cut levels (or past h0) are exterior.
GridSpec build_grid(const HamiltonianField& f, const FlowGraph& g, int n,
                    double margin = 0.08);

struct EpsField {
    double epsilon = 0.0;
    double lambda = 0.0;
    std::vector<double> u;   // all nodes; exterior/band carry boundary data
    int sweeps = 0;
    double final_update = 0.0;
    double dt = 0.0;
};

// Running-cost Lagrangian L(x, xi) = sup_p (-xi.p - G(x, p)); +infinity
// encodes controls the cost forbids.
double legendre(const RunningCostSpec& cost, Vec2 x, Vec2 xi);

// Semi-Lagrangian fixed point of
//   u(x) = min_xi { dt L(x, xi) + (1 - lambda dt) u(x + dt (b/eps + xi)) }
// over 65 control samples, bilinear interpolation, global dt. The scheme is
// monotone for any positive dt with lambda dt <= 1; courant sets the foot
// distance in cells and trades sweep count against the O(dx^2/dt) bias.
// Serial mode is Gauss-Seidel with rotating sweep orientations; parallel mode
// is double-buffered Jacobi over rows.
EpsField solve_eps(const HamiltonianField& f, const RunningCostSpec& cost,
                   double lambda, double epsilon, const GridSpec& grid,
                   const std::vector<double>& data, bool parallel = true,
                   double tol = 1e-9, int max_sweeps = 2000000,
                   bool allow_partial = false, double courant = 1.0);

// Lax-Friedrichs cross-check for the quadratic cost at moderate epsilon. The
// artificial dissipation scales with max|b|/eps, so this is only useful at the
// largest epsilon of a sweep; the semi-Lagrangian path is the production one.
EpsField lf_solve_eps(const HamiltonianField& f, const RunningCostSpec& cost,
                      double lambda, double epsilon, const GridSpec& grid,
                      const std::vector<double>& data, double tol = 1e-9,
                      int max_sweeps = 2000000);

struct ResidualStats {
    double median = 0.0;
    double p95 = 0.0;
    int nodes = 0;
};

// PDE residual lambda u - b.Du/eps + G(x, Du) by central differences at
// interior nodes two cells away from the boundary and the critical loop.
ResidualStats residual(const EpsField& field, const HamiltonianField& f,
                       const RunningCostSpec& cost, const GridSpec& grid);

void write_mask_pgm(const GridSpec& grid, const std::string& path);
void write_field_csv(const EpsField& field, const GridSpec& grid, const std::string& path);
bool save_field_cache(const EpsField& field, const std::string& path);
bool load_field_cache(EpsField& field, const std::string& path);

}  // namespace hj

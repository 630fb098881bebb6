#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hj/hamiltonian.hpp"

namespace hj {

// Closed polyline approximation of one connected component c_i(h) of a level
// set, oriented along the flow direction b. First and last vertex coincide.
struct LevelLoop {
    int edge_index = -1;
    double level = 0.0;
    std::vector<Vec2> vertices;
    std::vector<double> arclength;  // cumulative, arclength[0] = 0
    double level_residual = 0.0;

    double length() const { return arclength.empty() ? 0.0 : arclength.back(); }
    bool encloses(Vec2 p) const;  // even-odd point-in-polygon
};

LevelLoop trace_loop(const HamiltonianField& f, double h, Vec2 seed, double tol);

// All loops at level h: one per well with H(z_i) < h for h < 0 (labeled by
// well edge index), exactly one (labeled 0) for h > 0.
std::vector<LevelLoop> extract_all_loops(const HamiltonianField& f, double h,
                                         const std::vector<CriticalPoint>& crits,
                                         double tol = 1e-9);

struct LoopMetrics {
    double length = 0.0;  // L(h) = loop arclength
    double period = 0.0;  // T(h) = integral of 1/|DH| dl
};

LoopMetrics loop_metrics(const LevelLoop& loop, const HamiltonianField& f);

// Fixed quadrature rule over a loop: composite Simpson nodes with adaptive
// subdivision targeting the singular integrand 1/|DH|. All loop integrals
// evaluated on the same rule share one chord-length measure, so identities
// like integral(|DH| * 1/|DH|) = integral(1) hold to roundoff.
struct LoopQuadrature {
    std::vector<Vec2> points;       // projected onto the level set
    std::vector<double> weights;    // sum = refined chord length
    std::vector<double> grad_norm;  // |DH| at each node
    double length = 0.0;            // sum of weights
    double period = 0.0;            // sum of weights / |DH|

    template <class F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) s += weights[i] * f(points[i]);
        return s;
    }
};

LoopQuadrature build_loop_quadrature(const LevelLoop& loop, const HamiltonianField& f,
                                     double rel_tol = 1e-9);

// Integral of integrand(x) dl over the loop, nodes projected onto the level
// set; adaptive Simpson per polyline segment. All loop quadratures share the
// chord-length measure, so identities such as integral(1) = length are exact.
double loop_integral(const LevelLoop& loop, const HamiltonianField& f,
                     const std::function<double(Vec2)>& integrand, double rel_tol = 1e-9);

// Arclength of the part of the loop inside the open disc B_r (exact
// segment-circle clipping).
double clipped_length(const LevelLoop& loop, double r);

struct FlowGraph {
    const HamiltonianField* field = nullptr;
    double h0 = 0.0;                  // outer cut, J_0 = (0, h0)
    std::vector<double> cuts;         // h_i < 0, J_i = (h_i, 0), i = 1..N-1
    std::vector<CriticalPoint> critical_points;  // [0] = saddle, then wells
    std::vector<LevelLoop> outer_boundaries;     // loop at h0, then at each h_i

    int n_edges() const { return 1 + static_cast<int>(cuts.size()); }
    double cut(int edge) const { return edge == 0 ? h0 : cuts[edge - 1]; }
    // Well minimum assigned to edge i (i >= 1).
    const CriticalPoint& well(int edge) const { return critical_points[edge]; }
};

FlowGraph build_graph(const HamiltonianField& f, double h0, const std::vector<double>& cuts);

struct GridSpecEdge {
    int count = 60;
    double innermost_frac = 1e-6;  // innermost |h| = frac * |h_cut|
};

// Tabulated L_i(h), T_i(h) on one edge; levels ordered from the cut toward 0.
struct EdgeProfile {
    int edge_index = 0;
    std::vector<double> levels;  // signed h, |h| decreasing geometrically
    std::vector<double> L;
    std::vector<double> T;
    bool truncated = false;      // a tracing failure cut the profile short
};

std::vector<EdgeProfile> tabulate_profiles(const HamiltonianField& f, const FlowGraph& g,
                                           const GridSpecEdge& spec = {},
                                           double trace_tol = 1e-8,
                                           bool parallel = true);

// Serial reference used by tests and the benchmark.
std::vector<EdgeProfile> tabulate_profiles_serial(const HamiltonianField& f,
                                                  const FlowGraph& g,
                                                  const GridSpecEdge& spec = {},
                                                  double trace_tol = 1e-8);

// Loop at the given signed level of the given edge (traced from a fresh seed).
LevelLoop edge_loop(const HamiltonianField& f, const FlowGraph& g, int edge, double h,
                    double tol = 1e-8);

void write_loop_csv(const LevelLoop& loop, const std::string& path);
void write_profile_csv(const EdgeProfile& p, const std::string& path);

}  // namespace hj

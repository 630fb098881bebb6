#pragma once

#include <string>
#include <vector>

#include "hj/eps_solver.hpp"
#include "hj/graph_solver.hpp"

namespace hj {

// Flat key=value experiment description. Unknown keys are rejected so typos
// fail loudly; lists are comma separated.
struct ExperimentConfig {
    std::string hamiltonian = "h3";
    int n_param = 0;
    double h0 = 0.3;
    std::vector<double> cuts = {-0.2, -0.2};
    std::string cost = "quad";
    double lambda = 1.0;
    std::vector<double> data;          // d_i per edge, outer edge first
    double d = 0.0;                    // junction datum for admissibility
    bool d_set = false;                // when false the computed d* is used
    std::vector<double> eps_list = {0.4, 0.2, 0.1, 0.05};
    int grid_n = 257;
    int profile_count = 60;
    double innermost_frac = 1e-6;
    int q_count = 257;
    std::string outdir = "out";
    unsigned long seed = 12345;
    bool svg = false;
    bool parallel = false;
    bool exploratory = false;          // skip the admissibility gate
    double eps_tol = 1e-8;
    double courant = 1.0;

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig parse_text(const std::string& text);
    // Serialization of every field that affects computed values; cache key
    // material, so cache hits can never cross configurations.
    std::string key_material() const;
};

HamiltonianField config_field(const ExperimentConfig& cfg);

struct ConvergenceReport {
    std::vector<double> eps;
    std::vector<double> E;              // sup |u_eps - u_i(H)| outside the collar
    std::vector<double> junction_err;   // sup |u_eps - d*| within 2 dx of c0(0)
    std::vector<double> boundary_layer; // sup |u_eps - d_i| on the ring next to the band
    std::vector<double> runtime_s;
    std::vector<std::vector<double>> region_err;  // [eps index][edge]
    std::vector<bool> cache_hit;
    double collar = 0.0;                // widest innermost tabulated |h|
    double junction_band = 0.0;         // max |H| over the junction-error nodes
    double d_star = 0.0;
    bool monotone = false;              // E strictly decreasing
    bool admissible = false;
    GraphSolution graph;
};

// End-to-end pipeline: graph, profiles, averaged tables, junction solve, then
// one eps-solve per entry of eps_list with content-keyed field caching under
// outdir/cache. Throws with the stage name on any failure.
ConvergenceReport run_convergence(const ExperimentConfig& cfg);

struct PowerLawFit {
    double slope = 0.0;
    double intercept = 0.0;   // log-space intercept
    double residual = 0.0;    // rms log residual
};

// Least squares on log-log; needs >= 4 points, xs strictly monotone, all
// entries positive.
PowerLawFit fit_powerlaw(const std::vector<double>& xs, const std::vector<double>& ys);

// Single-instance guard: creates <dir>/.lock exclusively, removes it on
// destruction. Throws if the lock is already held.
class OutputLock {
  public:
    explicit OutputLock(const std::string& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

  private:
    std::string path_;
};

struct SvgSeries {
    std::string name;
    std::vector<double> xs, ys;
};

// Dependency-free line plot; log axes take log10 of the data.
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::vector<SvgSeries>& series, bool logx = false,
                     bool logy = false);

unsigned long long fnv1a(const std::string& s);

}  // namespace hj

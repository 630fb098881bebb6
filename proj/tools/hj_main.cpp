// Command-line front end: each subcommand reads a flat key=value config and
// writes CSV artifacts into the configured output directory. A lock file on
// the output directory keeps the process single-instance.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hj/acceptance.hpp"
#include "hj/eps_solver.hpp"
#include "hj/flow.hpp"
#include "hj/harness.hpp"

namespace fs = std::filesystem;
using namespace hj;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::string> hamiltonian, cost, outdir;
    std::optional<double> lambda;
    std::optional<std::vector<double>> data, eps_list;
    std::optional<int> grid_n;
    bool svg = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "key=value experiment file");
    cmd->add_option("--hamiltonian", o.hamiltonian, "h3|h3o|h4|hN:<N>|radial");
    cmd->add_option("--cost", o.cost, "const:<c>|norm|quad[:x1]|eik[:x1]");
    cmd->add_option("--lambda", o.lambda, "discount rate");
    cmd->add_option("--data", o.data, "boundary data d0,d1,...")->delimiter(',');
    cmd->add_option("--eps", o.eps_list, "epsilon list, decreasing")->delimiter(',');
    cmd->add_option("--grid", o.grid_n, "nodes per grid side");
    cmd->add_option("--out", o.outdir, "output directory");
    cmd->add_flag("--svg", o.svg, "emit SVG plots alongside CSV");
}

ExperimentConfig resolve(const CommonOpts& o) {
    ExperimentConfig cfg;
    if (!o.config_path.empty()) cfg = ExperimentConfig::load(o.config_path);
    if (o.hamiltonian) cfg.hamiltonian = *o.hamiltonian;
    if (o.cost) cfg.cost = *o.cost;
    if (o.lambda) cfg.lambda = *o.lambda;
    if (o.data) cfg.data = *o.data;
    if (o.eps_list) cfg.eps_list = *o.eps_list;
    if (o.grid_n) cfg.grid_n = *o.grid_n;
    if (o.outdir) cfg.outdir = *o.outdir;
    if (o.svg) cfg.svg = true;
    if (cfg.hamiltonian.rfind("hN:", 0) == 0)
        cfg.n_param = std::stoi(cfg.hamiltonian.substr(3));
    if (cfg.data.empty())
        cfg.data.assign(static_cast<std::size_t>(cfg.cuts.size()) + 1, -1.0);
    return cfg;
}

std::string outpath(const ExperimentConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.outdir);
    return (fs::path(cfg.outdir) / name).string();
}

// Pipeline pieces shared by the geometry-facing subcommands.
std::vector<AveragedTable> build_tables(const ExperimentConfig& cfg,
                                        const HamiltonianField& f, const FlowGraph& g) {
    RunningCostSpec cost = RunningCostSpec::parse(cfg.cost);
    GridSpecEdge spec{cfg.profile_count, cfg.innermost_frac};
    auto profiles = tabulate_profiles(f, g, spec, 1e-8, cfg.parallel);
    double data_sup = 0.0;
    for (double d : cfg.data) data_sup = std::max(data_sup, std::abs(d));
    std::vector<AveragedTable> tables;
    fs::path cache_dir = fs::path(cfg.outdir) / "cache";
    fs::create_directories(cache_dir);
    for (const auto& p : profiles) {
        double q_max = default_q_max(cost, p, cfg.lambda, data_sup);
        auto key = table_cache_key(f.name, cost, p.edge_index, p, q_max, cfg.q_count);
        std::string cpath = (cache_dir / ("table_" + std::to_string(key) + ".bin")).string();
        AveragedTable t;
        if (!load_table_cache(t, cpath)) {
            t = tabulate_gbar(f, cost, g, p, q_max, cfg.q_count, 1e-8, cfg.parallel);
            save_table_cache(t, cpath);
        }
        tables.push_back(std::move(t));
    }
    return tables;
}

int cmd_analyze(const ExperimentConfig& cfg) {
    HamiltonianField f = config_field(cfg);
    auto crits = find_critical_points(f);
    std::string path = outpath(cfg, "critical_points.csv");
    write_critical_points_csv(crits, path);
    StructureReport rep = verify_structure(f, f.valid_radius, 4000, cfg.seed);
    std::printf("family=%s critical_points=%zu -> %s\n", f.name.c_str(), crits.size(),
                path.c_str());
    std::printf("structure: hessian C=%.6g (%s)  gradient c=%.6g (%s)  c0=%.6g\n",
                rep.fitted_C, rep.hessian_ok ? "ok" : "VIOLATED", rep.fitted_c,
                rep.gradient_ok ? "ok" : "VIOLATED", rep.fitted_c0);
    return rep.pass() ? 0 : 1;
}

int cmd_flow(const ExperimentConfig& cfg, const std::string& mode, double x1, double x2,
             double horizon, double eps, double h, double nu, int trials) {
    HamiltonianField f = config_field(cfg);
    if (mode == "trace") {
        Trajectory t = integrate(f, {x1, x2}, horizon, 1e-10);
        std::string path = outpath(cfg, "trajectory.csv");
        write_trajectory_csv(t, f, path);
        std::printf("steps=%zu energy_drift=%.3e -> %s\n", t.points.size(),
                    t.energy_drift, path.c_str());
        return 0;
    }
    double c0 = fit_c0_on_region(f, 1e-2, 1.4, 3000);
    TransitResult r = measure_transit(f, eps, h, nu, trials, c0);
    std::string path = outpath(cfg, "transit.csv");
    std::ofstream out(path);
    out << "h,max_transit,bound,ratio,stalled\n"
        << h << "," << r.max_transit << "," << r.bound << "," << r.ratio << ","
        << r.stalled_trials << "\n";
    std::printf("h=%g transit=%.6g bound=%.6g ratio=%.3f stalled=%d -> %s\n", h,
                r.max_transit, r.bound, r.ratio, r.stalled_trials, path.c_str());
    return r.ratio <= 1.0 && r.stalled_trials == 0 ? 0 : 1;
}

int cmd_levelset(const ExperimentConfig& cfg, const std::string& mode, double level) {
    HamiltonianField f = config_field(cfg);
    if (mode == "trace") {
        auto crits = find_critical_points(f);
        auto loops = extract_all_loops(f, level, crits);
        for (const auto& loop : loops) {
            std::string path =
                outpath(cfg, "loop_edge" + std::to_string(loop.edge_index) + ".csv");
            write_loop_csv(loop, path);
            std::printf("edge=%d level=%g length=%.6g -> %s\n", loop.edge_index,
                        loop.level, loop.length(), path.c_str());
        }
        return 0;
    }
    FlowGraph g = build_graph(f, cfg.h0, cfg.cuts);
    GridSpecEdge spec{cfg.profile_count, cfg.innermost_frac};
    auto profiles = tabulate_profiles(f, g, spec, 1e-8, cfg.parallel);
    for (const auto& p : profiles) {
        std::string path =
            outpath(cfg, "profile_edge" + std::to_string(p.edge_index) + ".csv");
        write_profile_csv(p, path);
        std::printf("edge=%d levels=%zu%s -> %s\n", p.edge_index, p.levels.size(),
                    p.truncated ? " (truncated)" : "", path.c_str());
    }
    if (cfg.svg) {
        std::vector<SvgSeries> series;
        for (const auto& p : profiles) {
            SvgSeries s{"T_" + std::to_string(p.edge_index), {}, {}};
            for (std::size_t i = 0; i < p.levels.size(); ++i) {
                s.xs.push_back(std::abs(p.levels[i]));
                s.ys.push_back(p.T[i]);
            }
            series.push_back(std::move(s));
        }
        write_svg_lines(outpath(cfg, "periods.svg"), "T(h)", series, true, true);
    }
    return 0;
}

int cmd_average(const ExperimentConfig& cfg, int edge) {
    HamiltonianField f = config_field(cfg);
    FlowGraph g = build_graph(f, cfg.h0, cfg.cuts);
    if (edge < 0 || edge >= g.n_edges())
        throw std::invalid_argument("edge index out of range");
    auto tables = build_tables(cfg, f, g);
    const AveragedTable& t = tables[edge];
    std::string path = outpath(cfg, "gbar_edge" + std::to_string(edge) + ".csv");
    write_table_csv(t, path);
    MinOverQ m = min_over_q(t, t.levels.front());
    std::printf("edge=%d levels=%zu q_count=%zu min_at_cut=%.6g -> %s\n", edge,
                t.levels.size(), t.q_grid.size(), m.value, path.c_str());
    return 0;
}

int cmd_solve_graph(const ExperimentConfig& cfg) {
    HamiltonianField f = config_field(cfg);
    FlowGraph g = build_graph(f, cfg.h0, cfg.cuts);
    if (static_cast<int>(cfg.data.size()) != g.n_edges())
        throw std::invalid_argument("data length must match edge count");
    auto tables = build_tables(cfg, f, g);
    GraphSolution sol = junction_solve(tables, cfg.lambda, cfg.data);
    for (const auto& e : sol.edges)
        write_edge_csv(e, outpath(cfg, "edge_" + std::to_string(e.edge_index) + ".csv"));
    double d = cfg.d_set ? cfg.d : sol.d;
    AdmissibilityReport rep = check_admissible(tables, cfg.lambda, d, cfg.data);
    std::string rpath = outpath(cfg, "admissibility.txt");
    std::ofstream(rpath) << rep.to_text();
    std::printf("d*=%.9g admissible=%s -> %s\n", sol.d, rep.verdict ? "yes" : "no",
                rpath.c_str());
    return rep.verdict ? 0 : 1;
}

int cmd_solve_eps(const ExperimentConfig& cfg, double eps) {
    HamiltonianField f = config_field(cfg);
    FlowGraph g = build_graph(f, cfg.h0, cfg.cuts);
    if (static_cast<int>(cfg.data.size()) != g.n_edges())
        throw std::invalid_argument("data length must match edge count");
    GridSpec grid = build_grid(f, g, cfg.grid_n);
    write_mask_pgm(grid, outpath(cfg, "mask.pgm"));
    RunningCostSpec cost = RunningCostSpec::parse(cfg.cost);
    fs::create_directories(fs::path(cfg.outdir) / "cache");
    char tag[32];
    std::snprintf(tag, sizeof tag, "%.17g", eps);
    auto key = fnv1a(cfg.key_material() + "|eps=" + tag);
    std::string cpath =
        (fs::path(cfg.outdir) / "cache" / ("field_" + std::to_string(key) + ".bin"))
            .string();
    EpsField field;
    bool hit = load_field_cache(field, cpath);
    if (!hit) {
        field = solve_eps(f, cost, cfg.lambda, eps, grid, cfg.data, cfg.parallel,
                          cfg.eps_tol, 2000000, false, cfg.courant);
        save_field_cache(field, cpath);
    }
    std::string path = outpath(cfg, "field.csv");
    write_field_csv(field, grid, path);
    std::printf("eps=%g sweeps=%d final_update=%.3e cache=%s -> %s\n", eps,
                field.sweeps, field.final_update, hit ? "hit" : "miss", path.c_str());
    return 0;
}

int cmd_converge(const ExperimentConfig& cfg, bool verify_mode) {
    ConvergenceReport rep = run_convergence(cfg);
    std::printf("d*=%.9g collar=%.3g admissible=%s monotone=%s\n", rep.d_star,
                rep.collar, rep.admissible ? "yes" : "no", rep.monotone ? "yes" : "no");
    for (std::size_t i = 0; i < rep.eps.size(); ++i)
        std::printf("eps=%-6g E=%.6g junction=%.6g boundary_layer=%.6g%s\n", rep.eps[i],
                    rep.E[i], rep.junction_err[i], rep.boundary_layer[i],
                    rep.cache_hit[i] ? " (cached)" : "");
    if (!verify_mode) return 0;
    // Verification verdicts over the completed sweep: errors shrink, the
    // configured tuple is admissible, and the junction values at the smallest
    // epsilon sit within the measured error plus the node extrapolation gap.
    // Noise floor: the fixed-point residual amplifies by 1/(lambda dt), so
    // quantities at the floor carry no convergence information.
    double floor_ = 1e3 * cfg.eps_tol;
    double node_gap = 0.0;
    for (const auto& e : rep.graph.edges)
        node_gap = std::max(node_gap, e.node_value_error);
    bool monotone = rep.monotone;
    if (!monotone) {
        monotone = true;
        for (double e : rep.E) monotone = monotone && e < floor_;
    }
    bool sandwich = rep.junction_err.back() <= rep.E.back() + node_gap + floor_;
    int failures = 0;
    auto verdict = [&](const char* name, bool ok) {
        std::printf("%-12s %s\n", name, ok ? "PASS" : "FAIL");
        if (!ok) ++failures;
    };
    verdict("monotone", monotone);
    verdict("admissible", rep.admissible);
    verdict("sandwich", sandwich);
    return failures ? 1 : 0;
}

int cmd_accept(const ExperimentConfig& cfg, const std::string& suite) {
    fs::create_directories(cfg.outdir);
    auto rows = run_acceptance(suite, std::cout, cfg.outdir);
    write_acceptance_csv(rows, outpath(cfg, "acceptance.csv"));
    int failed = 0;
    for (const auto& r : rows)
        if (!r.pass) ++failed;
    std::printf("%s%d/%zu criteria passed\n", failed ? "FAILED: " : "OK: ",
                static_cast<int>(rows.size()) - failed, rows.size());
    return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"averaged Hamilton-Jacobi toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string flow_mode = "trace", ls_mode = "trace", suite = "all";
    double x1 = 0.5, x2 = 0.0, horizon = 10.0;
    double transit_eps = 0.05, transit_h = 1e-3, transit_nu = 0.3;
    int trials = 32, edge = 0;
    double level = 0.1, eps_single = 0.4;

    auto* analyze = app.add_subcommand("analyze", "critical-point and growth report");
    auto* flow = app.add_subcommand("flow", "Hamiltonian flow trajectories");
    flow->add_option("mode", flow_mode, "trace|transit")
        ->check(CLI::IsMember({"trace", "transit"}));
    flow->add_option("--start-x1", x1, "trace start");
    flow->add_option("--start-x2", x2, "trace start");
    flow->add_option("--horizon", horizon, "trace time horizon");
    flow->add_option("--transit-eps", transit_eps, "perturbed flow epsilon");
    flow->add_option("--band", transit_h, "transit band half-width h");
    flow->add_option("--nu", transit_nu, "normal drift magnitude");
    flow->add_option("--trials", trials, "transit starts per side");
    auto* levelset = app.add_subcommand("levelset", "level-set loops and profiles");
    levelset->add_option("mode", ls_mode, "trace|profiles")
        ->check(CLI::IsMember({"trace", "profiles"}));
    levelset->add_option("--level", level, "level for trace mode");
    auto* average = app.add_subcommand("average", "averaged Hamiltonian table");
    average->add_option("--edge", edge, "edge index");
    auto* solve_graph = app.add_subcommand("solve-graph", "junction problem on the graph");
    auto* solve_eps = app.add_subcommand("solve-eps", "planar problem at one epsilon");
    auto* converge = app.add_subcommand("converge", "full convergence sweep");
    auto* verify = app.add_subcommand("verify", "convergence sweep plus verdicts");
    auto* accept = app.add_subcommand("accept", "acceptance criteria");
    accept->add_option("--suite", suite, "all|geometry|A1..A11");

    for (CLI::App* c : {analyze, flow, levelset, average, solve_graph, solve_eps,
                        converge, verify, accept})
        add_common(c, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = resolve(opts);
        fs::create_directories(cfg.outdir);
        OutputLock lock(cfg.outdir);
        if (analyze->parsed()) return cmd_analyze(cfg);
        if (flow->parsed())
            return cmd_flow(cfg, flow_mode, x1, x2, horizon, transit_eps, transit_h,
                            transit_nu, trials);
        if (levelset->parsed()) return cmd_levelset(cfg, ls_mode, level);
        if (average->parsed()) return cmd_average(cfg, edge);
        if (solve_graph->parsed()) return cmd_solve_graph(cfg);
        if (solve_eps->parsed()) {
            eps_single = cfg.eps_list.empty() ? eps_single : cfg.eps_list.front();
            return cmd_solve_eps(cfg, eps_single);
        }
        if (converge->parsed()) return cmd_converge(cfg, false);
        if (verify->parsed()) return cmd_converge(cfg, true);
        if (accept->parsed()) return cmd_accept(cfg, suite);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

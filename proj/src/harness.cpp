#include "hj/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hj/levelset.hpp"

namespace hj {

namespace {

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: not a boolean: " + v);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
    ExperimentConfig c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value, got: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "hamiltonian")
            c.hamiltonian = val;
        else if (key == "n_param")
            c.n_param = std::stoi(val);
        else if (key == "h0")
            c.h0 = std::stod(val);
        else if (key == "cuts")
            c.cuts = parse_list(val);
        else if (key == "cost")
            c.cost = val;
        else if (key == "lambda")
            c.lambda = std::stod(val);
        else if (key == "data")
            c.data = parse_list(val);
        else if (key == "d") {
            c.d = std::stod(val);
            c.d_set = true;
        } else if (key == "eps")
            c.eps_list = parse_list(val);
        else if (key == "grid")
            c.grid_n = std::stoi(val);
        else if (key == "profile_count")
            c.profile_count = std::stoi(val);
        else if (key == "innermost_frac")
            c.innermost_frac = std::stod(val);
        else if (key == "q_count")
            c.q_count = std::stoi(val);
        else if (key == "outdir")
            c.outdir = val;
        else if (key == "seed")
            c.seed = std::stoul(val);
        else if (key == "svg")
            c.svg = parse_bool(val);
        else if (key == "parallel")
            c.parallel = parse_bool(val);
        else if (key == "exploratory")
            c.exploratory = parse_bool(val);
        else if (key == "eps_tol")
            c.eps_tol = std::stod(val);
        else if (key == "courant")
            c.courant = std::stod(val);
        else
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": unknown key: " + key);
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

std::string ExperimentConfig::key_material() const {
    char buf[64];
    std::string s = hamiltonian + "|" + std::to_string(n_param) + "|" + cost + "|";
    auto add = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g,", v);
        s += buf;
    };
    add(h0);
    for (double v : cuts) add(v);
    s += "|";
    add(lambda);
    for (double v : data) add(v);
    s += "|";
    s += std::to_string(grid_n) + "," + std::to_string(profile_count) + "," +
         std::to_string(q_count) + "|";
    add(innermost_frac);
    add(eps_tol);
    add(courant);
    s += std::to_string(seed);
    return s;
}

HamiltonianField config_field(const ExperimentConfig& cfg) {
    std::string fam = cfg.hamiltonian;
    int n = cfg.n_param;
    std::size_t colon = fam.find(':');
    if (colon != std::string::npos) {
        n = std::stoi(fam.substr(colon + 1));
        fam = fam.substr(0, colon);
    }
    return make_hamiltonian(fam, n);
}

unsigned long long fnv1a(const std::string& s) {
    unsigned long long h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

PowerLawFit fit_powerlaw(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 4 || xs.size() != ys.size())
        throw std::invalid_argument("fit_powerlaw: need >= 4 matched points");
    bool inc = xs[1] > xs[0];
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        if (xs[i] <= 0.0 || ys[i] <= 0.0)
            throw std::invalid_argument("fit_powerlaw: data must be positive");
        if ((xs[i + 1] > xs[i]) != inc || xs[i + 1] == xs[i])
            throw std::invalid_argument("fit_powerlaw: xs must be strictly monotone");
    }
    if (ys.back() <= 0.0 || xs.back() <= 0.0)
        throw std::invalid_argument("fit_powerlaw: data must be positive");
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double denom = n * sxx - sx * sx;
    PowerLawFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = std::log(ys[i]) - (fit.intercept + fit.slope * std::log(xs[i]));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

OutputLock::OutputLock(const std::string& dir) {
    std::filesystem::create_directories(dir);
    path_ = dir + "/.lock";
    if (std::filesystem::exists(path_))
        throw std::runtime_error("output directory is locked by another run: " + path_);
    std::ofstream out(path_);
    if (!out) throw std::runtime_error("cannot create lock file: " + path_);
    out << "locked\n";
}

OutputLock::~OutputLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

void write_svg_lines(const std::string& path, const std::string& title,
                     const std::vector<SvgSeries>& series, bool logx, bool logy) {
    const int W = 640, H = 480, ML = 70, MR = 20, MT = 40, MB = 50;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    auto tx = [&](double v) { return logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return logy ? std::log10(v) : v; };
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            x0 = std::min(x0, tx(s.xs[i]));
            x1 = std::max(x1, tx(s.xs[i]));
            y0 = std::min(y0, ty(s.ys[i]));
            y1 = std::max(y1, ty(s.ys[i]));
        }
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= y0) y1 = y0 + 1.0;
    auto px = [&](double v) { return ML + (tx(v) - x0) / (x1 - x0) * (W - ML - MR); };
    auto py = [&](double v) { return H - MB - (ty(v) - y0) / (y1 - y0) * (H - MT - MB); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ofstream out(path);
    out.precision(6);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
        << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    out << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR
        << "\" y2=\"" << H - MB << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\""
        << H - MB << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        double fx = x0 + k * (x1 - x0) / 4.0;
        double fy = y0 + k * (y1 - y0) / 4.0;
        double vx = logx ? std::pow(10.0, fx) : fx;
        double vy = logy ? std::pow(10.0, fy) : fy;
        out << "<text x=\"" << ML + k * (W - ML - MR) / 4.0 << "\" y=\"" << H - MB + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << vx << "</text>\n";
        out << "<text x=\"" << ML - 6 << "\" y=\""
            << H - MB - k * (H - MT - MB) / 4.0 + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << vy << "</text>\n";
    }
    int ci = 0;
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << colors[ci % 5]
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.xs.size(); ++i)
            out << px(s.xs[i]) << ',' << py(s.ys[i]) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << W - MR - 6 << "\" y=\"" << MT + 16 * (ci + 1)
            << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << colors[ci % 5]
            << "\">" << s.name << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
}

namespace {

std::string hex_key(unsigned long long k) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", k);
    return buf;
}

}  // namespace

ConvergenceReport run_convergence(const ExperimentConfig& cfg) {
    ConvergenceReport rep;
    for (std::size_t i = 0; i + 1 < cfg.eps_list.size(); ++i)
        if (cfg.eps_list[i + 1] >= cfg.eps_list[i])
            throw std::invalid_argument("run_convergence: eps list must be decreasing");
    auto stage = [](const std::string& name, auto&& body) -> decltype(body()) {
        try {
            return body();
        } catch (const std::exception& e) {
            throw std::runtime_error("stage " + name + ": " + e.what());
        }
    };

    HamiltonianField field = stage("field", [&] { return config_field(cfg); });
    RunningCostSpec cost = stage("cost", [&] { return RunningCostSpec::parse(cfg.cost); });
    FlowGraph graph =
        stage("graph", [&] { return build_graph(field, cfg.h0, cfg.cuts); });
    const int n_edges = graph.n_edges();
    std::vector<double> data = cfg.data;
    if (data.empty()) data.assign(n_edges, 0.0);
    if (static_cast<int>(data.size()) != n_edges)
        throw std::invalid_argument("run_convergence: data size != edge count");

    GridSpecEdge espec{cfg.profile_count, cfg.innermost_frac};
    std::vector<EdgeProfile> profiles = stage("profiles", [&] {
        return tabulate_profiles(field, graph, espec, 1e-8, cfg.parallel);
    });

    double data_sup = 0.0;
    for (double v : data) data_sup = std::max(data_sup, std::abs(v));
    std::filesystem::create_directories(cfg.outdir + "/cache");
    std::vector<AveragedTable> tables(n_edges);
    stage("tables", [&] {
        for (int e = 0; e < n_edges; ++e) {
            double q_max = default_q_max(cost, profiles[e], cfg.lambda, data_sup);
            std::string cpath =
                cfg.outdir + "/cache/table_" +
                hex_key(table_cache_key(field.name, cost, e, profiles[e], q_max,
                                        cfg.q_count)) +
                ".bin";
            if (!load_table_cache(tables[e], cpath)) {
                tables[e] = tabulate_gbar(field, cost, graph, profiles[e], q_max,
                                          cfg.q_count, 1e-8, cfg.parallel);
                save_table_cache(tables[e], cpath);
            }
        }
        return 0;
    });

    rep.graph = stage("graph_solve",
                      [&] { return junction_solve(tables, cfg.lambda, data); });
    rep.d_star = rep.graph.d;
    AdmissibilityReport adm = stage("admissibility", [&] {
        return check_admissible(tables, cfg.lambda, cfg.d_set ? cfg.d : rep.graph.d,
                                data);
    });
    rep.admissible = adm.verdict;
    if (!adm.verdict && !cfg.exploratory)
        throw std::runtime_error(
            "stage admissibility: boundary tuple rejected (set exploratory=1 to force)\n" +
            adm.to_text());

    GridSpec grid =
        stage("mask", [&] { return build_grid(field, graph, cfg.grid_n); });
    const double spacing = std::min(grid.dx(), grid.dy());

    // collar per edge: the innermost tabulated level, below which the graph
    // solution is extrapolated rather than solved
    std::vector<double> collar(n_edges, 0.0);
    for (int e = 0; e < n_edges; ++e) {
        collar[e] = std::abs(profiles[e].levels.back());
        rep.collar = std::max(rep.collar, collar[e]);
    }

    const int total = grid.nx * grid.ny;
    for (double epsv : cfg.eps_list) {
        std::string fpath = cfg.outdir + "/cache/field_" +
                            hex_key(fnv1a(cfg.key_material() + "|eps=" +
                                          std::to_string(epsv))) +
                            ".bin";
        EpsField u;
        auto t0 = std::chrono::steady_clock::now();
        bool hit = load_field_cache(u, fpath) &&
                   static_cast<int>(u.u.size()) == total && u.epsilon == epsv;
        if (!hit) {
            u = stage("eps_solve", [&] {
                return solve_eps(field, cost, cfg.lambda, epsv, grid, data,
                                 cfg.parallel, cfg.eps_tol, 2000000, false,
                                 cfg.courant);
            });
            save_field_cache(u, fpath);
        }
        auto t1 = std::chrono::steady_clock::now();

        double E = 0.0, junc = 0.0, blayer = 0.0;
        std::vector<double> region(n_edges, 0.0);
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) {
                int t = grid.idx(i, j);
                if (grid.kind[t] != CellKind::Interior) continue;
                int e = grid.label[t];
                double h = grid.hval[t];
                Vec2 x = grid.point(i, j);
                if (std::abs(h) > collar[e]) {
                    double err = std::abs(u.u[t] - rep.graph.edges[e].value_at(h));
                    E = std::max(E, err);
                    region[e] = std::max(region[e], err);
                }
                double gn = field.gradient(x).norm();
                if (std::abs(h) <= 2.0 * spacing * std::max(gn, 1e-9)) {
                    junc = std::max(junc, std::abs(u.u[t] - rep.d_star));
                    rep.junction_band = std::max(rep.junction_band, std::abs(h));
                }
                const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    int ni = i + di[k], nj = j + dj[k];
                    if (ni < 0 || ni >= grid.nx || nj < 0 || nj >= grid.ny) continue;
                    if (grid.kind[grid.idx(ni, nj)] == CellKind::Band) {
                        blayer = std::max(blayer, std::abs(u.u[t] - data[e]));
                        break;
                    }
                }
            }
        rep.eps.push_back(epsv);
        rep.E.push_back(E);
        rep.junction_err.push_back(junc);
        rep.boundary_layer.push_back(blayer);
        rep.region_err.push_back(region);
        rep.cache_hit.push_back(hit);
        rep.runtime_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    rep.monotone = true;
    for (std::size_t i = 0; i + 1 < rep.E.size(); ++i)
        if (rep.E[i + 1] >= rep.E[i]) rep.monotone = false;

    // runtimes vary run to run, so they live in a separate file and the main
    // CSV stays bit-identical for a fixed config
    std::ofstream out(cfg.outdir + "/convergence.csv");
    out << "eps,E,junction_err,boundary_layer";
    for (int e = 0; e < n_edges; ++e) out << ",region_err_" << e;
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < rep.eps.size(); ++i) {
        out << rep.eps[i] << ',' << rep.E[i] << ',' << rep.junction_err[i] << ','
            << rep.boundary_layer[i];
        for (int e = 0; e < n_edges; ++e) out << ',' << rep.region_err[i][e];
        out << "\n";
    }
    std::ofstream rout(cfg.outdir + "/runtimes.csv");
    rout << "eps,runtime_s,cache_hit\n";
    for (std::size_t i = 0; i < rep.eps.size(); ++i)
        rout << rep.eps[i] << ',' << rep.runtime_s[i] << ','
             << (rep.cache_hit[i] ? 1 : 0) << "\n";
    for (int e = 0; e < n_edges; ++e)
        write_edge_csv(rep.graph.edges[e],
                       cfg.outdir + "/edge_" + std::to_string(e) + ".csv");
    if (cfg.svg) {
        write_svg_lines(cfg.outdir + "/convergence.svg", "E(eps)",
                        {{"E", rep.eps, rep.E}}, true, true);
    }
    return rep;
}

}  // namespace hj

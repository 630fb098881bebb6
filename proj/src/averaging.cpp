#include "hj/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hj/rk45.hpp"
#include "hj/flow.hpp"

namespace hj {

double RunningCostSpec::operator()(Vec2 x, Vec2 p) const {
    switch (kind) {
        case CostKind::Quadratic: return 0.5 * p.norm2() - (f ? f(x) : 0.0);
        case CostKind::Eikonal: return p.norm() - (f ? f(x) : 0.0);
        case CostKind::Constant: return c;
        case CostKind::Norm: return p.norm();
    }
    return 0.0;
}

double RunningCostSpec::at_origin() const {
    switch (kind) {
        case CostKind::Quadratic: return -(f ? f(Vec2{0, 0}) : 0.0);
        case CostKind::Eikonal: return -(f ? f(Vec2{0, 0}) : 0.0);
        case CostKind::Constant: return c;
        case CostKind::Norm: return 0.0;
    }
    return 0.0;
}

RunningCostSpec RunningCostSpec::quadratic(std::function<double(Vec2)> f) {
    RunningCostSpec s;
    s.kind = CostKind::Quadratic;
    s.f = std::move(f);
    s.nu = 1.0;
    s.M = 0.5;  // |p|^2/2 >= |p| - 1/2; spatial term shifts M at the call site
    return s;
}

RunningCostSpec RunningCostSpec::eikonal(std::function<double(Vec2)> f) {
    RunningCostSpec s;
    s.kind = CostKind::Eikonal;
    s.f = std::move(f);
    s.nu = 1.0;
    s.M = 0.0;
    return s;
}

RunningCostSpec RunningCostSpec::constant(double c) {
    RunningCostSpec s;
    s.kind = CostKind::Constant;
    s.c = c;
    s.nu = 0.0;  // test-only form, not coercive
    s.M = -c;
    return s;
}

RunningCostSpec RunningCostSpec::norm() {
    RunningCostSpec s;
    s.kind = CostKind::Norm;
    s.nu = 1.0;
    s.M = 0.0;
    return s;
}

RunningCostSpec RunningCostSpec::parse(const std::string& text) {
    auto colon = text.find(':');
    std::string head = text.substr(0, colon);
    std::string arg = (colon == std::string::npos) ? "" : text.substr(colon + 1);
    auto spatial = [&]() -> std::function<double(Vec2)> {
        if (arg.empty() || arg == "zero") return nullptr;
        if (arg == "x1") return [](Vec2 x) { return x.x; };
        if (arg == "x2") return [](Vec2 x) { return x.y; };
        if (arg == "r2") return [](Vec2 x) { return x.norm2(); };
        throw std::invalid_argument("unknown cost spatial term: " + arg);
    };
    if (head == "const") return constant(std::stod(arg));
    if (head == "norm") return norm();
    if (head == "quad") return quadratic(spatial());
    if (head == "eik") return eikonal(spatial());
    throw std::invalid_argument("unknown cost spec: " + text);
}

namespace {

// Loop sums that determine Gbar(h, .) for every builtin cost in closed form:
//   Quadratic: (q^2/2 * S - F) / T   Eikonal: (|q| L - F) / T
//   Norm:      |q| L / T             Constant: c
// with S = integral |DH| dl, F = integral f/|DH| dl.
struct LoopCostSums {
    double L = 0.0, T = 0.0, S = 0.0, F = 0.0;
};

LoopCostSums cost_sums(const LoopQuadrature& quad, const RunningCostSpec& cost) {
    LoopCostSums s;
    s.L = quad.length;
    s.T = quad.period;
    for (std::size_t i = 0; i < quad.points.size(); ++i) {
        s.S += quad.weights[i] * quad.grad_norm[i];
        if (cost.f) s.F += quad.weights[i] * cost.f(quad.points[i]) / quad.grad_norm[i];
    }
    return s;
}

double gbar_from_sums(const LoopCostSums& s, const RunningCostSpec& cost, double q) {
    switch (cost.kind) {
        case CostKind::Quadratic: return (0.5 * q * q * s.S - s.F) / s.T;
        case CostKind::Eikonal: return (std::abs(q) * s.L - s.F) / s.T;
        case CostKind::Constant: return cost.c;
        case CostKind::Norm: return std::abs(q) * s.L / s.T;
    }
    return 0.0;
}

}  // namespace

double averaged_g(const HamiltonianField& f, const RunningCostSpec& cost,
                  const LevelLoop& loop, double q, double T) {
    LoopQuadrature quad = build_loop_quadrature(loop, f);
    if (T <= 0.0) T = quad.period;
    double num = quad.integrate([&](Vec2 x) {
        Vec2 g = f.gradient(x);
        double gn = g.norm();
        if (gn < 1e-12) throw std::runtime_error("averaged_g: |DH| underflow");
        return cost(x, g * q) / gn;
    });
    return num / T;
}

double averaged_g_time_route(const HamiltonianField& f, const RunningCostSpec& cost,
                             Vec2 x_on_loop, double q, double tol) {
    double T = measure_period(f, x_on_loop, tol);
    // augmented flow: (x, a)' = (b(x), G(x, q DH(x)))
    auto rhs = [&](double, const StateVec<3>& y) -> StateVec<3> {
        Vec2 x{y[0], y[1]};
        Vec2 b = f.drift(x);
        return {b.x, b.y, cost(x, f.gradient(x) * q)};
    };
    auto res = rk45_integrate<3>(rhs, 0.0, T, {x_on_loop.x, x_on_loop.y, 0.0}, tol, tol,
                                 [](double, const StateVec<3>&) { return true; });
    return res.state[2] / T;
}

double AveragedTable::row_value(int h_idx, double q) const {
    const auto& row = values[h_idx];
    const double q0 = q_grid.front(), q1 = q_grid.back();
    if (q <= q0 || q >= q1) {
        if (q < q0 || q > q1) q_clipped = true;
        // extend the boundary slope so queries outside stay convex and coercive
        if (q < q0) {
            double s = (row[1] - row[0]) / (q_grid[1] - q_grid[0]);
            return row[0] + s * (q - q0);
        }
        std::size_t n = row.size();
        double s = (row[n - 1] - row[n - 2]) / (q_grid[n - 1] - q_grid[n - 2]);
        return row[n - 1] + s * (q - q1);
    }
    double t = (q - q0) / (q_grid[1] - q_grid[0]);
    std::size_t j = std::min(static_cast<std::size_t>(t), q_grid.size() - 2);
    double frac = t - static_cast<double>(j);
    return row[j] * (1.0 - frac) + row[j + 1] * frac;
}

double AveragedTable::row_min(int h_idx, double& argmin) const {
    const auto& row = values[h_idx];
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] < row[best]) best = j;
    argmin = q_grid[best];
    return row[best];
}

namespace {

// Fritsch-Carlson monotone cubic interpolation over a small window.
double monotone_cubic(const std::vector<double>& xs, const std::vector<double>& ys,
                      double x) {
    std::size_t n = xs.size();
    if (n == 1) return ys[0];
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    std::size_t i = 0;
    while (i + 2 < n && xs[i + 1] < x) ++i;
    double h = xs[i + 1] - xs[i];
    double d = (ys[i + 1] - ys[i]) / h;
    auto slope = [&](std::size_t k) -> double {
        if (k == 0) return (ys[1] - ys[0]) / (xs[1] - xs[0]);
        if (k == n - 1) return (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
        double d0 = (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1]);
        double d1 = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
        if (d0 * d1 <= 0.0) return 0.0;
        return 2.0 * d0 * d1 / (d0 + d1);  // harmonic mean limits overshoot
    };
    double m0 = slope(i), m1 = slope(i + 1);
    if (d != 0.0) {
        double a = m0 / d, b = m1 / d;
        double s = a * a + b * b;
        if (s > 9.0) {
            double tau = 3.0 / std::sqrt(s);
            m0 = tau * a * d;
            m1 = tau * b * d;
        }
    } else {
        m0 = m1 = 0.0;
    }
    double t = (x - xs[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    return ys[i] * (2 * t3 - 3 * t2 + 1) + h * m0 * (t3 - 2 * t2 + t) +
           ys[i + 1] * (-2 * t3 + 3 * t2) + h * m1 * (t3 - t2);
}

}  // namespace

double AveragedTable::value(double h, double q) const {
    // levels run from the cut toward 0; build ascending |h| ordering locally
    std::vector<double> xs(levels.size()), ys(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
        std::size_t j = levels.size() - 1 - i;  // ascending |h|
        xs[i] = std::abs(levels[j]);
        ys[i] = row_value(static_cast<int>(j), q);
    }
    return monotone_cubic(xs, ys, std::abs(h));
}

AveragedTable tabulate_gbar(const HamiltonianField& f, const RunningCostSpec& cost,
                            const FlowGraph& g, const EdgeProfile& profile,
                            double q_max, int q_count, double trace_tol, bool parallel) {
    AveragedTable table;
    table.edge_index = profile.edge_index;
    table.levels = profile.levels;
    table.L = profile.L;
    table.T = profile.T;
    table.q_grid.resize(q_count);
    for (int j = 0; j < q_count; ++j)
        table.q_grid[j] = -q_max + 2.0 * q_max * j / (q_count - 1);
    table.values.assign(profile.levels.size(), std::vector<double>(q_count, 0.0));

    int n_levels = static_cast<int>(profile.levels.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int k = 0; k < n_levels; ++k) {
        LevelLoop loop = edge_loop(f, g, profile.edge_index, profile.levels[k], trace_tol);
        LoopQuadrature quad = build_loop_quadrature(loop, f);
        LoopCostSums sums = cost_sums(quad, cost);
        // L and T from the same quadrature as the rows, so cross-row
        // identities hold to roundoff
        table.L[k] = sums.L;
        table.T[k] = sums.T;
        for (int j = 0; j < q_count; ++j)
            table.values[k][j] = gbar_from_sums(sums, cost, table.q_grid[j]);
    }

    if (cost.nu > 0.0) {
        for (int k = 0; k < n_levels; ++k) {
            double lo = table.values[k].front(), hi = table.values[k].back();
            double mid = table.row_value(k, 0.0);
            if (lo < mid + 1.0 || hi < mid + 1.0)
                throw std::runtime_error(
                    "tabulate_gbar: q_max too small, row minimum may touch the boundary at h = " +
                    std::to_string(profile.levels[k]));
        }
    }
    return table;
}

double default_q_max(const RunningCostSpec& cost, const EdgeProfile& profile,
                     double lambda, double data_sup) {
    double max_t_over_l = 0.0;
    for (std::size_t i = 0; i < profile.T.size(); ++i)
        max_t_over_l = std::max(max_t_over_l, profile.T[i] / profile.L[i]);
    return 8.0 * (cost.M + lambda * data_sup + 1.0) * max_t_over_l;
}

MinOverQ min_over_q(const AveragedTable& table, double h) {
    // locate nearest tabulated level (rows are exact PL minima)
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.levels.size(); ++i)
        if (std::abs(std::abs(table.levels[i]) - std::abs(h)) <
            std::abs(std::abs(table.levels[best]) - std::abs(h)))
            best = i;
    MinOverQ r;
    r.value = table.row_min(static_cast<int>(best), r.argmin);
    return r;
}

void write_table_csv(const AveragedTable& t, const std::string& path) {
    std::ofstream out(path);
    out << "h,q,value\n";
    out.precision(17);
    for (std::size_t i = 0; i < t.levels.size(); ++i)
        for (std::size_t j = 0; j < t.q_grid.size(); ++j)
            out << t.levels[i] << ',' << t.q_grid[j] << ',' << t.values[i][j] << '\n';
}

namespace {

constexpr std::uint64_t kCacheMagic = 0x484a47424152ull;  // "HJGBAR"

void hash_mix(unsigned long long& h, const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;  // FNV-1a
    }
}

}  // namespace

unsigned long long table_cache_key(const std::string& field_name,
                                   const RunningCostSpec& cost, int edge,
                                   const EdgeProfile& profile, double q_max, int q_count) {
    unsigned long long h = 1469598103934665603ull;
    hash_mix(h, field_name.data(), field_name.size());
    int kind = static_cast<int>(cost.kind);
    hash_mix(h, &kind, sizeof kind);
    hash_mix(h, &cost.c, sizeof cost.c);
    hash_mix(h, &edge, sizeof edge);
    hash_mix(h, &q_max, sizeof q_max);
    hash_mix(h, &q_count, sizeof q_count);
    for (double v : profile.levels) hash_mix(h, &v, sizeof v);
    return h;
}

bool save_table_cache(const AveragedTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    auto put = [&](const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    };
    put(&kCacheMagic, sizeof kCacheMagic);
    std::uint64_t nh = t.levels.size(), nq = t.q_grid.size();
    std::int64_t edge = t.edge_index;
    put(&edge, sizeof edge);
    put(&nh, sizeof nh);
    put(&nq, sizeof nq);
    put(t.levels.data(), nh * sizeof(double));
    put(t.L.data(), nh * sizeof(double));
    put(t.T.data(), nh * sizeof(double));
    put(t.q_grid.data(), nq * sizeof(double));
    for (const auto& row : t.values) put(row.data(), nq * sizeof(double));
    return static_cast<bool>(out);
}

bool load_table_cache(AveragedTable& t, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    auto get = [&](void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    };
    std::uint64_t magic = 0, nh = 0, nq = 0;
    std::int64_t edge = 0;
    get(&magic, sizeof magic);
    if (magic != kCacheMagic) return false;
    get(&edge, sizeof edge);
    get(&nh, sizeof nh);
    get(&nq, sizeof nq);
    if (!in || nh == 0 || nq == 0 || nh > 1u << 20 || nq > 1u << 20) return false;
    t.edge_index = static_cast<int>(edge);
    t.levels.resize(nh);
    t.L.resize(nh);
    t.T.resize(nh);
    t.q_grid.resize(nq);
    get(t.levels.data(), nh * sizeof(double));
    get(t.L.data(), nh * sizeof(double));
    get(t.T.data(), nh * sizeof(double));
    get(t.q_grid.data(), nq * sizeof(double));
    t.values.assign(nh, std::vector<double>(nq));
    for (auto& row : t.values) get(row.data(), nq * sizeof(double));
    return static_cast<bool>(in);
}

}  // namespace hj

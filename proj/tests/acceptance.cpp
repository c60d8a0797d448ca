// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include "locus/locus.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

using namespace locus;
using namespace locus::bench;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

const auto &kDims = locus::bench::detail::kHighDims;

int failures = 0;

void report(int id, const char *name, bool pass, const std::string &detail) {
    std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

std::string fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const ScenarioRow &find_row(const BenchReport &rep, const std::string &function, Method m, std::size_t N) {
    for (const auto &r : rep.rows) {
        if (r.function == function && r.method == m && r.predictors + 1 == N) {
            return r;
        }
    }
    throw std::runtime_error("missing benchmark row " + function);
}

/// Stencil patch around a random node for an arbitrary function: r, r +- e_i, r + 2 e_i.
struct Patch {
    TrainingSet ts;
    MeshIndex mesh;
    std::vector<double> query;
};

Patch make_patch(std::size_t n, const std::function<double(std::span<const double>)> &f, Rng &rng) {
    const auto nodes = uniform_nodes(20, {0.0, 1.0});
    MeshIndex mesh(std::vector<std::vector<double>>(n, nodes), 0.0);
    std::uniform_int_distribution<std::uint32_t> pick(1, 16);
    std::uniform_real_distribution<double> off(0.3, 0.5);
    GridIndex r(n);
    std::vector<double> q(n);
    for (std::size_t a = 0; a < n; ++a) {
        r[a] = pick(rng);
        q[a] = nodes[r[a]] + off(rng) * (nodes[r[a] + 1] - nodes[r[a]]);
    }
    std::vector<double> coords;
    std::vector<double> ys;
    std::vector<double> x(n);
    auto add = [&](const GridIndex &g) {
        for (std::size_t a = 0; a < n; ++a) {
            x[a] = nodes[g[a]];
        }
        coords.insert(coords.end(), x.begin(), x.end());
        ys.push_back(f(x));
        mesh.insert(g, ys.size() - 1);
    };
    add(r);
    GridIndex g = r;
    for (std::size_t a = 0; a < n; ++a) {
        for (int step : {-1, 1, 2}) {
            g[a] = static_cast<std::uint32_t>(static_cast<int>(r[a]) + step);
            add(g);
        }
        g[a] = r[a];
    }
    return {TrainingSet::from_flat(n, 1, std::move(coords), std::move(ys)), std::move(mesh), std::move(q)};
}

void hyperplane_exactness() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    Rng rng = make_rng(101);
    std::normal_distribution<double> g;
    for (std::size_t n : {2u, 10u, 50u, 100u}) {
        std::vector<double> coef(n);
        for (auto &c : coef) {
            c = g(rng);
        }
        const double c0 = g(rng);
        auto f = [&](std::span<const double> x) {
            double y = c0;
            for (std::size_t a = 0; a < n; ++a) {
                y += coef[a] * x[a];
            }
            return y;
        };
        for (int k = 0; k < 1000; ++k) {
            const Patch p = make_patch(n, f, rng);
            const double truth = f(p.query);
            const double scale = std::max(1.0, std::abs(truth));
            const double eg = evaluate_gradient(p.ts, &p.mesh, p.query).value;
            const double es = evaluate_smooth(p.ts, p.mesh, p.query).value;
            worst = std::max({worst, std::abs(eg - truth) / scale, std::abs(es - truth) / scale});
        }
    }
    const double t = seconds_since(t0);
    report(1, "hyperplane exactness", worst <= 1e-9 && t < 10.0, fmt("max_rel_err=%.3g (<=1e-9), time=%.2fs (<10s)", worst, t));
}

void table1() {
    const auto t0 = Clock::now();
    const auto rep = run_benchmark(Table::T1, Scale::Small, 1);
    const double t = seconds_since(t0);
    const double a = rep.rows.at(0).stats.rel_err;
    const double b = rep.rows.at(1).stats.rel_err;
    auto within2 = [](double v, double ref) { return v >= ref / 2.0 && v <= ref * 2.0; };
    const bool pass = within2(a, 0.079) && within2(b, 0.0551) && b < a && t < 30.0;
    report(2, "Table 1 density trend", pass,
           fmt("rel_err 20^3=%.4f (0.079 x/2), 29^3=%.4f (0.0551 x/2), decreasing=%d, time=%.1fs (<30s)", a, b, b < a, t));
}

void table2() {
    const auto t0 = Clock::now();
    const auto rep = run_benchmark(Table::T2, Scale::Small, 1);
    const double t = seconds_since(t0);
    const double s1 = *find_row(rep, "S1", Method::Smooth, 4).ratio_to_gradient;
    const double s2 = *find_row(rep, "S2", Method::Smooth, 4).ratio_to_gradient;
    const double t1 = *find_row(rep, "T1", Method::Smooth, 4).ratio_to_gradient;
    const bool pass = s1 <= 0.01 && s2 <= 0.01 && t1 <= 0.6 && t < 60.0;
    report(3, "Table 2 smooth vs gradient", pass,
           fmt("ratio S1=%.4g (<=0.01), S2=%.4g (<=0.01), T1=%.3f (<=0.6), time=%.1fs (<60s)", s1, s2, t1, t));
}

void table3() {
    const auto t0 = Clock::now();
    const auto rep = run_benchmark(Table::T3, Scale::Small, 1);
    const double t = seconds_since(t0);
    bool pass = t < 300.0;
    std::string detail;
    for (const char *fn : {"H1", "H2"}) {
        const double growth = find_row(rep, fn, Method::Smooth, 100).stats.rel_err /
                              find_row(rep, fn, Method::Smooth, 10).stats.rel_err;
        double min_gain = 1e300;
        for (std::size_t N : kDims) {
            min_gain = std::min(min_gain, 1.0 / *find_row(rep, fn, Method::Smooth, N).ratio_to_gradient);
        }
        pass = pass && growth <= 4.0 && min_gain >= 50.0;
        detail += fmt("%s growth=%.2f (<=4), min gain=%.0fx (>=50); ", fn, growth, min_gain);
    }
    report(4, "Table 3 dimension scaling", pass, detail + fmt("time=%.1fs (<300s)", t));
}

void table4() {
    const auto t0 = Clock::now();
    const auto rep = run_benchmark(Table::T4, Scale::Small, 1);
    const double t = seconds_since(t0);
    const double paper[] = {0.31, 0.11, 0.058, 0.032};
    bool pass = t < 300.0;
    std::string detail = "R1";
    std::vector<double> r1;
    for (std::size_t k = 0; k < kDims.size(); ++k) {
        const double v = find_row(rep, "H1", Method::Smooth, kDims[k]).noise_ratios->R1;
        r1.push_back(v);
        pass = pass && v >= paper[k] / 2.0 && v <= paper[k] * 2.0;
        detail += fmt(" N=%zu:%.3f(%.3g)", kDims[k], v, paper[k]);
    }
    const double ratio = r1.front() / r1.back();
    pass = pass && ratio >= 5.0 && ratio <= 20.0;
    report(5, "Table 4 noise ratios", pass, detail + fmt(", R1(10)/R1(100)=%.2f ([5,20]), time=%.1fs (<300s)", ratio, t));
}

void averaging() {
    const auto t0 = Clock::now();
    const auto rep = run_benchmark(Table::Averaging, Scale::Small, 1);
    const double t = seconds_since(t0);
    const double slope = rep.summary.at(0).second;
    std::string errs;
    for (const auto &r : rep.rows) {
        errs += fmt(" C=%zu:%.4f", r.combinations, r.stats.avg_abs_err);
    }
    report(6, "combination averaging", slope >= -0.7 && slope <= -0.3 && t < 120.0,
           fmt("slope=%.3f ([-0.7,-0.3]),", slope) + errs + fmt(", time=%.1fs (<120s)", t));
}

void newton_behavior() {
    std::size_t problems = 0;
    std::size_t fast = 0;
    std::size_t accurate = 0;
    double worst = 0.0;
    int seed = 0;
    for (FunctionId id : {FunctionId::T1, FunctionId::S1, FunctionId::S2, FunctionId::H3}) {
        const auto f = TestFunction::make(id);
        for (std::size_t nodes : {6u, 10u, 20u}) {
            for (double jitter : {0.0, 0.2}) {
                const auto data = gen_mesh_dataset(f, nodes, {1.0, 4.0}, jitter, NoiseSpec::none(), ++seed);
                QueryOptions qo;
                qo.budget = 400;
                const auto qs = gen_queries(data, f, qo, seed);
                for (const auto &q : qs.coords) {
                    const auto ref = locate_reference(data.training, &data.mesh, q);
                    for (std::size_t axis = 0; axis < 3; ++axis) {
                        const auto st = axis_stencil(data.training, data.mesh, ref, q, axis);
                        if (!st.has(2)) {
                            continue;
                        }
                        const auto ang = segment_angles(data.training, st);
                        const double xr = data.training.coords(ref)[axis];
                        const double h = data.training.coords(st.points[2])[axis] - xr;
                        const auto p = build_intersection(ang, h, q[axis] - xr);
                        if (p.trivial || p.x_p < 0.0 || p.x_p > p.params.B) {
                            continue;
                        }
                        ++problems;
                        try {
                            const auto r = solve_intersection(p, 1e-9, 20);
                            fast += (r.method == RootMethod::Newton && r.iterations <= 3) ? 1 : 0;
                            auto g = [&](double x) { return approx_eval(p.params, x) - p.k * x - p.c; };
                            const double root = oracle::nearest_root(oracle::grid_roots(g, 0.0, p.params.B, 2000), r.x);
                            const double dev = std::isnan(root) ? INFINITY : std::abs(root - r.x);
                            worst = std::max(worst, dev);
                            accurate += dev <= 1e-8 ? 1 : 0;
                        } catch (const Error &) {
                            worst = INFINITY;
                        }
                    }
                }
            }
        }
    }
    const double share = static_cast<double>(fast) / static_cast<double>(problems);
    const bool pass = problems >= 10000 && share >= 0.95 && accurate == problems;
    report(7, "Newton iterations", pass,
           fmt("problems=%zu (>=10000), <=3 iterations=%.2f%% (>=95%%), within 1e-8 of oracle=%zu/%zu, worst=%.2g", problems,
               100.0 * share, accurate, problems, worst));
}

void approximant_properties() {
    const auto t0 = Clock::now();
    Rng rng = make_rng(7);
    std::uniform_real_distribution<double> u(-3, 3);
    std::uniform_real_distribution<double> pos(0.05, 5);
    std::uniform_real_distribution<double> dd(1.0, 3.0);
    bool endpoints = true;
    bool slopes = true;
    for (int i = 0; i < 2000; ++i) {
        const auto p = make_approx_params(pos(rng), u(rng), u(rng), dd(rng));
        endpoints = endpoints && approx_eval(p, 0.0) == 0.0 && approx_eval(p, p.B) == 0.0;
        const double eps = 1e-6 * p.B;
        const double tol = 1e-4 * std::max({std::abs(p.g1R), std::abs(p.g2L), 1.0});
        slopes = slopes && std::abs((approx_eval(p, eps) - approx_eval(p, 0.0)) / eps - p.g1R) <= tol &&
                 std::abs((approx_eval(p, p.B) - approx_eval(p, p.B - eps)) / eps + p.g2L) <= tol;
    }
    double argmax_err = 0.0;
    for (double B : {0.5, 1.0, 3.0}) {
        for (double g : {0.2, 1.0, 2.5}) {
            const auto p = make_approx_params(B, g, g);
            const auto roots = oracle::grid_roots([&](double x) { return approx_derivative(p, x); }, 0.01 * B, 0.99 * B, 997);
            argmax_err = std::max(argmax_err, roots.size() == 1 ? std::abs(roots[0] - B / 2.0) : INFINITY);
        }
    }
    const bool inflection = inflection_warning(make_approx_params(1.0, 1.0, 1.0, 3.0)) &&
                            inflection_warning(make_approx_params(2.0, 0.5, 0.8, 2.0)) &&
                            !inflection_warning(make_approx_params(1.0, 1.0, 1.0, 1.0));
    const double t = seconds_since(t0);
    report(8, "approximant properties", endpoints && slopes && argmax_err <= 1e-9 && inflection && t < 5.0,
           fmt("A(0)=A(B)=0:%d, endpoint slopes:%d, symmetric argmax err=%.2g (<=1e-9), inflection flags:%d, time=%.2fs (<5s)",
               endpoints, slopes, argmax_err, inflection, t));
}

void timing_shape() {
    auto per_query = [](std::size_t N) {
        const auto f = TestFunction::make(FunctionId::H1, N - 1);
        Rng rng = make_rng(9, {N});
        std::vector<PatchCase> cases;
        for (int i = 0; i < 200; ++i) {
            cases.push_back(gen_patch_case(f, 20, {1.0, 4.0}, NoiseSpec::none(), QueryOptions{}, rng));
        }
        double best = INFINITY;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = Clock::now();
            double sink = 0.0;
            for (const auto &pc : cases) {
                sink += evaluate_gradient(pc.training, &pc.mesh, pc.query).value;
            }
            best = std::min(best, seconds_since(t0) / static_cast<double>(cases.size()));
            if (sink == 42.0) {
                std::printf(" ");
            }
        }
        return best;
    };
    const double t10 = per_query(10);
    const double t100 = per_query(100);
    const double growth = t100 / t10;

    const auto f = TestFunction::make(FunctionId::H1, 49);
    Rng rng = make_rng(11);
    std::vector<PatchCase> cases;
    for (int i = 0; i < 400; ++i) {
        cases.push_back(gen_patch_case(f, 20, {1.0, 4.0}, NoiseSpec::none(), QueryOptions{}, rng));
    }
    auto throughput = [&](std::size_t workers) {
        const auto t0 = Clock::now();
        parallel_map<Estimate>(cases.size(), workers, [&](std::size_t i) {
            return evaluate_gradient(cases[i].training, &cases[i].mesh, cases[i].query);
        });
        return static_cast<double>(cases.size()) / seconds_since(t0);
    };
    const double base = throughput(1);
    double min_eff = INFINITY;
    std::string eff;
    for (std::size_t w : {2u, 4u}) {
        const double e = throughput(w) / (base * static_cast<double>(w));
        min_eff = std::min(min_eff, e);
        eff += fmt(" w=%zu:%.2f", w, e);
    }
    const bool pass = growth >= 20.0 && growth <= 200.0 && min_eff >= 0.6;
    report(9, "timing shape", pass,
           fmt("per-query N=10 %.3gs, N=100 %.3gs, growth=%.1f ([20,200]); parallel efficiency", t10, t100, growth) + eff +
               fmt(" (>=0.6) on %u hardware threads", std::thread::hardware_concurrency()));
}

} // namespace

int main() {
    const std::vector<std::pair<int, std::function<void()>>> criteria{
        {1, hyperplane_exactness}, {2, table1}, {3, table2}, {4, table3}, {5, table4},
        {6, averaging}, {7, newton_behavior}, {8, approximant_properties}, {9, timing_shape}};
    for (const auto &[id, run] : criteria) {
        try {
            run();
        } catch (const std::exception &e) {
            report(id, "criterion", false, std::string("threw: ") + e.what());
        }
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}

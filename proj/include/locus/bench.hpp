#pragma once

#include "locus/core.hpp"
#include "locus/gradient.hpp"
#include "locus/layers.hpp"
#include "locus/parallel.hpp"
#include "locus/smooth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace locus::bench {

// ============================================================================
// Test functions
// ============================================================================

enum class FunctionId { T1, S1, S2, H1, H2, H3 };

constexpr std::string_view to_string(FunctionId f) {
    switch (f) {
    case FunctionId::T1: return "T1";
    case FunctionId::S1: return "S1";
    case FunctionId::S2: return "S2";
    case FunctionId::H1: return "H1";
    case FunctionId::H2: return "H2";
    case FunctionId::H3: return "H3";
    }
    return "?";
}

inline FunctionId function_from_string(std::string_view s) {
    for (FunctionId f : {FunctionId::T1, FunctionId::S1, FunctionId::S2, FunctionId::H1, FunctionId::H2, FunctionId::H3}) {
        if (to_string(f) == s) {
            return f;
        }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown test function '" + std::string(s) + "'");
}

/**
 * @brief Closed-form benchmark surfaces.
 *
 * T1, S1 and S2 take three predictors. The H family takes `dim` predictors
 * indexed 0..dim-1; with N = dim + 1 total dimensions the weights are
 * 0.3 + i / (4 (N - 1)).
 */
struct TestFunction {
    FunctionId id = FunctionId::T1;
    std::size_t dim = 3;

    static TestFunction make(FunctionId id, std::size_t dim = 3) {
        if ((id == FunctionId::T1 || id == FunctionId::S1 || id == FunctionId::S2) && dim != 3) {
            throw Error(ErrorKind::DimensionMismatch, std::string(to_string(id)) + " is defined for three predictors");
        }
        if (dim == 0) {
            throw Error(ErrorKind::DimensionMismatch, "test function needs at least one predictor");
        }
        return {id, dim};
    }

    std::string name() const { return std::string(to_string(id)); }

    /// Total dimension count including the outcome.
    std::size_t total_dims() const noexcept { return dim + 1; }

    double operator()(std::span<const double> x) const {
        if (x.size() != dim) {
            throw Error(ErrorKind::DimensionMismatch, "test function argument has wrong length");
        }
        switch (id) {
        case FunctionId::T1: return x[0] * x[0] * x[0] + 0.4 * std::sin(6.0 * x[1]) + 0.6 * std::sin(4.0 * x[2] + 0.5);
        case FunctionId::S1: return 0.3 * std::pow(x[0], 0.5) + 0.5 * std::pow(x[1], 0.5) + 0.7 * std::pow(x[2], 0.5);
        case FunctionId::S2: return 0.3 * std::pow(x[0], 1.3) + 0.5 * std::pow(x[1], 1.5) + 0.7 * std::pow(x[2], 1.8);
        case FunctionId::H1:
        case FunctionId::H2: {
            const double p = id == FunctionId::H1 ? 0.5 : 1.5;
            const double denom = 4.0 * static_cast<double>(dim);
            double y = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                y += (0.3 + static_cast<double>(i) / denom) * std::pow(x[i], p);
            }
            return y;
        }
        case FunctionId::H3: {
            const double denom = 2.0 * static_cast<double>(dim);
            double y = std::pow(x[0], 1.5);
            for (std::size_t i = 1; i < dim; ++i) {
                y += std::sin(x[i] * (0.4 + static_cast<double>(i) / denom));
            }
            return y;
        }
        }
        return 0.0;
    }
};

// ============================================================================
// Randomness
// ============================================================================

using Rng = std::mt19937_64;

/// Independent stream for (seed, salt...), stable across runs and worker counts.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> salt = {}) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (std::uint64_t s : salt) {
        words.push_back(static_cast<std::uint32_t>(s));
        words.push_back(static_cast<std::uint32_t>(s >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

struct NoiseSpec {
    enum class Kind { None, Normal, Uniform };
    Kind kind = Kind::None;
    double sigma = 0.0; ///< normal standard deviation
    double lo = 0.0;    ///< uniform magnitude range, random sign
    double hi = 0.0;

    static NoiseSpec none() { return {}; }
    static NoiseSpec normal(double sigma) { return {Kind::Normal, sigma, 0.0, 0.0}; }
    static NoiseSpec uniform(double lo, double hi) { return {Kind::Uniform, 0.0, lo, hi}; }

    double draw(Rng &rng) const {
        switch (kind) {
        case Kind::None: return 0.0;
        case Kind::Normal: return std::normal_distribution<double>(0.0, sigma)(rng);
        case Kind::Uniform: {
            const double m = std::uniform_real_distribution<double>(lo, hi)(rng);
            return std::bernoulli_distribution(0.5)(rng) ? m : -m;
        }
        }
        return 0.0;
    }

    std::string label() const {
        switch (kind) {
        case Kind::None: return "none";
        case Kind::Normal: return "normal(" + format(sigma) + ")";
        case Kind::Uniform: return "uniform(" + format(lo) + "," + format(hi) + ")";
        }
        return "?";
    }

  private:
    static std::string format(double v) {
        std::string s = std::to_string(v);
        while (s.size() > 1 && s.back() == '0') {
            s.pop_back();
        }
        if (!s.empty() && s.back() == '.') {
            s.pop_back();
        }
        return s;
    }
};

// ============================================================================
// Datasets and queries
// ============================================================================

struct Domain {
    double lo = 0.0;
    double hi = 1.0;
};

struct MeshDataset {
    TrainingSet training;
    MeshIndex mesh;
    std::vector<double> clean; ///< noiseless outcomes at the (jittered) points
};

inline std::vector<double> uniform_nodes(std::size_t count, Domain d) {
    if (count < 2) {
        throw Error(ErrorKind::InvalidArgument, "need at least 2 nodes per axis");
    }
    std::vector<double> nodes(count);
    const double h = (d.hi - d.lo) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) {
        nodes[k] = d.lo + h * static_cast<double>(k);
    }
    nodes.back() = d.hi;
    return nodes;
}

/**
 * @brief Full grid over domain^dim with optional coordinate jitter and outcome noise.
 *
 * Points are stored row-major (last axis fastest). Each coordinate moves by
 * at most jitter times its smaller adjacent cell width.
 */
inline MeshDataset gen_mesh_dataset(const TestFunction &f, std::size_t nodes_per_axis, Domain domain, double jitter,
                                    NoiseSpec noise, std::uint64_t seed) {
    const std::size_t n = f.dim;
    std::vector<std::vector<double>> axes(n, uniform_nodes(nodes_per_axis, domain));
    MeshIndex mesh = MeshIndex::full_grid(axes, jitter);
    const std::size_t count = mesh.point_count();
    Rng rng = make_rng(seed, {0x6d657368});
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> coords(count * n);
    std::vector<double> clean(count);
    std::vector<double> noisy(count);
    std::vector<std::size_t> g(n, 0);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t a = 0; a < n; ++a) {
            double x = axes[a][g[a]];
            if (jitter > 0.0) {
                x += unit(rng) * mesh.max_offset(a, g[a]);
            }
            coords[i * n + a] = x;
        }
        clean[i] = f(std::span<const double>(coords.data() + i * n, n));
        noisy[i] = clean[i] + noise.draw(rng);
        for (std::size_t a = n; a-- > 0;) {
            if (++g[a] < nodes_per_axis) {
                break;
            }
            g[a] = 0;
        }
    }
    TrainingSet ts = TrainingSet::from_flat(n, 1, std::move(coords), std::move(noisy));
    return {std::move(ts), std::move(mesh), std::move(clean)};
}

enum class CellSelection {
    All,             ///< every cell
    StencilComplete, ///< cells whose four-point stencils exist on every axis
};

struct QueryOptions {
    double offset_lo = 0.3;
    double offset_hi = 0.5;
    bool centered = false; ///< place every query at its cell center instead
    std::size_t budget = 5000;
    CellSelection cells = CellSelection::All;
    std::size_t margin = 0; ///< extra cells excluded at each edge
};

struct QuerySet {
    std::vector<std::vector<double>> coords;
    std::vector<double> truth;           ///< noiseless f at the query
    std::vector<double> reference_truth; ///< noiseless outcome at the cell's lower corner
    std::vector<std::size_t> reference;  ///< training index of that corner

    std::size_t size() const noexcept { return coords.size(); }
};

namespace detail {

inline void check_offsets(const QueryOptions &opt, std::size_t n) {
    if (opt.centered) {
        return;
    }
    if (!(opt.offset_lo > 0.0 && opt.offset_hi <= 0.5 && opt.offset_lo <= opt.offset_hi)) {
        throw Error(ErrorKind::InvalidArgument, "query offsets must satisfy 0 < lo <= hi <= 0.5");
    }
    if (n > 1 && opt.offset_lo == opt.offset_hi) {
        throw Error(ErrorKind::InvalidArgument, "a degenerate offset range puts query coordinates in a shared plane");
    }
}

/// n pairwise-distinct offsets in [lo, hi).
inline std::vector<double> draw_offsets(Rng &rng, const QueryOptions &opt, std::size_t n) {
    std::vector<double> t(n, 0.5);
    if (opt.centered) {
        return t;
    }
    std::uniform_real_distribution<double> dist(opt.offset_lo, opt.offset_hi);
    for (std::size_t a = 0; a < n; ++a) {
        do {
            t[a] = dist(rng);
        } while (std::find(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(a), t[a]) != t.begin() + static_cast<std::ptrdiff_t>(a));
    }
    return t;
}

inline std::pair<std::size_t, std::size_t> cell_range(const QueryOptions &opt, std::size_t nodes) {
    const std::size_t inset = opt.margin + (opt.cells == CellSelection::StencilComplete ? 1 : 0);
    // Lower corners run over [0, nodes - 2]; the stencil needs one more node on each side.
    if (nodes < 2 + 2 * inset) {
        throw Error(ErrorKind::InvalidArgument, "mesh too small for the requested query cells");
    }
    return {inset, nodes - 2 - inset};
}

/// Up to `budget` distinct cell ordinals out of `total`, ascending.
inline std::vector<std::uint64_t> pick_cells(std::uint64_t total, std::size_t budget, Rng &rng) {
    std::vector<std::uint64_t> out;
    if (budget >= total) {
        out.resize(total);
        std::iota(out.begin(), out.end(), std::uint64_t{0});
        return out;
    }
    if (total <= (std::uint64_t{1} << 20)) {
        std::vector<std::uint64_t> all(total);
        std::iota(all.begin(), all.end(), std::uint64_t{0});
        out.reserve(budget);
        std::sample(all.begin(), all.end(), std::back_inserter(out), budget, rng);
        return out;
    }
    std::unordered_set<std::uint64_t> seen;
    std::uniform_int_distribution<std::uint64_t> dist(0, total - 1);
    while (out.size() < budget) {
        const auto c = dist(rng);
        if (seen.insert(c).second) {
            out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

/**
 * @brief One query per selected cell, offset from its lower corner by a
 * fraction of the cell width along each axis.
 */
inline QuerySet gen_queries(const MeshDataset &data, const TestFunction &f, const QueryOptions &opt, std::uint64_t seed) {
    const MeshIndex &mesh = data.mesh;
    const std::size_t n = mesh.dim();
    detail::check_offsets(opt, n);
    std::vector<std::pair<std::size_t, std::size_t>> ranges(n);
    double total_d = 1.0;
    for (std::size_t a = 0; a < n; ++a) {
        ranges[a] = detail::cell_range(opt, mesh.nodes(a));
        total_d *= static_cast<double>(ranges[a].second - ranges[a].first + 1);
    }
    if (total_d > 1.8e19) {
        throw Error(ErrorKind::InvalidArgument, "too many cells to enumerate; use patch queries");
    }
    const auto total = static_cast<std::uint64_t>(total_d);
    Rng rng = make_rng(seed, {0x71756572});
    const auto cells = detail::pick_cells(total, opt.budget, rng);

    QuerySet qs;
    GridIndex g(n);
    for (std::uint64_t ordinal : cells) {
        std::uint64_t rest = ordinal;
        for (std::size_t a = n; a-- > 0;) {
            const std::uint64_t span = ranges[a].second - ranges[a].first + 1;
            g[a] = static_cast<std::uint32_t>(ranges[a].first + rest % span);
            rest /= span;
        }
        const auto t = detail::draw_offsets(rng, opt, n);
        std::vector<double> q(n);
        for (std::size_t a = 0; a < n; ++a) {
            const double x0 = mesh.node(a, g[a]);
            q[a] = x0 + t[a] * (mesh.node(a, g[a] + 1) - x0);
        }
        const std::size_t ref = mesh.find(g).value_or(npos);
        qs.truth.push_back(f(q));
        qs.reference.push_back(ref);
        qs.reference_truth.push_back(ref == npos ? f(q) : data.clean[ref]);
        qs.coords.push_back(std::move(q));
    }
    return qs;
}

/// A single high-dimensional query with its own small training patch: the
/// reference node r plus r +- e_i and r + 2 e_i on every axis.
struct PatchCase {
    TrainingSet training;
    MeshIndex mesh;
    std::vector<double> query;
    double truth = 0.0;
    double reference_truth = 0.0;
    double reference_noise = 0.0;
};

inline PatchCase gen_patch_case(const TestFunction &f, std::size_t nodes_per_axis, Domain domain, NoiseSpec noise,
                                const QueryOptions &opt, Rng &rng) {
    const std::size_t n = f.dim;
    detail::check_offsets(opt, n);
    QueryOptions stencil = opt;
    stencil.cells = CellSelection::StencilComplete;
    const auto range = detail::cell_range(stencil, nodes_per_axis);
    const auto nodes = uniform_nodes(nodes_per_axis, domain);
    std::vector<std::vector<double>> axes(n, nodes);
    MeshIndex mesh(axes, 0.0);

    std::uniform_int_distribution<std::size_t> pick(range.first, range.second);
    GridIndex r(n);
    for (auto &v : r) {
        v = static_cast<std::uint32_t>(pick(rng));
    }
    const auto t = detail::draw_offsets(rng, opt, n);

    PatchCase pc;
    pc.query.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        pc.query[a] = nodes[r[a]] + t[a] * (nodes[r[a] + 1] - nodes[r[a]]);
    }
    pc.truth = f(pc.query);

    std::vector<double> coords;
    std::vector<double> outcomes;
    coords.reserve((3 * n + 1) * n);
    outcomes.reserve(3 * n + 1);
    std::vector<double> x(n);
    auto add = [&](const GridIndex &g) {
        for (std::size_t a = 0; a < n; ++a) {
            x[a] = nodes[g[a]];
        }
        const double clean = f(x);
        const double eps = noise.draw(rng);
        coords.insert(coords.end(), x.begin(), x.end());
        outcomes.push_back(clean + eps);
        mesh.insert(g, outcomes.size() - 1);
        return std::pair{clean, eps};
    };
    const auto [ref_clean, ref_eps] = add(r);
    pc.reference_truth = ref_clean;
    pc.reference_noise = ref_eps;
    GridIndex g = r;
    for (std::size_t a = 0; a < n; ++a) {
        for (int step : {-1, +1, +2}) {
            g[a] = static_cast<std::uint32_t>(static_cast<int>(r[a]) + step);
            add(g);
        }
        g[a] = r[a];
    }
    pc.training = TrainingSet::from_flat(n, 1, std::move(coords), std::move(outcomes));
    pc.mesh = std::move(mesh);
    return pc;
}

// ============================================================================
// Metrics
// ============================================================================

struct ErrorStats {
    std::size_t M = 0;
    double avg_y_differ = 0.0; ///< mean |y_ref - y_true|
    double avg_abs_err = 0.0;
    double max_abs_err = 0.0;
    double rel_err = 0.0;      ///< avg_abs_err / avg_y_differ
    double wall_time = 0.0;    ///< seconds spent evaluating, all queries
};

inline ErrorStats compute_stats(std::span<const double> estimates, std::span<const double> truths,
                                std::span<const double> reference_truths) {
    if (estimates.empty()) {
        throw Error(ErrorKind::EmptyInput, "no estimates to score");
    }
    if (truths.size() != estimates.size() || reference_truths.size() != estimates.size()) {
        throw Error(ErrorKind::DimensionMismatch, "estimate, truth and reference sequences differ in length");
    }
    ErrorStats s;
    s.M = estimates.size();
    double diff = 0.0;
    double err = 0.0;
    for (std::size_t i = 0; i < s.M; ++i) {
        const double e = std::abs(estimates[i] - truths[i]);
        err += e;
        s.max_abs_err = std::max(s.max_abs_err, e);
        diff += std::abs(reference_truths[i] - truths[i]);
    }
    s.avg_abs_err = err / static_cast<double>(s.M);
    s.avg_y_differ = diff / static_cast<double>(s.M);
    s.rel_err = s.avg_y_differ > 0.0 ? s.avg_abs_err / s.avg_y_differ : 0.0;
    return s;
}

struct NoiseRatios {
    std::size_t M = 0;
    double R1 = 0.0;
    double R2 = 0.0;
    bool r1_capped = false; ///< denominator was zero; R1 holds kRatioCap
    bool r2_capped = false;
};

inline constexpr double kRatioCap = 1e12;

/**
 * @brief Attenuation of outcome noise.
 *
 * @param input_deviation  noise carried by the input outcome for each query
 *                         (noisy minus original)
 * @param computed         estimates
 * @param original         noiseless truths at the queries
 *
 * R1 divides the summed absolute input deviation by the summed absolute
 * error; R2 divides it by the algebraic sum of errors, so unbiased errors
 * that cancel give a large R2.
 */
inline NoiseRatios compute_noise_ratios(std::span<const double> input_deviation, std::span<const double> computed,
                                        std::span<const double> original) {
    if (computed.empty()) {
        throw Error(ErrorKind::EmptyInput, "no values for noise ratios");
    }
    if (input_deviation.size() != computed.size() || original.size() != computed.size()) {
        throw Error(ErrorKind::DimensionMismatch, "noise ratio inputs differ in length");
    }
    NoiseRatios r;
    r.M = computed.size();
    double num = 0.0;
    double abs_den = 0.0;
    double alg_den = 0.0;
    for (std::size_t i = 0; i < r.M; ++i) {
        num += std::abs(input_deviation[i]);
        abs_den += std::abs(computed[i] - original[i]);
        alg_den += computed[i] - original[i];
    }
    auto ratio = [&](double den, bool &capped) {
        if (den == 0.0) {
            capped = true;
            return kRatioCap;
        }
        return std::min(kRatioCap, num / den);
    };
    r.R1 = ratio(abs_den, r.r1_capped);
    r.R2 = ratio(alg_den, r.r2_capped);
    return r;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw Error(ErrorKind::InvalidArgument, "slope fit needs at least two matching points");
    }
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    const auto m = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// ============================================================================
// Benchmark driver
// ============================================================================

enum class Table { T1, T2, T3, T4, Averaging };
enum class Scale { Small, Medium, Full };

constexpr std::string_view to_string(Table t) {
    switch (t) {
    case Table::T1: return "T1";
    case Table::T2: return "T2";
    case Table::T3: return "T3";
    case Table::T4: return "T4";
    case Table::Averaging: return "averaging";
    }
    return "?";
}

constexpr std::string_view to_string(Scale s) {
    switch (s) {
    case Scale::Small: return "small";
    case Scale::Medium: return "medium";
    case Scale::Full: return "full";
    }
    return "?";
}

inline Table table_from_string(std::string_view s) {
    for (Table t : {Table::T1, Table::T2, Table::T3, Table::T4, Table::Averaging}) {
        if (to_string(t) == s) {
            return t;
        }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown benchmark table '" + std::string(s) + "'");
}

inline Scale scale_from_string(std::string_view s) {
    for (Scale v : {Scale::Small, Scale::Medium, Scale::Full}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown scale '" + std::string(s) + "'");
}

struct ScenarioRow {
    std::string table;
    std::string scenario;
    std::string function;
    Method method = Method::Gradient;
    std::size_t predictors = 0;
    std::size_t nodes = 0;  ///< per axis
    std::size_t points = 0; ///< training points per query neighborhood or full mesh
    Domain domain;
    double jitter = 0.0;
    std::string noise = "none";
    std::size_t combinations = 1;
    ErrorStats stats;
    std::optional<NoiseRatios> noise_ratios;
    std::optional<double> ratio_to_gradient; ///< this method's avg_abs_err over the gradient method's
    std::size_t fallback_axes = 0;           ///< smooth axes that used the chord slope
};

struct BenchOptions {
    std::size_t workers = 1;
    bool timing = true; ///< measure single-worker per-query time
    std::size_t query_budget = 0; ///< 0 selects the table's default for the scale
};

struct BenchReport {
    std::string table;
    std::string scale;
    std::uint64_t seed = 0;
    std::vector<ScenarioRow> rows;
    std::vector<std::pair<std::string, double>> summary;
};

namespace detail {

struct EvalOutcome {
    std::vector<double> values;
    std::size_t fallback_axes = 0;
    double seconds = 0.0;
};

template <typename Fn>
EvalOutcome timed_map(std::size_t count, const BenchOptions &opt, Fn &&fn) {
    EvalOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    auto ests = parallel_map<Estimate>(count, opt.timing ? 1 : opt.workers, fn);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.values.reserve(count);
    for (const auto &e : ests) {
        out.values.push_back(e.value);
        for (AxisFlag f : e.diagnostics.axis_flags) {
            out.fallback_axes += f == AxisFlag::NewtonFallback ? 1 : 0;
        }
    }
    return out;
}

inline std::size_t pick_budget(const BenchOptions &opt, Scale scale, std::size_t small, std::size_t medium, std::size_t full) {
    if (opt.query_budget != 0) {
        return opt.query_budget;
    }
    return scale == Scale::Small ? small : (scale == Scale::Medium ? medium : full);
}

inline ScenarioRow base_row(Table t, const TestFunction &f, Method m, std::size_t nodes, std::size_t points, Domain d) {
    ScenarioRow r;
    r.table = std::string(to_string(t));
    r.function = f.name();
    r.method = m;
    r.predictors = f.dim;
    r.nodes = nodes;
    r.points = points;
    r.domain = d;
    r.scenario = r.function + "/N=" + std::to_string(f.total_dims()) + "/nodes=" + std::to_string(nodes);
    return r;
}

inline void run_t1(BenchReport &rep, Scale scale, std::uint64_t seed, const BenchOptions &opt) {
    std::vector<std::size_t> sizes{20, 29};
    if (scale != Scale::Small) {
        sizes.push_back(45);
    }
    if (scale == Scale::Full) {
        sizes.insert(sizes.end(), {92, 138});
    }
    const Domain dom{0.0, 3.0};
    const auto f = TestFunction::make(FunctionId::T1);
    QueryOptions qo;
    qo.budget = pick_budget(opt, scale, 5000, 5000, 20000);
    std::vector<double> rel;
    for (std::size_t nodes : sizes) {
        const auto data = gen_mesh_dataset(f, nodes, dom, 0.0, NoiseSpec::none(), seed);
        const auto qs = gen_queries(data, f, qo, seed + nodes);
        const auto ev = timed_map(qs.size(), opt, [&](std::size_t i) {
            return evaluate_gradient(data.training, &data.mesh, qs.coords[i], 1);
        });
        ScenarioRow row = base_row(Table::T1, f, Method::Gradient, nodes, data.training.size(), dom);
        row.stats = compute_stats(ev.values, qs.truth, qs.reference_truth);
        row.stats.wall_time = ev.seconds;
        rel.push_back(row.stats.rel_err);
        rep.rows.push_back(std::move(row));
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < rel.size(); ++i) {
        decreasing = decreasing && rel[i] < rel[i - 1];
    }
    rep.summary.emplace_back("rel_err_strictly_decreasing", decreasing ? 1.0 : 0.0);
}

inline void run_t2(BenchReport &rep, Scale scale, std::uint64_t seed, const BenchOptions &opt) {
    std::vector<std::size_t> sizes{20};
    if (scale != Scale::Small) {
        sizes.push_back(49);
    }
    if (scale == Scale::Full) {
        sizes.push_back(100);
    }
    const Domain dom{1.0, 4.0};
    QueryOptions qo;
    qo.cells = CellSelection::StencilComplete;
    qo.budget = pick_budget(opt, scale, 5000, 5000, 20000);
    for (FunctionId id : {FunctionId::S1, FunctionId::S2, FunctionId::T1}) {
        const auto f = TestFunction::make(id);
        for (std::size_t nodes : sizes) {
            const auto data = gen_mesh_dataset(f, nodes, dom, 0.0, NoiseSpec::none(), seed);
            const auto qs = gen_queries(data, f, qo, seed + nodes);
            const auto grad = timed_map(qs.size(), opt, [&](std::size_t i) {
                return evaluate_gradient(data.training, &data.mesh, qs.coords[i], 1);
            });
            const auto smooth = timed_map(qs.size(), opt, [&](std::size_t i) {
                return evaluate_smooth(data.training, data.mesh, qs.coords[i]);
            });
            ScenarioRow g = base_row(Table::T2, f, Method::Gradient, nodes, data.training.size(), dom);
            g.stats = compute_stats(grad.values, qs.truth, qs.reference_truth);
            g.stats.wall_time = grad.seconds;
            ScenarioRow s = base_row(Table::T2, f, Method::Smooth, nodes, data.training.size(), dom);
            s.stats = compute_stats(smooth.values, qs.truth, qs.reference_truth);
            s.stats.wall_time = smooth.seconds;
            s.fallback_axes = smooth.fallback_axes;
            s.ratio_to_gradient = g.stats.avg_abs_err > 0.0 ? s.stats.avg_abs_err / g.stats.avg_abs_err : 0.0;
            rep.rows.push_back(std::move(g));
            rep.rows.push_back(std::move(s));
        }
    }
}

inline const std::vector<std::size_t> kHighDims{10, 30, 50, 100};

/// Evaluates `method` on independent patch cases; case i is identical across
/// methods and worker counts because its stream is seeded from i.
inline EvalOutcome run_patches(const TestFunction &f, std::size_t nodes, Domain dom, NoiseSpec noise, std::size_t count,
                               Method method, std::uint64_t seed, std::uint64_t salt, const BenchOptions &opt,
                               std::vector<double> &truth, std::vector<double> &ref_truth, std::vector<double> &ref_noise) {
    truth.assign(count, 0.0);
    ref_truth.assign(count, 0.0);
    ref_noise.assign(count, 0.0);
    EvalOutcome out;
    out.values.assign(count, 0.0);
    std::vector<double> seconds(count, 0.0);
    auto results = parallel_map<Estimate>(count, opt.timing ? 1 : opt.workers, [&](std::size_t i) {
        Rng rng = make_rng(seed, {salt, i});
        const PatchCase pc = gen_patch_case(f, nodes, dom, noise, QueryOptions{}, rng);
        truth[i] = pc.truth;
        ref_truth[i] = pc.reference_truth;
        ref_noise[i] = pc.reference_noise;
        const auto t0 = std::chrono::steady_clock::now();
        Estimate e = method == Method::Gradient ? evaluate_gradient(pc.training, &pc.mesh, pc.query, 1)
                                                : evaluate_smooth(pc.training, pc.mesh, pc.query);
        seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return e;
    });
    for (std::size_t i = 0; i < count; ++i) {
        out.values[i] = results[i].value;
        out.seconds += seconds[i];
        for (AxisFlag fl : results[i].diagnostics.axis_flags) {
            out.fallback_axes += fl == AxisFlag::NewtonFallback ? 1 : 0;
        }
    }
    return out;
}

inline void run_t3(BenchReport &rep, Scale scale, std::uint64_t seed, const BenchOptions &opt) {
    const Domain dom{1.0, 4.0};
    const std::size_t nodes = 20;
    const std::size_t count = pick_budget(opt, scale, 200, 500, 2000);
    std::vector<FunctionId> fns{FunctionId::H1, FunctionId::H2};
    if (scale != Scale::Small) {
        fns.push_back(FunctionId::H3);
    }
    for (FunctionId id : fns) {
        for (std::size_t N : kHighDims) {
            const auto f = TestFunction::make(id, N - 1);
            const std::uint64_t salt = (static_cast<std::uint64_t>(id) << 16) | N;
            std::vector<double> truth, rt, rn;
            const auto grad = run_patches(f, nodes, dom, NoiseSpec::none(), count, Method::Gradient, seed, salt, opt, truth, rt, rn);
            const auto smooth = run_patches(f, nodes, dom, NoiseSpec::none(), count, Method::Smooth, seed, salt, opt, truth, rt, rn);
            ScenarioRow g = base_row(Table::T3, f, Method::Gradient, nodes, 3 * f.dim + 1, dom);
            g.stats = compute_stats(grad.values, truth, rt);
            g.stats.wall_time = grad.seconds;
            ScenarioRow s = base_row(Table::T3, f, Method::Smooth, nodes, 3 * f.dim + 1, dom);
            s.stats = compute_stats(smooth.values, truth, rt);
            s.stats.wall_time = smooth.seconds;
            s.fallback_axes = smooth.fallback_axes;
            s.ratio_to_gradient = g.stats.avg_abs_err > 0.0 ? s.stats.avg_abs_err / g.stats.avg_abs_err : 0.0;
            rep.rows.push_back(std::move(g));
            rep.rows.push_back(std::move(s));
        }
    }
}

inline void run_t4(BenchReport &rep, Scale scale, std::uint64_t seed, const BenchOptions &opt) {
    const Domain dom{1.0, 4.0};
    const std::size_t nodes = 20;
    const std::size_t count = pick_budget(opt, scale, 300, 500, 2000);
    std::vector<NoiseSpec> noises{NoiseSpec::normal(0.01)};
    if (scale != Scale::Small) {
        noises.push_back(NoiseSpec::normal(0.1));
        noises.push_back(NoiseSpec::uniform(0.05, 0.3));
    }
    if (scale == Scale::Full) {
        noises.push_back(NoiseSpec::normal(0.3));
    }
    const auto h1 = [](std::size_t N) { return TestFunction::make(FunctionId::H1, N - 1); };
    std::vector<double> r1;
    for (std::size_t k = 0; k < noises.size(); ++k) {
        for (std::size_t N : kHighDims) {
            const auto f = h1(N);
            const std::uint64_t salt = (std::uint64_t{0x7434} << 24) | (k << 16) | N;
            std::vector<double> truth, rt, rn;
            const auto smooth = run_patches(f, nodes, dom, noises[k], count, Method::Smooth, seed, salt, opt, truth, rt, rn);
            ScenarioRow s = base_row(Table::T4, f, Method::Smooth, nodes, 3 * f.dim + 1, dom);
            s.noise = noises[k].label();
            s.scenario += "/" + s.noise;
            s.stats = compute_stats(smooth.values, truth, rt);
            s.stats.wall_time = smooth.seconds;
            s.fallback_axes = smooth.fallback_axes;
            s.noise_ratios = compute_noise_ratios(rn, smooth.values, truth);
            if (k == 0) {
                r1.push_back(s.noise_ratios->R1);
            }
            rep.rows.push_back(std::move(s));
        }
    }
    rep.summary.emplace_back("R1_ratio_N10_over_N100", r1.front() / r1.back());
}

inline void run_averaging(BenchReport &rep, Scale scale, std::uint64_t seed, const BenchOptions &opt) {
    const Domain dom{0.0, 1.0};
    const std::size_t nodes = 17;
    // Affine truth, so every error comes from the outcome noise.
    const std::vector<double> coef{0.8, -1.1, 0.5};
    const double sigma = 0.1;
    const auto f = TestFunction::make(FunctionId::T1);
    auto data = gen_mesh_dataset(f, nodes, dom, 0.0, NoiseSpec::none(), seed);
    Rng rng = make_rng(seed, {0x61766721});
    std::vector<double> noisy(data.training.size());
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        auto x = data.training.coords(i);
        data.clean[i] = 0.3 + coef[0] * x[0] + coef[1] * x[1] + coef[2] * x[2];
        noisy[i] = data.clean[i] + std::normal_distribution<double>(0.0, sigma)(rng);
    }
    const TrainingSet ts = data.training.with_outcomes(1, noisy);
    QueryOptions qo;
    qo.margin = 4;
    qo.budget = pick_budget(opt, scale, 300, 600, 2000);
    const auto qs = gen_queries(data, f, qo, seed + 1);
    std::vector<double> truth(qs.size());
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const auto &q = qs.coords[i];
        truth[i] = 0.3 + coef[0] * q[0] + coef[1] * q[1] + coef[2] * q[2];
    }
    std::vector<double> cs;
    std::vector<double> errs;
    for (std::size_t C : {1, 4, 16, 64}) {
        const auto ev = timed_map(qs.size(), opt, [&](std::size_t i) {
            return evaluate_gradient(ts, &data.mesh, qs.coords[i], C);
        });
        ScenarioRow row;
        row.table = std::string(to_string(Table::Averaging));
        row.function = "affine";
        row.method = Method::Gradient;
        row.predictors = 3;
        row.nodes = nodes;
        row.points = ts.size();
        row.domain = dom;
        row.noise = NoiseSpec::normal(sigma).label();
        row.combinations = C;
        row.scenario = "affine/C=" + std::to_string(C);
        std::vector<double> ref_truth(qs.size());
        for (std::size_t i = 0; i < qs.size(); ++i) {
            ref_truth[i] = data.clean[qs.reference[i]];
        }
        row.stats = compute_stats(ev.values, truth, ref_truth);
        row.stats.wall_time = ev.seconds;
        cs.push_back(static_cast<double>(C));
        errs.push_back(row.stats.avg_abs_err);
        rep.rows.push_back(std::move(row));
    }
    rep.summary.emplace_back("loglog_slope", loglog_slope(cs, errs));
}

} // namespace detail

/// Regenerates one of the accuracy tables (or the averaging study).
inline BenchReport run_benchmark(Table table, Scale scale, std::uint64_t seed, const BenchOptions &opt = {}) {
    BenchReport rep;
    rep.table = std::string(to_string(table));
    rep.scale = std::string(to_string(scale));
    rep.seed = seed;
    switch (table) {
    case Table::T1: detail::run_t1(rep, scale, seed, opt); break;
    case Table::T2: detail::run_t2(rep, scale, seed, opt); break;
    case Table::T3: detail::run_t3(rep, scale, seed, opt); break;
    case Table::T4: detail::run_t4(rep, scale, seed, opt); break;
    case Table::Averaging: detail::run_averaging(rep, scale, seed, opt); break;
    }
    return rep;
}

} // namespace locus::bench

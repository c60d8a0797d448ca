#pragma once

#include "locus/core.hpp"
#include "locus/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace locus {

/// A reference point plus n auxiliary points; together they define the local
/// hyperplane used by the gradient method.
struct Simplex {
    std::size_t reference = npos;
    std::vector<std::size_t> auxiliary;

    /// Canonical key: reference first, then sorted auxiliaries.
    std::vector<std::size_t> key() const {
        std::vector<std::size_t> k = auxiliary;
        std::sort(k.begin(), k.end());
        k.insert(k.begin(), reference);
        return k;
    }

    friend bool operator==(const Simplex &a, const Simplex &b) { return a.key() == b.key(); }
};

struct CombinationPlan {
    std::vector<Simplex> simplexes;

    std::size_t size() const noexcept { return simplexes.size(); }
};

/// Four consecutive points along one axis through the reference. Missing
/// neighbors (domain edge or partial mesh) are npos.
struct Stencil1D {
    std::size_t axis = 0;
    std::array<std::size_t, 4> points{npos, npos, npos, npos};

    bool has(std::size_t k) const { return points[k] != npos; }
};

namespace detail {

inline double normalized_distance2(const TrainingSet &ts, std::size_t i, std::span<const double> q) {
    auto c = ts.coords(i);
    double d = 0.0;
    for (std::size_t a = 0; a < ts.dim(); ++a) {
        const double t = (c[a] - q[a]) / ts.range(a);
        d += t * t;
    }
    return d;
}

/// Indices of the k nearest points (normalized metric), nearest first, ties by index.
inline std::vector<std::size_t> nearest(const TrainingSet &ts, std::span<const double> q, std::size_t k,
                                        std::size_t exclude = npos) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i != exclude) {
            d.emplace_back(normalized_distance2(ts, i, q), i);
        }
    }
    k = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> out(k);
    for (std::size_t j = 0; j < k; ++j) {
        out[j] = d[j].second;
    }
    return out;
}

/// Incremental rank test: keeps an orthonormal basis of accepted directions.
class RankTracker {
  public:
    explicit RankTracker(std::size_t n) : n_(n) {}

    /// Accepts v if it is not (numerically) in the span of the accepted set.
    bool try_add(std::vector<double> v) {
        const double norm0 = std::sqrt(dot(v, v));
        if (norm0 == 0.0) {
            return false;
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto &b : basis_) {
                const double c = dot(v, b);
                for (std::size_t a = 0; a < n_; ++a) {
                    v[a] -= c * b[a];
                }
            }
        }
        const double norm = std::sqrt(dot(v, v));
        if (norm <= kRankTolerance * norm0) {
            return false;
        }
        for (double &x : v) {
            x /= norm;
        }
        basis_.push_back(std::move(v));
        return true;
    }

    std::size_t rank() const noexcept { return basis_.size(); }

  private:
    static constexpr double kRankTolerance = 1e-9;

    static double dot(const std::vector<double> &a, const std::vector<double> &b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += a[i] * b[i];
        }
        return s;
    }

    std::size_t n_;
    std::vector<std::vector<double>> basis_;
};

inline std::vector<double> normalized_difference(const TrainingSet &ts, std::size_t from, std::size_t to) {
    auto a = ts.coords(from);
    auto b = ts.coords(to);
    std::vector<double> v(ts.dim());
    for (std::size_t k = 0; k < ts.dim(); ++k) {
        v[k] = (b[k] - a[k]) / ts.range(k);
    }
    return v;
}

/// Full-rank test by elimination with scaled partial pivoting on the normalized differences.
inline bool nonsingular(const TrainingSet &ts, const Simplex &s) {
    const std::size_t n = ts.dim();
    if (s.auxiliary.size() != n) {
        return false;
    }
    constexpr double kPivotTolerance = 1e-9;
    std::vector<double> m(n * n);
    std::vector<double> scale(n, 0.0);
    auto r = ts.coords(s.reference);
    for (std::size_t i = 0; i < n; ++i) {
        auto a = ts.coords(s.auxiliary[i]);
        for (std::size_t k = 0; k < n; ++k) {
            m[i * n + k] = (a[k] - r[k]) / ts.range(k);
            scale[i] = std::max(scale[i], std::abs(m[i * n + k]));
        }
        if (scale[i] == 0.0) {
            return false;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = -1.0;
        for (std::size_t i = k; i < n; ++i) {
            const double rel = std::abs(m[i * n + k]) / scale[i];
            if (rel > best) {
                best = rel;
                p = i;
            }
        }
        if (best < kPivotTolerance) {
            return false;
        }
        if (p != k) {
            std::swap_ranges(m.begin() + static_cast<std::ptrdiff_t>(k * n), m.begin() + static_cast<std::ptrdiff_t>((k + 1) * n),
                             m.begin() + static_cast<std::ptrdiff_t>(p * n));
            std::swap(scale[k], scale[p]);
        }
        const double pivot = m[k * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const double factor = m[i * n + k] / pivot;
            if (factor == 0.0) {
                continue;
            }
            for (std::size_t j = k + 1; j < n; ++j) {
                m[i * n + j] -= factor * m[k * n + j];
            }
        }
    }
    return true;
}

inline GridIndex grid_index_of(const MeshIndex &mesh, std::span<const double> coords) {
    GridIndex g(mesh.dim());
    for (std::size_t a = 0; a < mesh.dim(); ++a) {
        g[a] = static_cast<std::uint32_t>(mesh.nearest_node(a, coords[a]));
    }
    return g;
}

inline std::optional<std::size_t> neighbor(const MeshIndex &mesh, GridIndex g, std::size_t axis, int step) {
    const auto k = static_cast<long long>(g[axis]) + step;
    if (k < 0 || k >= static_cast<long long>(mesh.nodes(axis))) {
        return std::nullopt;
    }
    g[axis] = static_cast<std::uint32_t>(k);
    return mesh.find(g);
}

/// Barycentric weights of q with respect to the simplex vertices
/// (reference first). nullopt when the simplex is singular.
inline std::optional<std::vector<double>> barycentric(const TrainingSet &ts, const Simplex &s, std::span<const double> q) {
    const std::size_t n = ts.dim();
    auto r = ts.coords(s.reference);
    LinearSystem sys{Matrix(n, n), std::vector<double>(n)};
    for (std::size_t j = 0; j < n; ++j) {
        auto a = ts.coords(s.auxiliary[j]);
        for (std::size_t i = 0; i < n; ++i) {
            sys.a(i, j) = a[i] - r[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        sys.b[i] = q[i] - r[i];
    }
    try {
        auto sol = solve_linear_system(sys);
        std::vector<double> lam(n + 1);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            lam[j + 1] = sol.x[j];
            sum += sol.x[j];
        }
        lam[0] = 1.0 - sum;
        return lam;
    } catch (const Error &) {
        return std::nullopt;
    }
}

inline double binomial(std::size_t n, std::size_t k) {
    if (k > n) {
        return 0.0;
    }
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        r *= static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return r;
}

/// Calls fn for every k-subset of items (as index positions), lexicographic.
template <typename Fn>
void for_each_subset(std::size_t count, std::size_t k, Fn &&fn) {
    if (k > count) {
        return;
    }
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
        fn(std::span<const std::size_t>(idx));
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == count - k + i - 1) {
            --i;
        }
        if (i == 0) {
            return;
        }
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

} // namespace detail

// ============================================================================
// Reference and simplex selection
// ============================================================================

/**
 * @brief Training point that anchors the local expansion for a query.
 *
 * Mesh mode returns the lower corner of the cell holding the query (a query
 * on a node returns that node). Otherwise, or when the partial mesh lacks
 * that corner, the nearest point under per-axis range normalization.
 */
inline std::size_t locate_reference(const TrainingSet &ts, const MeshIndex *mesh, std::span<const double> q) {
    if (ts.empty()) {
        throw Error(ErrorKind::EmptyTrainingSet, "cannot locate a reference in an empty training set");
    }
    validate_query(q, ts.dim());
    if (mesh != nullptr) {
        GridIndex g(mesh->dim());
        for (std::size_t a = 0; a < mesh->dim(); ++a) {
            g[a] = static_cast<std::uint32_t>(mesh->cell(a, q[a]));
        }
        if (auto p = mesh->find(g)) {
            return *p;
        }
    }
    return detail::nearest(ts, q, 1).front();
}

/**
 * @brief Reference plus n auxiliaries with a nonsingular difference matrix.
 *
 * Mesh mode takes the forward neighbor of the reference along each axis
 * (backward at the upper edge). Scattered mode walks the 3n points nearest
 * the query and keeps each one that raises the rank.
 */
inline Simplex select_simplex(const TrainingSet &ts, const MeshIndex *mesh, std::span<const double> q, std::size_t reference) {
    const std::size_t n = ts.dim();
    if (mesh != nullptr) {
        const GridIndex g = detail::grid_index_of(*mesh, ts.coords(reference));
        Simplex s{reference, {}};
        for (std::size_t a = 0; a < n; ++a) {
            auto p = detail::neighbor(*mesh, g, a, +1);
            if (!p) {
                p = detail::neighbor(*mesh, g, a, -1);
            }
            if (!p) {
                break;
            }
            s.auxiliary.push_back(*p);
        }
        if (s.auxiliary.size() == n && detail::nonsingular(ts, s)) {
            return s;
        }
    }

    const auto candidates = detail::nearest(ts, q, 3 * n, reference);
    detail::RankTracker rt(n);
    Simplex s{reference, {}};
    for (std::size_t c : candidates) {
        if (rt.try_add(detail::normalized_difference(ts, reference, c))) {
            s.auxiliary.push_back(c);
            if (s.auxiliary.size() == n) {
                return s;
            }
        }
    }
    throw Error(ErrorKind::DegenerateNeighborhood,
                "no nonsingular simplex among the " + std::to_string(candidates.size()) + " nearest candidates");
}

// ============================================================================
// Point combinations for averaging
// ============================================================================

namespace detail {

inline constexpr double kSubsetBudget = 5000.0;

/// Builds a simplex from a vertex set: the vertex nearest q is the reference.
inline Simplex simplex_from_vertices(const TrainingSet &ts, std::span<const std::size_t> vertices, std::span<const double> q) {
    std::size_t best = 0;
    double best_d = normalized_distance2(ts, vertices[0], q);
    for (std::size_t j = 1; j < vertices.size(); ++j) {
        const double d = normalized_distance2(ts, vertices[j], q);
        if (d < best_d || (d == best_d && vertices[j] < vertices[best])) {
            best = j;
            best_d = d;
        }
    }
    Simplex s{vertices[best], {}};
    for (std::size_t j = 0; j < vertices.size(); ++j) {
        if (j != best) {
            s.auxiliary.push_back(vertices[j]);
        }
    }
    return s;
}

inline double noise_gain(const std::vector<double> &lambda) {
    double s = 0.0;
    for (double l : lambda) {
        s += l * l;
    }
    return std::sqrt(s);
}

inline double aggregate_distance(const TrainingSet &ts, const Simplex &s, std::span<const double> q) {
    double d = std::sqrt(normalized_distance2(ts, s.reference, q));
    for (std::size_t a : s.auxiliary) {
        d += std::sqrt(normalized_distance2(ts, a, q));
    }
    return d;
}

} // namespace detail

/**
 * @brief C pairwise-distinct simplexes around a query.
 *
 * The first entry is always select_simplex's choice. Further simplexes are
 * drawn from points not used so far; among the nearest 3(n+1) such points the
 * vertex set with the smallest barycentric weight norm (the factor by which
 * independent outcome noise is amplified) wins. When fresh points run out,
 * sets that reuse points are admitted, least-reused first. Entries after the
 * first are ordered by aggregate distance to the query.
 */
inline CombinationPlan enumerate_combinations(const TrainingSet &ts, const MeshIndex *mesh, std::span<const double> q,
                                              std::size_t count) {
    if (count == 0) {
        throw Error(ErrorKind::InvalidArgument, "combination count must be at least 1");
    }
    const std::size_t n = ts.dim();
    const std::size_t k = n + 1;
    const std::size_t reference = locate_reference(ts, mesh, q);
    CombinationPlan plan;
    plan.simplexes.push_back(select_simplex(ts, mesh, q, reference));
    if (count == 1) {
        return plan;
    }
    if (ts.size() < k) {
        throw Error(ErrorKind::InsufficientPoints, "not enough points for another combination");
    }

    const std::size_t pool_size = std::min(ts.size(), k * (count + 2) + n);
    std::vector<std::size_t> pool = detail::nearest(ts, q, pool_size);
    for (std::size_t v : plan.simplexes.front().key()) {
        if (std::find(pool.begin(), pool.end(), v) == pool.end()) {
            pool.push_back(v);
        }
    }
    std::vector<int> uses(pool.size(), 0);
    auto pos_of = [&](std::size_t idx) {
        return static_cast<std::size_t>(std::distance(pool.begin(), std::find(pool.begin(), pool.end(), idx)));
    };
    std::set<std::vector<std::size_t>> taken;
    auto accept = [&](const Simplex &s) {
        taken.insert(s.key());
        for (std::size_t v : s.key()) {
            ++uses[pos_of(v)];
        }
        plan.simplexes.push_back(s);
    };
    taken.insert(plan.simplexes.front().key());
    for (std::size_t v : plan.simplexes.front().key()) {
        ++uses[pos_of(v)];
    }

    // Best vertex set drawn from `cand` (pool positions); score is
    // (sum of prior uses, noise gain), lexicographic.
    auto best_from = [&](const std::vector<std::size_t> &cand) -> std::optional<Simplex> {
        std::optional<Simplex> best;
        int best_uses = 0;
        double best_gain = 0.0;
        std::vector<std::size_t> verts(k);
        detail::for_each_subset(cand.size(), k, [&](std::span<const std::size_t> sub) {
            int u = 0;
            for (std::size_t j = 0; j < k; ++j) {
                verts[j] = pool[cand[sub[j]]];
                u += uses[cand[sub[j]]];
            }
            if (best && u > best_uses) {
                return;
            }
            Simplex s = detail::simplex_from_vertices(ts, verts, q);
            if (taken.count(s.key()) != 0) {
                return;
            }
            auto lam = detail::barycentric(ts, s, q);
            if (!lam || !detail::nonsingular(ts, s)) {
                return;
            }
            const double gain = detail::noise_gain(*lam);
            if (!best || u < best_uses || gain < best_gain) {
                best = s;
                best_uses = u;
                best_gain = gain;
            }
        });
        return best;
    };

    // Greedy fallback for large n: nearest reference, then rank-raising
    // auxiliaries, all from `cand`.
    auto greedy_from = [&](const std::vector<std::size_t> &cand) -> std::optional<Simplex> {
        for (std::size_t r = 0; r < cand.size(); ++r) {
            Simplex s{pool[cand[r]], {}};
            detail::RankTracker rt(n);
            for (std::size_t j = 0; j < cand.size() && s.auxiliary.size() < n; ++j) {
                if (j != r && rt.try_add(detail::normalized_difference(ts, s.reference, pool[cand[j]]))) {
                    s.auxiliary.push_back(pool[cand[j]]);
                }
            }
            if (s.auxiliary.size() == n && taken.count(s.key()) == 0) {
                return s;
            }
        }
        return std::nullopt;
    };

    // Reuse phase for large n: swap one auxiliary of an accepted simplex for
    // the next pool point, varying auxiliaries before references.
    auto swap_variant = [&]() -> std::optional<Simplex> {
        for (std::size_t b = 0; b < plan.simplexes.size(); ++b) {
            const Simplex base = plan.simplexes[b];
            for (std::size_t j = base.auxiliary.size(); j-- > 0;) {
                for (std::size_t p : pool) {
                    const auto key = base.key();
                    if (std::find(key.begin(), key.end(), p) != key.end()) {
                        continue;
                    }
                    Simplex s = base;
                    s.auxiliary[j] = p;
                    if (taken.count(s.key()) == 0 && detail::nonsingular(ts, s)) {
                        return s;
                    }
                }
            }
        }
        return std::nullopt;
    };

    const std::size_t window = std::min<std::size_t>(3 * k, pool.size());
    while (plan.size() < count) {
        std::vector<std::size_t> fresh;
        for (std::size_t p = 0; p < pool.size() && fresh.size() < window; ++p) {
            if (uses[p] == 0) {
                fresh.push_back(p);
            }
        }
        std::optional<Simplex> next;
        if (fresh.size() >= k) {
            next = detail::binomial(fresh.size(), k) <= detail::kSubsetBudget ? best_from(fresh) : greedy_from(fresh);
        }
        if (!next) {
            std::vector<std::size_t> all(pool.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            next = detail::binomial(all.size(), k) <= detail::kSubsetBudget ? best_from(all) : swap_variant();
        }
        if (!next) {
            throw Error(ErrorKind::InsufficientPoints, "only " + std::to_string(plan.size()) +
                                                           " distinct combinations available, " +
                                                           std::to_string(count) + " requested");
        }
        accept(*next);
    }

    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 1; i < plan.size(); ++i) {
        order.emplace_back(detail::aggregate_distance(ts, plan.simplexes[i], q), i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto &a, const auto &b) { return a.first < b.first; });
    CombinationPlan sorted;
    sorted.simplexes.push_back(plan.simplexes.front());
    for (const auto &o : order) {
        sorted.simplexes.push_back(plan.simplexes[o.second]);
    }
    return sorted;
}

// ============================================================================
// Axis stencils
// ============================================================================

/**
 * @brief Y0..Y3 along one axis through the reference (Y1).
 *
 * Y2 is the next node in the direction of the query. Points are ordered by
 * their actual coordinate, so jittered meshes keep the stencil monotone.
 */
inline Stencil1D axis_stencil(const TrainingSet &ts, const MeshIndex &mesh, std::size_t reference, std::span<const double> q,
                              std::size_t axis) {
    validate_query(q, ts.dim());
    const GridIndex g = detail::grid_index_of(mesh, ts.coords(reference));
    Stencil1D st;
    st.axis = axis;
    st.points[1] = reference;
    auto at = [&](int step) { return detail::neighbor(mesh, g, axis, step).value_or(npos); };
    st.points[0] = at(-1);
    st.points[2] = at(+1);
    st.points[3] = at(+2);
    return st;
}

} // namespace locus

#pragma once

#include "locus/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace locus {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

// ============================================================================
// Points and training data
// ============================================================================

/// One training sample: n predictor coordinates and one outcome per layer.
struct Point {
    std::vector<double> coords;
    std::vector<double> outcome;

    Point() = default;
    Point(std::vector<double> x, double y) : coords(std::move(x)), outcome{y} {}
    Point(std::vector<double> x, std::vector<double> y) : coords(std::move(x)), outcome(std::move(y)) {}

    friend bool operator==(const Point &, const Point &) = default;
};

struct QuerySpec {
    std::vector<double> coords;
};

namespace detail {

inline void require_finite(std::span<const double> values, std::string_view what, std::size_t index) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::NonFiniteValue, std::string(what) + " " + std::to_string(index) + " has a non-finite value");
        }
    }
}

} // namespace detail

/**
 * @brief Immutable, validated collection of training points.
 *
 * Coordinates and outcomes are stored row-major in flat buffers so a point is
 * a pair of spans. Outcomes are column-parallel: point i owns layer_count
 * consecutive values.
 */
class TrainingSet {
  public:
    TrainingSet() = default;

    /// Validates flat buffers: coords holds size*n values, outcomes size*layer_count.
    static TrainingSet from_flat(std::size_t n, std::size_t layer_count, std::vector<double> coords,
                                 std::vector<double> outcomes) {
        if (n == 0) {
            throw Error(ErrorKind::DimensionMismatch, "predictor dimension must be at least 1");
        }
        if (layer_count == 0) {
            throw Error(ErrorKind::DimensionMismatch, "layer count must be at least 1");
        }
        if (coords.size() % n != 0) {
            throw Error(ErrorKind::DimensionMismatch, "coordinate buffer is not a multiple of n");
        }
        const std::size_t count = coords.size() / n;
        if (outcomes.size() != count * layer_count) {
            throw Error(ErrorKind::DimensionMismatch, "outcome buffer does not match point count");
        }
        if (count < n + 1) {
            throw Error(ErrorKind::TooFewPoints, "need at least " + std::to_string(n + 1) + " points for n=" +
                                                     std::to_string(n) + ", got " + std::to_string(count));
        }
        TrainingSet ts;
        ts.n_ = n;
        ts.layers_ = layer_count;
        ts.coords_ = std::move(coords);
        ts.outcomes_ = std::move(outcomes);
        for (std::size_t i = 0; i < count; ++i) {
            detail::require_finite(ts.coords(i), "point", i);
            detail::require_finite(ts.outcomes(i), "outcome of point", i);
        }
        ts.check_duplicates();
        ts.compute_bounds();
        return ts;
    }

    std::size_t size() const noexcept { return n_ == 0 ? 0 : coords_.size() / n_; }
    std::size_t dim() const noexcept { return n_; }
    std::size_t layer_count() const noexcept { return layers_; }
    bool empty() const noexcept { return size() == 0; }

    std::span<const double> coords(std::size_t i) const { return {coords_.data() + i * n_, n_}; }
    std::span<const double> outcomes(std::size_t i) const { return {outcomes_.data() + i * layers_, layers_}; }
    double outcome(std::size_t i, std::size_t layer = 0) const { return outcomes_[i * layers_ + layer]; }

    Point point(std::size_t i) const {
        auto c = coords(i);
        auto o = outcomes(i);
        return Point(std::vector<double>(c.begin(), c.end()), std::vector<double>(o.begin(), o.end()));
    }

    std::vector<Point> points() const {
        std::vector<Point> out;
        out.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) {
            out.push_back(point(i));
        }
        return out;
    }

    const std::vector<double> &flat_coords() const noexcept { return coords_; }
    const std::vector<double> &flat_outcomes() const noexcept { return outcomes_; }

    /// Axis-aligned bounding box of the predictors.
    const std::vector<double> &lower() const noexcept { return lo_; }
    const std::vector<double> &upper() const noexcept { return hi_; }

    /// Per-axis range used to normalize distances; 1 for axes with zero extent.
    double range(std::size_t axis) const {
        const double r = hi_[axis] - lo_[axis];
        return r > 0.0 ? r : 1.0;
    }

    bool contains(std::span<const double> x) const {
        for (std::size_t a = 0; a < n_; ++a) {
            if (x[a] < lo_[a] || x[a] > hi_[a]) {
                return false;
            }
        }
        return true;
    }

    /// Same predictors, new outcome columns. Used to chain derived datasets.
    TrainingSet with_outcomes(std::size_t layer_count, std::vector<double> outcomes) const {
        return from_flat(n_, layer_count, coords_, std::move(outcomes));
    }

    /// Single-layer view of one outcome column.
    TrainingSet layer(std::size_t j) const {
        if (j >= layers_) {
            throw Error(ErrorKind::InvalidArgument, "layer index out of range");
        }
        std::vector<double> col(size());
        for (std::size_t i = 0; i < size(); ++i) {
            col[i] = outcome(i, j);
        }
        TrainingSet ts = *this;
        ts.layers_ = 1;
        ts.outcomes_ = std::move(col);
        return ts;
    }

    friend bool operator==(const TrainingSet &a, const TrainingSet &b) {
        return a.n_ == b.n_ && a.layers_ == b.layers_ && a.coords_ == b.coords_ && a.outcomes_ == b.outcomes_;
    }

  private:
    void check_duplicates() const {
        std::vector<std::size_t> order(size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto less = [this](std::size_t a, std::size_t b) {
            auto ca = coords(a);
            auto cb = coords(b);
            return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end());
        };
        std::sort(order.begin(), order.end(), less);
        for (std::size_t k = 1; k < order.size(); ++k) {
            auto ca = coords(order[k - 1]);
            auto cb = coords(order[k]);
            if (std::equal(ca.begin(), ca.end(), cb.begin())) {
                throw Error(ErrorKind::DuplicatePoint, "points " + std::to_string(std::min(order[k - 1], order[k])) +
                                                           " and " + std::to_string(std::max(order[k - 1], order[k])) +
                                                           " share coordinates");
            }
        }
    }

    void compute_bounds() {
        lo_.assign(n_, std::numeric_limits<double>::infinity());
        hi_.assign(n_, -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < size(); ++i) {
            auto c = coords(i);
            for (std::size_t a = 0; a < n_; ++a) {
                lo_[a] = std::min(lo_[a], c[a]);
                hi_[a] = std::max(hi_[a], c[a]);
            }
        }
    }

    std::size_t n_ = 0;
    std::size_t layers_ = 0;
    std::vector<double> coords_;
    std::vector<double> outcomes_;
    std::vector<double> lo_;
    std::vector<double> hi_;
};

inline TrainingSet validate_training_set(const std::vector<Point> &points, std::size_t n, std::size_t layer_count = 1) {
    if (points.size() < n + 1) {
        throw Error(ErrorKind::TooFewPoints, "need at least " + std::to_string(n + 1) + " points for n=" +
                                                 std::to_string(n) + ", got " + std::to_string(points.size()));
    }
    std::vector<double> coords;
    std::vector<double> outcomes;
    coords.reserve(points.size() * n);
    outcomes.reserve(points.size() * layer_count);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point &p = points[i];
        if (p.coords.size() != n) {
            throw Error(ErrorKind::DimensionMismatch, "point " + std::to_string(i) + " has " +
                                                          std::to_string(p.coords.size()) + " coordinates, expected " +
                                                          std::to_string(n));
        }
        if (p.outcome.size() != layer_count) {
            throw Error(ErrorKind::DimensionMismatch, "point " + std::to_string(i) + " has " +
                                                          std::to_string(p.outcome.size()) + " outcomes, expected " +
                                                          std::to_string(layer_count));
        }
        coords.insert(coords.end(), p.coords.begin(), p.coords.end());
        outcomes.insert(outcomes.end(), p.outcome.begin(), p.outcome.end());
    }
    return TrainingSet::from_flat(n, layer_count, std::move(coords), std::move(outcomes));
}

inline void validate_query(std::span<const double> coords, std::size_t n) {
    if (coords.size() != n) {
        throw Error(ErrorKind::DimensionMismatch,
                    "query has " + std::to_string(coords.size()) + " coordinates, expected " + std::to_string(n));
    }
    detail::require_finite(coords, "query", 0);
}

// ============================================================================
// Mesh index
// ============================================================================

using GridIndex = std::vector<std::uint32_t>;

struct GridIndexHash {
    std::size_t operator()(const GridIndex &g) const noexcept {
        std::uint64_t h = 1469598103934665603ULL;
        for (std::uint32_t v : g) {
            h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

/**
 * @brief Structured view of a training set laid out on a rectangular grid.
 *
 * Nodes are the nominal (unjittered) coordinates per axis. Points may be
 * displaced from their node by less than jitter * (local cell width). The
 * mesh can be partial: only the nodes that were added are present, which is
 * how high-dimensional patches are represented.
 */
class MeshIndex {
  public:
    MeshIndex() = default;

    MeshIndex(std::vector<std::vector<double>> axes, double jitter_fraction) : axes_(std::move(axes)), jitter_(jitter_fraction) {
        if (axes_.empty()) {
            throw Error(ErrorKind::InvalidArgument, "mesh needs at least one axis");
        }
        if (!(jitter_ >= 0.0 && jitter_ < 0.5)) {
            throw Error(ErrorKind::InvalidArgument, "jitter fraction must lie in [0, 0.5)");
        }
        for (const auto &nodes : axes_) {
            if (nodes.size() < 2) {
                throw Error(ErrorKind::InvalidArgument, "each mesh axis needs at least 2 nodes");
            }
            for (std::size_t k = 1; k < nodes.size(); ++k) {
                if (!(nodes[k] > nodes[k - 1])) {
                    throw Error(ErrorKind::InvalidArgument, "mesh nodes must be strictly increasing");
                }
            }
        }
        double cells = 1.0;
        for (const auto &nodes : axes_) {
            cells *= static_cast<double>(nodes.size());
        }
        if (cells <= static_cast<double>(kDenseLimit)) {
            dense_.assign(static_cast<std::size_t>(cells), npos);
        }
    }

    /// Full grid whose point i sits at the row-major (last axis fastest) node i.
    static MeshIndex full_grid(std::vector<std::vector<double>> axes, double jitter_fraction) {
        MeshIndex m(std::move(axes), jitter_fraction);
        if (m.dense_.empty()) {
            throw Error(ErrorKind::InvalidArgument, "grid too large for a dense index");
        }
        std::iota(m.dense_.begin(), m.dense_.end(), std::size_t{0});
        m.count_ = m.dense_.size();
        return m;
    }

    /// Assigns every training point to its nearest node; each point must lie
    /// within the jitter band of that node and nodes may not be shared.
    static MeshIndex from_training(std::vector<std::vector<double>> axes, double jitter_fraction, const TrainingSet &ts) {
        MeshIndex m(std::move(axes), jitter_fraction);
        if (ts.dim() != m.dim()) {
            throw Error(ErrorKind::DimensionMismatch, "mesh axes do not match training dimension");
        }
        GridIndex g(m.dim());
        for (std::size_t i = 0; i < ts.size(); ++i) {
            auto c = ts.coords(i);
            for (std::size_t a = 0; a < m.dim(); ++a) {
                const auto k = m.nearest_node(a, c[a]);
                const double off = std::abs(c[a] - m.axes_[a][k]);
                if (off > m.max_offset(a, k) * (1.0 + 1e-9) + 1e-12) {
                    throw Error(ErrorKind::InvalidArgument, "point " + std::to_string(i) + " lies off the mesh on axis " +
                                                                std::to_string(a));
                }
                g[a] = static_cast<std::uint32_t>(k);
            }
            m.insert(g, i);
        }
        return m;
    }

    void insert(const GridIndex &g, std::size_t point) {
        if (g.size() != dim()) {
            throw Error(ErrorKind::DimensionMismatch, "grid index has wrong length");
        }
        for (std::size_t a = 0; a < dim(); ++a) {
            if (g[a] >= axes_[a].size()) {
                throw Error(ErrorKind::InvalidArgument, "grid index out of range");
            }
        }
        if (!dense_.empty()) {
            auto &slot = dense_[linear(g)];
            if (slot != npos) {
                throw Error(ErrorKind::DuplicatePoint, "two points map to the same mesh node");
            }
            slot = point;
        } else if (!sparse_.emplace(g, point).second) {
            throw Error(ErrorKind::DuplicatePoint, "two points map to the same mesh node");
        }
        ++count_;
    }

    std::size_t dim() const noexcept { return axes_.size(); }
    std::size_t nodes(std::size_t axis) const { return axes_[axis].size(); }
    double node(std::size_t axis, std::size_t k) const { return axes_[axis][k]; }
    const std::vector<double> &axis(std::size_t a) const { return axes_[a]; }
    const std::vector<std::vector<double>> &axes() const noexcept { return axes_; }
    double jitter() const noexcept { return jitter_; }
    std::size_t point_count() const noexcept { return count_; }

    bool complete() const {
        double total = 1.0;
        for (const auto &nodes : axes_) {
            total *= static_cast<double>(nodes.size());
        }
        return static_cast<double>(count_) == total;
    }

    std::optional<std::size_t> find(const GridIndex &g) const {
        for (std::size_t a = 0; a < dim(); ++a) {
            if (g[a] >= axes_[a].size()) {
                return std::nullopt;
            }
        }
        if (!dense_.empty()) {
            const auto p = dense_[linear(g)];
            return p == npos ? std::nullopt : std::optional<std::size_t>(p);
        }
        auto it = sparse_.find(g);
        return it == sparse_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
    }

    /// Lower node of the cell holding x, clamped to [0, nodes-2]. A value
    /// exactly on a node maps to that node (the last node maps to itself).
    std::size_t cell(std::size_t axis, double x) const {
        const auto &nodes = axes_[axis];
        auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
        if (it == nodes.begin()) {
            return 0;
        }
        auto k = static_cast<std::size_t>(std::distance(nodes.begin(), it) - 1);
        if (k >= nodes.size() - 1) {
            return x == nodes.back() ? nodes.size() - 1 : nodes.size() - 2;
        }
        return k;
    }

    std::size_t nearest_node(std::size_t axis, double x) const {
        const auto &nodes = axes_[axis];
        auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
        if (it == nodes.begin()) {
            return 0;
        }
        if (it == nodes.end()) {
            return nodes.size() - 1;
        }
        const auto hi = static_cast<std::size_t>(std::distance(nodes.begin(), it));
        return (x - nodes[hi - 1] <= nodes[hi] - x) ? hi - 1 : hi;
    }

    /// Largest displacement a point at node k may have along an axis.
    double max_offset(std::size_t axis, std::size_t k) const {
        const auto &nodes = axes_[axis];
        double width = std::numeric_limits<double>::infinity();
        if (k > 0) {
            width = std::min(width, nodes[k] - nodes[k - 1]);
        }
        if (k + 1 < nodes.size()) {
            width = std::min(width, nodes[k + 1] - nodes[k]);
        }
        return jitter_ * width;
    }

  private:
    static constexpr std::size_t kDenseLimit = std::size_t{1} << 26;

    std::size_t linear(const GridIndex &g) const {
        std::size_t idx = 0;
        for (std::size_t a = 0; a < dim(); ++a) {
            idx = idx * axes_[a].size() + g[a];
        }
        return idx;
    }

    std::vector<std::vector<double>> axes_;
    double jitter_ = 0.0;
    std::vector<std::size_t> dense_;
    std::unordered_map<GridIndex, std::size_t, GridIndexHash> sparse_;
    std::size_t count_ = 0;
};

// ============================================================================
// Estimates
// ============================================================================

enum class Method { Gradient, Smooth };

constexpr std::string_view to_string(Method m) { return m == Method::Gradient ? "gradient" : "smooth"; }

/// How the smooth correction treated one axis.
enum class AxisFlag {
    Corrected,        ///< full four-point correction
    BoundaryFallback, ///< a stencil neighbor was missing; that side used a zero tangent deviation or the chord
    NewtonFallback,   ///< the intersection could not be solved; chord gradient used
};

constexpr std::string_view to_string(AxisFlag f) {
    switch (f) {
    case AxisFlag::Corrected: return "corrected";
    case AxisFlag::BoundaryFallback: return "boundary-fallback";
    case AxisFlag::NewtonFallback: return "newton-fallback";
    }
    return "unknown";
}

struct Diagnostics {
    double solver_residual = 0.0;
    std::vector<int> newton_iterations;       ///< per axis, smooth method only
    std::vector<AxisFlag> axis_flags;         ///< per axis, smooth method only
    std::vector<double> combination_values;   ///< per combination, gradient method only
    bool extrapolated = false;                ///< query outside the training bounding box
    bool inflection_warning = false;          ///< some axis approximant has an interior inflection (d > 1)
};

struct Estimate {
    double value = 0.0;
    Method method = Method::Gradient;
    std::size_t reference = npos;
    std::size_t combinations = 1;
    Diagnostics diagnostics;
};

} // namespace locus

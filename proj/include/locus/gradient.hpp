#pragma once

#include "locus/core.hpp"
#include "locus/neighborhood.hpp"
#include "locus/solver.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace locus {

/// Partial derivatives of the local hyperplane at the reference point.
struct GradientVector {
    std::vector<double> p;
    double residual = 0.0;
};

/**
 * @brief Solves for the hyperplane through the reference and its auxiliaries.
 *
 * Row m is the displacement of auxiliary m from the reference; the
 * right-hand side is the matching outcome difference on the given layer.
 */
inline GradientVector estimate_gradients(const TrainingSet &ts, const Simplex &s, std::size_t layer = 0) {
    const std::size_t n = ts.dim();
    if (s.auxiliary.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "simplex needs exactly n auxiliary points");
    }
    if (layer >= ts.layer_count()) {
        throw Error(ErrorKind::InvalidArgument, "layer index out of range");
    }
    auto r = ts.coords(s.reference);
    const double yr = ts.outcome(s.reference, layer);
    LinearSystem sys{Matrix(n, n), std::vector<double>(n)};
    for (std::size_t m = 0; m < n; ++m) {
        auto a = ts.coords(s.auxiliary[m]);
        for (std::size_t i = 0; i < n; ++i) {
            sys.a(m, i) = a[i] - r[i];
        }
        sys.b[m] = ts.outcome(s.auxiliary[m], layer) - yr;
    }
    try {
        auto sol = solve_linear_system(sys);
        return {std::move(sol.x), sol.residual};
    } catch (const Error &e) {
        if (e.kind() == ErrorKind::SingularSystem) {
            throw Error(ErrorKind::DegenerateNeighborhood, std::string("simplex is degenerate: ") + e.what());
        }
        throw;
    }
}

/// First-order expansion about the reference point.
inline double extrapolate(std::span<const double> reference, double y_ref, const GradientVector &g,
                          std::span<const double> q) {
    if (g.p.size() != reference.size() || q.size() != reference.size()) {
        throw Error(ErrorKind::DimensionMismatch, "gradient, reference and query lengths differ");
    }
    double y = y_ref;
    for (std::size_t i = 0; i < g.p.size(); ++i) {
        y += g.p[i] * (q[i] - reference[i]);
    }
    return y;
}

/**
 * @brief Gradient-method estimate, averaged over `combinations` simplexes.
 *
 * Combinations whose system turns out singular are skipped; the estimate
 * fails only if every combination does.
 */
inline Estimate evaluate_gradient(const TrainingSet &ts, const MeshIndex *mesh, std::span<const double> q,
                                  std::size_t combinations = 1, std::size_t layer = 0) {
    validate_query(q, ts.dim());
    const CombinationPlan plan = enumerate_combinations(ts, mesh, q, combinations);
    Estimate est;
    est.method = Method::Gradient;
    est.reference = plan.simplexes.front().reference;
    est.diagnostics.extrapolated = !ts.contains(q);
    double sum = 0.0;
    for (const Simplex &s : plan.simplexes) {
        try {
            const GradientVector g = estimate_gradients(ts, s, layer);
            const double y = extrapolate(ts.coords(s.reference), ts.outcome(s.reference, layer), g, q);
            est.diagnostics.combination_values.push_back(y);
            est.diagnostics.solver_residual = std::max(est.diagnostics.solver_residual, g.residual);
            sum += y;
        } catch (const Error &e) {
            if (e.kind() != ErrorKind::DegenerateNeighborhood) {
                throw;
            }
        }
    }
    if (est.diagnostics.combination_values.empty()) {
        throw Error(ErrorKind::DegenerateNeighborhood, "every point combination was degenerate");
    }
    est.combinations = est.diagnostics.combination_values.size();
    est.value = sum / static_cast<double>(est.combinations);
    return est;
}

} // namespace locus

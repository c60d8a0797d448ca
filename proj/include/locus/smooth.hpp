#pragma once

#include "locus/core.hpp"
#include "locus/gradient.hpp"
#include "locus/neighborhood.hpp"
#include "locus/solver.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace locus {

// ============================================================================
// Approximating function A(x) = K x (B-x) (g1R (B-x)^d + g2L x^d)
// ============================================================================

/// Parameters of the per-segment approximant in the frame rotated onto the
/// chord Y1Y2: B is the chord length, g1R / g2L the tangent slopes at its ends.
struct ApproxFunctionParams {
    double B = 1.0;
    double g1R = 0.0;
    double g2L = 0.0;
    double d = 1.0;
    double K = 1.0;
};

inline ApproxFunctionParams make_approx_params(double B, double g1R, double g2L, double d = 1.0) {
    if (!(B > 0.0) || !std::isfinite(B)) {
        throw Error(ErrorKind::InvalidArgument, "approximant interval length must be positive and finite");
    }
    if (!(d > 0.0) || !std::isfinite(d)) {
        throw Error(ErrorKind::InvalidArgument, "shape exponent d must be positive and finite");
    }
    if (!std::isfinite(g1R) || !std::isfinite(g2L)) {
        throw Error(ErrorKind::NonFiniteValue, "approximant end gradients must be finite");
    }
    return {B, g1R, g2L, d, 1.0 / std::pow(B, d + 1.0)};
}

namespace detail {

inline void require_in_interval(const ApproxFunctionParams &p, double x) {
    if (!(x >= 0.0 && x <= p.B)) {
        throw Error(ErrorKind::InvalidArgument, "approximant evaluated outside [0, B]");
    }
}

} // namespace detail

inline double approx_eval(const ApproxFunctionParams &p, double x) {
    detail::require_in_interval(p, x);
    const double r = p.B - x;
    return p.K * x * r * (p.g1R * std::pow(r, p.d) + p.g2L * std::pow(x, p.d));
}

/// dA/dx, arranged so that no negative power of x or B-x appears.
inline double approx_derivative(const ApproxFunctionParams &p, double x) {
    detail::require_in_interval(p, x);
    const double r = p.B - x;
    const double rd = std::pow(r, p.d);
    const double xd = std::pow(x, p.d);
    const double v = p.g1R * rd + p.g2L * xd;
    return p.K * ((p.B - 2.0 * x) * v + p.d * (p.g2L * r * xd - p.g1R * x * rd));
}

/// d2A/dx2 on the open interval (0, B).
inline double approx_second_derivative(const ApproxFunctionParams &p, double x) {
    const double r = p.B - x;
    const double w = x * r;
    const double w1 = p.B - 2.0 * x;
    const double v = p.g1R * std::pow(r, p.d) + p.g2L * std::pow(x, p.d);
    const double v1 = p.d * (p.g2L * std::pow(x, p.d - 1.0) - p.g1R * std::pow(r, p.d - 1.0));
    const double v2 = p.d * (p.d - 1.0) * (p.g1R * std::pow(r, p.d - 2.0) + p.g2L * std::pow(x, p.d - 2.0));
    return p.K * (-2.0 * v + 2.0 * w1 * v1 + w * v2);
}

struct ApproxShape {
    int extrema = 0;     ///< interior sign changes of A'
    int inflections = 0; ///< interior sign changes of A''
};

namespace detail {

template <typename F>
int count_sign_changes(const ApproxFunctionParams &p, int samples, F &&f) {
    std::vector<double> v(static_cast<std::size_t>(samples - 1));
    double scale = 0.0;
    for (int i = 1; i < samples; ++i) {
        v[static_cast<std::size_t>(i - 1)] = f(p.B * static_cast<double>(i) / samples);
        scale = std::max(scale, std::abs(v[static_cast<std::size_t>(i - 1)]));
    }
    const double floor = 1e-9 * scale;
    int changes = 0;
    int last = 0;
    for (double x : v) {
        const int s = x > floor ? 1 : (x < -floor ? -1 : 0);
        if (s != 0) {
            if (last != 0 && s != last) {
                ++changes;
            }
            last = s;
        }
    }
    return changes;
}

} // namespace detail

/// Counts interior extrema and inflection points on a uniform sample grid.
inline ApproxShape analyze_shape(const ApproxFunctionParams &p, int samples = 4096) {
    ApproxShape s;
    s.extrema = detail::count_sign_changes(p, samples, [&](double x) { return approx_derivative(p, x); });
    s.inflections = detail::count_sign_changes(p, samples, [&](double x) { return approx_second_derivative(p, x); });
    return s;
}

/// True when d > 1 has introduced an inflection point inside (0, B). The
/// cubic (d = 1) never triggers this.
inline bool inflection_warning(const ApproxFunctionParams &p) {
    return p.d > 1.0 && analyze_shape(p).inflections > 0;
}

// ============================================================================
// Stencil geometry
// ============================================================================

struct StencilAngles {
    double F0 = 0.0;
    double F1 = 0.0;
    double F2 = 0.0;
    double Fg1 = 0.0;
    double Fg2 = 0.0;
    bool y0_missing = false;
    bool y3_missing = false;
};

/// Axis coordinates and outcomes of a stencil; missing outer points are NaN.
struct StencilProfile {
    std::array<double, 4> x{};
    std::array<double, 4> y{};
};

namespace detail {

inline double profile_angle(const StencilProfile &p, std::size_t a, std::size_t b) {
    const double dx = p.x[b] - p.x[a];
    if (dx == 0.0) {
        throw Error(ErrorKind::ZeroWidthSegment, "stencil points " + std::to_string(a) + " and " + std::to_string(b) +
                                                     " share their axis coordinate");
    }
    return std::atan((p.y[b] - p.y[a]) / dx);
}

} // namespace detail

/// Chord angles and tangent deviations from an explicit profile.
inline StencilAngles profile_angles(const StencilProfile &p) {
    StencilAngles a;
    a.F1 = detail::profile_angle(p, 1, 2);
    a.y0_missing = std::isnan(p.x[0]);
    a.y3_missing = std::isnan(p.x[3]);
    a.F0 = a.y0_missing ? a.F1 : detail::profile_angle(p, 0, 1);
    a.F2 = a.y3_missing ? a.F1 : detail::profile_angle(p, 2, 3);
    a.Fg1 = a.y0_missing ? 0.0 : (a.F0 - a.F1) / 2.0;
    a.Fg2 = a.y3_missing ? 0.0 : (a.F1 - a.F2) / 2.0;
    return a;
}

/**
 * @brief Axis profile of a stencil.
 *
 * When `lateral` is given, each outcome is shifted by -sum_j p_j (x_kj - x_rj)
 * over the other axes j, which removes the part of y explained by a stencil
 * point sitting off the axis line through the reference (jittered meshes).
 */
inline StencilProfile stencil_profile(const TrainingSet &ts, const Stencil1D &st, std::size_t reference,
                                      std::size_t layer = 0, std::span<const double> lateral = {}) {
    StencilProfile p;
    const auto xr = ts.coords(reference);
    for (std::size_t k = 0; k < 4; ++k) {
        if (!st.has(k)) {
            p.x[k] = p.y[k] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const auto xk = ts.coords(st.points[k]);
        p.x[k] = xk[st.axis];
        p.y[k] = ts.outcome(st.points[k], layer);
        for (std::size_t j = 0; j < lateral.size(); ++j) {
            if (j != st.axis) {
                p.y[k] -= lateral[j] * (xk[j] - xr[j]);
            }
        }
    }
    return p;
}

/**
 * @brief Chord angles of Y0Y1, Y1Y2, Y2Y3 and the tangent deviations at Y1, Y2.
 *
 * The tangent at each interior node bisects its two chords. Fg1 and Fg2 are
 * measured so that tan(Fg1) is the slope of A at 0 and -tan(Fg2) its slope at
 * B. A missing outer point zeroes the deviation on that side.
 */
inline StencilAngles segment_angles(const TrainingSet &ts, const Stencil1D &st, std::size_t layer = 0) {
    if (!st.has(1) || !st.has(2)) {
        throw Error(ErrorKind::InvalidArgument, "stencil needs both Y1 and Y2");
    }
    return profile_angles(stencil_profile(ts, st, st.points[1], layer));
}

// ============================================================================
// Intersection of the query line with the approximant
// ============================================================================

/// The vertical query line, expressed in the rotated frame as y = k x + c.
struct IntersectionProblem {
    ApproxFunctionParams params;
    double F1 = 0.0;
    double x_p = 0.0;
    double k = 0.0;
    double c = 0.0;
    double x0 = 0.0;
    bool trivial = false; ///< chord is level; the query line stays vertical
};

inline constexpr double kLevelChord = 1e-12;

/**
 * @brief Rotated-frame setup for one axis.
 *
 * @param h  raw axis distance from Y1 to Y2
 * @param u  raw axis offset of the query from Y1
 */
inline IntersectionProblem build_intersection(const StencilAngles &a, double h, double u, double d = 1.0) {
    if (!(std::abs(a.F1) < std::numbers::pi / 2.0)) {
        throw Error(ErrorKind::InvalidArgument, "chord angle must lie strictly inside (-pi/2, pi/2)");
    }
    IntersectionProblem p;
    const double cf = std::cos(a.F1);
    p.params = make_approx_params(h / cf, std::tan(a.Fg1), std::tan(a.Fg2), d);
    p.F1 = a.F1;
    p.x_p = u / cf;
    const double t = std::tan(a.F1);
    if (std::abs(t) < kLevelChord) {
        p.trivial = true;
        p.x0 = p.x_p;
        return p;
    }
    p.k = 1.0 / t;
    p.c = -p.k * p.x_p;
    const bool inside = p.x_p >= 0.0 && p.x_p <= p.params.B;
    p.x0 = inside ? p.x_p + approx_eval(p.params, p.x_p) * t : p.x_p;
    return p;
}

struct IntersectionPoint {
    double x = 0.0;
    double y = 0.0;
    int iterations = 0;
    RootMethod method = RootMethod::Newton;
};

/// Solves A(x) = k x + c on [0, B] by Newton from x0 (bisection fallback).
inline IntersectionPoint solve_intersection(const IntersectionProblem &p, double tolerance = 1e-9, int max_iterations = 20) {
    if (!(p.x_p >= 0.0 && p.x_p <= p.params.B)) {
        throw Error(ErrorKind::InvalidArgument, "query foot point lies outside the segment");
    }
    if (p.trivial) {
        return {p.x_p, approx_eval(p.params, p.x_p), 0, RootMethod::Newton};
    }
    RootProblem rp;
    rp.f = [&](double x) { return approx_eval(p.params, x) - p.k * x - p.c; };
    rp.df = [&](double x) { return approx_derivative(p.params, x) - p.k; };
    rp.x0 = p.x0;
    rp.tolerance = tolerance;
    rp.max_iterations = max_iterations;
    rp.bracket = std::pair{0.0, p.params.B};
    const RootResult r = find_root(rp);
    return {r.x, approx_eval(p.params, r.x), r.iterations, r.method};
}

struct AdjustResult {
    double g_cor = 0.0;
    bool limit = false; ///< intersection sat on Y2; F2C taken as its limit
};

/// Slope of the line through Y2 and the intersection point, in raw units.
inline AdjustResult adjust_gradient(double F1, double x_star, double y_star, double B) {
    AdjustResult r;
    const double run = B - x_star;
    double f2c = 0.0;
    if (run <= 1e-12 * B) {
        r.limit = true;
        f2c = y_star > 0.0 ? std::numbers::pi / 2.0 : (y_star < 0.0 ? -std::numbers::pi / 2.0 : 0.0);
    } else {
        f2c = std::atan(y_star / run);
    }
    r.g_cor = std::tan(F1 - f2c);
    return r;
}

// ============================================================================
// Full estimate
// ============================================================================

struct SmoothOptions {
    double d = 1.0;
    double tolerance = 1e-9;
    int max_iterations = 20;
};

struct AdjustedGradients {
    std::vector<double> g_cor;      ///< slope of the corrected line per axis
    std::vector<double> increments; ///< y change contributed by each axis
    std::vector<AxisFlag> flags;
    std::vector<int> iterations;
    bool inflection_warning = false;
};

namespace detail {

/// True if any stencil point leaves the axis line through the reference.
inline bool off_axis(const TrainingSet &ts, const Stencil1D &st, std::size_t reference) {
    const auto xr = ts.coords(reference);
    for (std::size_t k = 0; k < 4; ++k) {
        if (!st.has(k)) {
            continue;
        }
        const auto xk = ts.coords(st.points[k]);
        for (std::size_t j = 0; j < xr.size(); ++j) {
            if (j != st.axis && xk[j] != xr[j]) {
                return true;
            }
        }
    }
    return false;
}

} // namespace detail

/**
 * @brief Per-axis corrected increments for a query.
 *
 * The corrected line passes through Y2 with slope g_cor, so the increment
 * from the reference is (y2 - y1) + g_cor (u - h). Axes whose stencil or
 * intersection cannot be completed use the plain chord slope. On jittered
 * meshes the stencil outcomes are first moved onto the axis line with the
 * reference simplex gradients.
 */
inline AdjustedGradients adjust_axes(const TrainingSet &ts, const MeshIndex &mesh, std::size_t reference,
                                     std::span<const double> q, const SmoothOptions &opt, std::size_t layer = 0) {
    const std::size_t n = ts.dim();
    std::vector<Stencil1D> stencils;
    stencils.reserve(n);
    bool jittered = false;
    for (std::size_t axis = 0; axis < n; ++axis) {
        stencils.push_back(axis_stencil(ts, mesh, reference, q, axis));
        jittered = jittered || detail::off_axis(ts, stencils.back(), reference);
    }
    std::vector<double> lateral;
    if (jittered) {
        lateral = estimate_gradients(ts, select_simplex(ts, &mesh, q, reference), layer).p;
    }

    AdjustedGradients out;
    for (std::size_t axis = 0; axis < n; ++axis) {
        const Stencil1D &st = stencils[axis];
        const StencilProfile prof = stencil_profile(ts, st, reference, layer, lateral);
        const double xr = prof.x[1];
        const double yr = prof.y[1];
        const double u = q[axis] - xr;

        if (!st.has(2)) {
            // Upper edge: only the backward chord is available.
            double slope = 0.0;
            if (st.has(0)) {
                slope = std::tan(detail::profile_angle(prof, 0, 1));
            }
            out.g_cor.push_back(slope);
            out.increments.push_back(slope * u);
            out.flags.push_back(AxisFlag::BoundaryFallback);
            out.iterations.push_back(0);
            continue;
        }

        const StencilAngles ang = profile_angles(prof);
        const double h = prof.x[2] - xr;
        const double y2 = prof.y[2];
        const double chord = (y2 - yr) / h;
        AxisFlag flag = (ang.y0_missing || ang.y3_missing) ? AxisFlag::BoundaryFallback : AxisFlag::Corrected;

        const IntersectionProblem prob = build_intersection(ang, h, u, opt.d);
        if (opt.d > 1.0 && inflection_warning(prob.params)) {
            out.inflection_warning = true;
        }
        if (!(prob.x_p >= 0.0 && prob.x_p <= prob.params.B)) {
            out.g_cor.push_back(chord);
            out.increments.push_back(chord * u);
            out.flags.push_back(AxisFlag::NewtonFallback);
            out.iterations.push_back(0);
            continue;
        }
        try {
            const IntersectionPoint ip = solve_intersection(prob, opt.tolerance, opt.max_iterations);
            const AdjustResult adj = adjust_gradient(ang.F1, ip.x, ip.y, prob.params.B);
            out.g_cor.push_back(adj.g_cor);
            out.increments.push_back(adj.limit ? (y2 - yr) : (y2 - yr) + adj.g_cor * (u - h));
            out.flags.push_back(flag);
            out.iterations.push_back(ip.iterations);
        } catch (const Error &e) {
            if (e.kind() != ErrorKind::NoConvergence) {
                throw;
            }
            out.g_cor.push_back(chord);
            out.increments.push_back(chord * u);
            out.flags.push_back(AxisFlag::NewtonFallback);
            out.iterations.push_back(opt.max_iterations);
        }
    }
    return out;
}

/// Smooth-surface estimate on mesh data: y_ref plus the corrected per-axis increments.
inline Estimate evaluate_smooth(const TrainingSet &ts, const MeshIndex &mesh, std::span<const double> q,
                                const SmoothOptions &opt = {}, std::size_t layer = 0) {
    validate_query(q, ts.dim());
    if (mesh.dim() != ts.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "mesh and training set dimensions differ");
    }
    if (layer >= ts.layer_count()) {
        throw Error(ErrorKind::InvalidArgument, "layer index out of range");
    }
    const std::size_t reference = locate_reference(ts, &mesh, q);
    const AdjustedGradients adj = adjust_axes(ts, mesh, reference, q, opt, layer);
    Estimate est;
    est.method = Method::Smooth;
    est.reference = reference;
    est.value = ts.outcome(reference, layer);
    for (double inc : adj.increments) {
        est.value += inc;
    }
    est.diagnostics.axis_flags = adj.flags;
    est.diagnostics.newton_iterations = adj.iterations;
    est.diagnostics.inflection_warning = adj.inflection_warning;
    est.diagnostics.extrapolated = !ts.contains(q);
    return est;
}

} // namespace locus

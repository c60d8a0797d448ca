#pragma once

#include "locus/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace locus {

/// Dense row-major matrix, sized for the n <= ~100 systems the methods build.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> rows) : rows_(rows.size()) {
        cols_ = rows.size() == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto &r : rows) {
            if (r.size() != cols_) {
                throw Error(ErrorKind::DimensionMismatch, "ragged matrix initializer");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> multiply(std::span<const double> x) const {
        std::vector<double> out(rows_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols_; ++c) {
                s += (*this)(r, c) * x[c];
            }
            out[r] = s;
        }
        return out;
    }

    void swap_rows(std::size_t a, std::size_t b) {
        if (a == b) {
            return;
        }
        std::swap_ranges(data_.begin() + static_cast<std::ptrdiff_t>(a * cols_),
                         data_.begin() + static_cast<std::ptrdiff_t>((a + 1) * cols_),
                         data_.begin() + static_cast<std::ptrdiff_t>(b * cols_));
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct LinearSystem {
    Matrix a;
    std::vector<double> b;
};

struct LinearSolution {
    std::vector<double> x;
    double residual = 0.0; ///< max-norm of A x - b against the original system
};

/// Pivots smaller than this fraction of their row's largest original entry
/// mark the system singular.
inline constexpr double kSingularThreshold = 1e-12;

inline double residual_inf(const Matrix &a, std::span<const double> x, std::span<const double> b) {
    double r = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = -b[i];
        for (std::size_t j = 0; j < a.cols(); ++j) {
            s += a(i, j) * x[j];
        }
        r = std::max(r, std::abs(s));
    }
    return r;
}

/**
 * @brief Gauss elimination with scaled partial pivoting.
 *
 * Throws Error(SingularSystem) when a pivot falls below kSingularThreshold
 * times the largest magnitude of its original row. Callers treat that as a
 * degenerate neighborhood and try another point combination.
 */
inline LinearSolution solve_linear_system(const LinearSystem &sys) {
    const std::size_t n = sys.a.rows();
    if (sys.a.cols() != n) {
        throw Error(ErrorKind::DimensionMismatch, "linear system matrix is not square");
    }
    if (sys.b.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "right-hand side length does not match matrix");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (double v : sys.a.row(i)) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::NonFiniteValue, "linear system matrix has a non-finite entry");
            }
        }
        if (!std::isfinite(sys.b[i])) {
            throw Error(ErrorKind::NonFiniteValue, "right-hand side has a non-finite entry");
        }
    }

    Matrix a = sys.a;
    std::vector<double> b = sys.b;
    std::vector<double> scale(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (double v : a.row(i)) {
            scale[i] = std::max(scale[i], std::abs(v));
        }
    }

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = -1.0;
        for (std::size_t i = k; i < n; ++i) {
            const double rel = scale[i] > 0.0 ? std::abs(a(i, k)) / scale[i] : 0.0;
            if (rel > best) {
                best = rel;
                p = i;
            }
        }
        if (!(best >= kSingularThreshold)) {
            throw Error(ErrorKind::SingularSystem, "pivot " + std::to_string(k) + " vanishes");
        }
        a.swap_rows(k, p);
        std::swap(b[k], b[p]);
        std::swap(scale[k], scale[p]);

        const double pivot = a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double factor = a(i, k) / pivot;
            if (factor == 0.0) {
                continue;
            }
            a(i, k) = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) {
                a(i, j) -= factor * a(k, j);
            }
            b[i] -= factor * b[k];
        }
    }

    std::vector<double> x(n, 0.0);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) {
            s -= a(ii, j) * x[j];
        }
        x[ii] = s / a(ii, ii);
    }
    return {x, residual_inf(sys.a, x, sys.b)};
}

// ============================================================================
// Safeguarded Newton-Raphson
// ============================================================================

struct RootProblem {
    std::function<double(double)> f;
    std::function<double(double)> df;
    double x0 = 0.0;
    double tolerance = 1e-9;
    int max_iterations = 20;
    std::optional<std::pair<double, double>> bracket;
};

enum class RootMethod { Newton, Bisection };

struct RootResult {
    double x = 0.0;
    int iterations = 0;
    RootMethod method = RootMethod::Newton;
    double residual = 0.0; ///< |f(x)|
};

namespace detail {

/// Finds a sign-changing sub-interval of [lo, hi], preferring the one closest
/// to the hint. Returns nullopt if none exists at the scan resolution.
template <typename F>
std::optional<std::pair<double, double>> sign_change(const F &f, double lo, double hi, double hint, int cells = 64) {
    const double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) {
        return std::pair{lo, lo};
    }
    if (fhi == 0.0) {
        return std::pair{hi, hi};
    }
    std::optional<std::pair<double, double>> best;
    double best_dist = 0.0;
    double a = lo;
    double fa = flo;
    for (int i = 1; i <= cells; ++i) {
        const double b = (i == cells) ? hi : lo + (hi - lo) * static_cast<double>(i) / cells;
        const double fb = (i == cells) ? fhi : f(b);
        if ((fa < 0.0) != (fb < 0.0) || fb == 0.0) {
            const double dist = std::max(0.0, std::max(a - hint, hint - b));
            if (!best || dist < best_dist) {
                best = std::pair{a, b};
                best_dist = dist;
            }
        }
        a = b;
        fa = fb;
    }
    return best;
}

} // namespace detail

/**
 * @brief Newton-Raphson from x0, falling back to bisection.
 *
 * Convergence is declared when the Newton correction |f/f'| at the current
 * iterate is at most the tolerance. If the derivative vanishes, an iterate leaves the bracket, or the
 * iteration budget runs out, bisection runs on a sign-changing sub-interval of
 * the bracket nearest x0.
 */
inline RootResult find_root(const RootProblem &p) {
    if (!(p.tolerance > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "root tolerance must be positive");
    }
    if (p.max_iterations < 1) {
        throw Error(ErrorKind::InvalidArgument, "root iteration budget must be at least 1");
    }
    if (!p.f || !p.df) {
        throw Error(ErrorKind::InvalidArgument, "root problem needs f and df");
    }
    if (p.bracket && !(p.bracket->first <= p.bracket->second)) {
        throw Error(ErrorKind::InvalidArgument, "root bracket is inverted");
    }

    double x = p.x0;
    if (p.bracket) {
        x = std::clamp(x, p.bracket->first, p.bracket->second);
    }
    double fx = p.f(x);
    if (fx == 0.0) {
        return {x, 0, RootMethod::Newton, 0.0};
    }

    // Converged once the Newton correction at the current iterate, an
    // estimate of its distance to the root, is within tolerance.
    int it = 0;
    while (std::isfinite(fx)) {
        const double d = p.df(x);
        if (!std::isfinite(d) || d == 0.0) {
            break;
        }
        const double step = fx / d;
        if (std::abs(step) <= p.tolerance) {
            return {x, it, RootMethod::Newton, std::abs(fx)};
        }
        const double xn = x - step;
        if (it == p.max_iterations || !std::isfinite(xn)) {
            break;
        }
        if (p.bracket && (xn < p.bracket->first || xn > p.bracket->second)) {
            break;
        }
        ++it;
        x = xn;
        fx = p.f(x);
        if (fx == 0.0) {
            return {x, it, RootMethod::Newton, 0.0};
        }
    }

    if (!p.bracket) {
        throw Error(ErrorKind::NoConvergence, "Newton iteration failed and no bracket was supplied");
    }
    auto sub = detail::sign_change(p.f, p.bracket->first, p.bracket->second, p.x0);
    if (!sub) {
        throw Error(ErrorKind::NoConvergence, "Newton iteration failed and the bracket has no sign change");
    }
    double lo = sub->first;
    double hi = sub->second;
    double flo = p.f(lo);
    while (hi - lo > p.tolerance && it < p.max_iterations + 200) {
        const double mid = 0.5 * (lo + hi);
        const double fm = p.f(mid);
        ++it;
        if (fm == 0.0) {
            lo = hi = mid;
            break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    const double root = 0.5 * (lo + hi);
    return {root, it, RootMethod::Bisection, std::abs(p.f(root))};
}

} // namespace locus

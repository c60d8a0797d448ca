#include "locus/solver.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace locus;

TEST(Solver, TwoByTwo) {
    const auto s = solve_linear_system({Matrix{{2, 1}, {1, 3}}, {3, 5}});
    EXPECT_NEAR(s.x[0], 0.8, 1e-15);
    EXPECT_NEAR(s.x[1], 1.4, 1e-15);
    EXPECT_LE(s.residual, 1e-14);
}

TEST(Solver, IdentityReturnsRhs) {
    const auto s = solve_linear_system({Matrix::identity(3), {1, 2, 3}});
    EXPECT_EQ(s.x, (std::vector<double>{1, 2, 3}));
}

TEST(Solver, SingularThrows) {
    try {
        solve_linear_system({Matrix{{1, 2}, {2, 4}}, {1, 2}});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularSystem);
    }
}

TEST(Solver, NeedsPivoting) {
    const auto s = solve_linear_system({Matrix{{0, 1}, {1, 0}}, {2, 3}});
    EXPECT_DOUBLE_EQ(s.x[0], 3.0);
    EXPECT_DOUBLE_EQ(s.x[1], 2.0);
}

TEST(Solver, ValidatesShape) {
    EXPECT_THROW(solve_linear_system({Matrix(2, 3), {1, 2}}), Error);
    EXPECT_THROW(solve_linear_system({Matrix(2, 2), {1}}), Error);
    EXPECT_THROW(solve_linear_system({Matrix{{1, NAN}, {0, 1}}, {1, 1}}), Error);
}

TEST(Solver, RandomSystemsMatchOracle) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (std::size_t n : {2u, 5u, 17u, 60u, 100u}) {
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<std::vector<double>> a(n, std::vector<double>(n));
            Matrix m(n, n);
            std::vector<double> b(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    a[i][j] = m(i, j) = g(rng);
                }
                b[i] = g(rng);
            }
            const auto s = solve_linear_system({m, b});
            const auto ref = oracle::solve(a, b);
            ASSERT_TRUE(ref.has_value());
            double scale = 0.0;
            for (double v : *ref) {
                scale = std::max(scale, std::abs(v));
            }
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_NEAR(s.x[i], (*ref)[i], 1e-8 * (1.0 + scale)) << "n=" << n;
            }
            EXPECT_LE(s.residual, 1e-10 * n);
        }
    }
}

TEST(Solver, BadlyScaledRowsStayAccurate) {
    // Rows differing by 1e8 in scale: scaled pivoting keeps the answer exact.
    const auto s = solve_linear_system({Matrix{{1e-8, 2e-8}, {3, 1}}, {5e-8, 5}});
    EXPECT_NEAR(s.x[0], 1.0, 1e-12);
    EXPECT_NEAR(s.x[1], 2.0, 1e-12);
}

TEST(FindRoot, NewtonOnQuadratic) {
    RootProblem p;
    p.f = [](double x) { return x * x - 2.0; };
    p.df = [](double x) { return 2.0 * x; };
    p.x0 = 1.5;
    const auto r = find_root(p);
    EXPECT_EQ(r.method, RootMethod::Newton);
    // Stops once the next correction is within tolerance, so the error is bounded by it.
    EXPECT_NEAR(r.x, std::sqrt(2.0), p.tolerance);
    EXPECT_LE(r.iterations, 5);
}

TEST(FindRoot, ExactStartNeedsNoIterations) {
    RootProblem p;
    p.f = [](double x) { return x - 1.0; };
    p.df = [](double) { return 1.0; };
    p.x0 = 1.0;
    const auto r = find_root(p);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.x, 1.0);
}

TEST(FindRoot, ZeroDerivativeFallsBackToBisection) {
    RootProblem p;
    p.f = [](double x) { return x * x * x - 0.125; };
    p.df = [](double x) { return 3.0 * x * x; };
    p.x0 = 0.0;
    p.bracket = std::pair{-1.0, 1.0};
    const auto r = find_root(p);
    EXPECT_EQ(r.method, RootMethod::Bisection);
    EXPECT_NEAR(r.x, 0.5, 1e-9);
}

TEST(FindRoot, LeavingBracketFallsBack) {
    RootProblem p;
    p.f = [](double x) { return std::atan(x - 0.3); };
    p.df = [](double x) { return 1.0 / (1.0 + (x - 0.3) * (x - 0.3)); };
    p.x0 = 3.0; // Newton on atan diverges from here
    p.bracket = std::pair{-10.0, 10.0};
    const auto r = find_root(p);
    EXPECT_NEAR(r.x, 0.3, 1e-9);
}

TEST(FindRoot, NoSignChangeIsNoConvergence) {
    RootProblem p;
    p.f = [](double x) { return x * x + 1.0; };
    p.df = [](double x) { return 2.0 * x; };
    p.x0 = 0.5;
    p.bracket = std::pair{-1.0, 1.0};
    try {
        find_root(p);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoConvergence);
    }
}

TEST(FindRoot, UnbracketedFailureThrows) {
    RootProblem p;
    p.f = [](double x) { return x * x + 1.0; };
    p.df = [](double x) { return 2.0 * x; };
    p.x0 = 0.0;
    EXPECT_THROW(find_root(p), Error);
}

TEST(FindRoot, RejectsBadArguments) {
    RootProblem p;
    p.f = [](double x) { return x; };
    p.df = [](double) { return 1.0; };
    p.tolerance = 0.0;
    EXPECT_THROW(find_root(p), Error);
    p.tolerance = 1e-9;
    p.max_iterations = 0;
    EXPECT_THROW(find_root(p), Error);
}

TEST(FindRoot, BisectionPrefersIntervalNearStart) {
    // Roots at 0.2 and 0.8; Newton is blocked by a zero derivative, so the
    // fallback should pick the root near the start point.
    RootProblem p;
    p.f = [](double x) { return (x - 0.2) * (x - 0.8); };
    p.df = [](double) { return 0.0; };
    p.x0 = 0.75;
    p.bracket = std::pair{0.0, 1.0};
    EXPECT_NEAR(find_root(p).x, 0.8, 1e-9);
}

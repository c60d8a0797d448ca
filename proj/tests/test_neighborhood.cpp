#include "locus/bench.hpp"
#include "locus/neighborhood.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

using namespace locus;

namespace {

struct Grid {
    TrainingSet ts;
    MeshIndex mesh;
};

Grid grid(std::vector<std::vector<double>> axes, double jitter = 0.0, std::uint64_t seed = 1) {
    const std::size_t n = axes.size();
    auto mesh = MeshIndex::full_grid(axes, jitter);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> coords;
    std::vector<double> ys;
    std::vector<std::size_t> g(n, 0);
    for (std::size_t i = 0; i < mesh.point_count(); ++i) {
        double y = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            double x = axes[a][g[a]] + u(rng) * mesh.max_offset(a, g[a]);
            coords.push_back(x);
            y += x;
        }
        ys.push_back(y);
        for (std::size_t a = n; a-- > 0;) {
            if (++g[a] < axes[a].size()) {
                break;
            }
            g[a] = 0;
        }
    }
    return {TrainingSet::from_flat(n, 1, coords, ys), std::move(mesh)};
}

std::vector<double> at(const TrainingSet &ts, std::size_t i) {
    auto c = ts.coords(i);
    return {c.begin(), c.end()};
}

} // namespace

TEST(LocateReference, MeshLowerCorner) {
    auto g = grid({{0, 1, 2}, {0, 1, 2}, {0, 1, 2}});
    const std::vector<double> q{0.4, 1.7, 0.3};
    const auto r = locate_reference(g.ts, &g.mesh, q);
    EXPECT_EQ(at(g.ts, r), (std::vector<double>{0, 1, 0}));
}

TEST(LocateReference, QueryOnNodeIsThatNode) {
    auto g = grid({{0, 1, 2}, {0, 1, 2}});
    for (std::size_t i = 0; i < g.ts.size(); ++i) {
        EXPECT_EQ(locate_reference(g.ts, &g.mesh, g.ts.coords(i)), i);
    }
}

TEST(LocateReference, ScatteredUsesNormalizedDistance) {
    std::vector<Point> pts{Point({0, 0}, 1.0), Point({10, 0}, 2.0), Point({2, 1}, 3.0)};
    const auto ts = validate_training_set(pts, 2);
    EXPECT_EQ(locate_reference(ts, nullptr, std::vector<double>{4, 0}), 0u);
    // x spans 10 and y spans 1: raw distance would pick (0,0) here.
    EXPECT_EQ(locate_reference(ts, nullptr, std::vector<double>{0, 0.6}), 2u);
}

TEST(LocateReference, EmptyTrainingSet) {
    TrainingSet empty;
    try {
        locate_reference(empty, nullptr, std::vector<double>{});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyTrainingSet);
    }
}

TEST(LocateReference, Deterministic) {
    auto g = grid({{0, 1, 2, 3}, {0, 1, 2, 3}}, 0.3);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> q{u(rng), u(rng)};
        EXPECT_EQ(locate_reference(g.ts, nullptr, q), locate_reference(g.ts, nullptr, q));
        EXPECT_EQ(locate_reference(g.ts, &g.mesh, q), locate_reference(g.ts, &g.mesh, q));
    }
}

TEST(SelectSimplex, MeshForwardNeighbors) {
    auto g = grid({{0, 1, 2}, {0, 1, 2}, {0, 1, 2}});
    const std::vector<double> q{0.3, 0.4, 0.45};
    const auto r = locate_reference(g.ts, &g.mesh, q);
    const auto s = select_simplex(g.ts, &g.mesh, q, r);
    ASSERT_EQ(s.auxiliary.size(), 3u);
    EXPECT_EQ(at(g.ts, s.reference), (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(at(g.ts, s.auxiliary[0]), (std::vector<double>{1, 0, 0}));
    EXPECT_EQ(at(g.ts, s.auxiliary[1]), (std::vector<double>{0, 1, 0}));
    EXPECT_EQ(at(g.ts, s.auxiliary[2]), (std::vector<double>{0, 0, 1}));
}

TEST(SelectSimplex, UpperEdgeUsesBackwardNeighbor) {
    auto g = grid({{0, 1, 2}, {0, 1, 2}});
    const std::vector<double> q{2.0, 0.5};
    const auto r = locate_reference(g.ts, &g.mesh, q);
    const auto s = select_simplex(g.ts, &g.mesh, q, r);
    EXPECT_EQ(at(g.ts, s.auxiliary[0]), (std::vector<double>{1, 0}));
}

TEST(SelectSimplex, CollinearScatteredIsDegenerate) {
    std::vector<Point> pts;
    for (int i = 0; i < 8; ++i) {
        pts.emplace_back(std::vector<double>{double(i), 2.0 * i}, double(i));
    }
    const auto ts = validate_training_set(pts, 2);
    const std::vector<double> q{2.5, 5.0};
    try {
        select_simplex(ts, nullptr, q, locate_reference(ts, nullptr, q));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateNeighborhood);
    }
}

TEST(SelectSimplex, ScatteredSkipsRankDeficientCandidates) {
    // Nearest candidates line up with the reference; the simplex must reach
    // past them to a point off the line.
    std::vector<Point> pts{Point({0, 0}, 0.0), Point({0.1, 0}, 0.0), Point({0.2, 0}, 0.0), Point({-0.1, 0}, 0.0),
                           Point({0.05, 1}, 0.0), Point({5, 5}, 0.0)};
    const auto ts = validate_training_set(pts, 2);
    const std::vector<double> q{0.01, 0.0};
    const auto s = select_simplex(ts, nullptr, q, locate_reference(ts, nullptr, q));
    EXPECT_EQ(s.reference, 0u);
    EXPECT_NE(std::find(s.auxiliary.begin(), s.auxiliary.end(), 4u), s.auxiliary.end());
}

TEST(SelectSimplex, Figure1ConfigurationsAreValid) {
    // Four points around a query in the plane; any 3-subset is a valid simplex.
    std::vector<Point> pts{Point({0, 0}, 1.0), Point({1, 0.1}, 2.0), Point({0.1, 1}, 3.0), Point({1.1, 1.2}, 4.0)};
    const auto ts = validate_training_set(pts, 2);
    const std::vector<double> q{0.45, 0.5};
    const auto s = select_simplex(ts, nullptr, q, 0);
    EXPECT_EQ(s.auxiliary.size(), 2u);
    EXPECT_TRUE(detail::nonsingular(ts, Simplex{0, {1, 2}}));
    EXPECT_TRUE(detail::nonsingular(ts, Simplex{0, {2, 3}}));
}

TEST(EnumerateCombinations, SingleIsSelectSimplex) {
    auto g = grid({{0, 1, 2, 3}, {0, 1, 2, 3}});
    const std::vector<double> q{1.3, 1.4};
    const auto plan = enumerate_combinations(g.ts, &g.mesh, q, 1);
    ASSERT_EQ(plan.size(), 1u);
    EXPECT_EQ(plan.simplexes[0], select_simplex(g.ts, &g.mesh, q, locate_reference(g.ts, &g.mesh, q)));
}

TEST(EnumerateCombinations, FourPointsGiveFourSubsets) {
    std::vector<Point> pts{Point({0, 0}, 1.0), Point({1, 0.1}, 2.0), Point({0.1, 1}, 3.0), Point({1.1, 1.2}, 4.0)};
    const auto ts = validate_training_set(pts, 2);
    const std::vector<double> q{0.45, 0.5};
    const auto plan = enumerate_combinations(ts, nullptr, q, 4);
    ASSERT_EQ(plan.size(), 4u);
    std::set<std::vector<std::size_t>> vertex_sets;
    for (const auto &s : plan.simplexes) {
        auto k = s.key();
        std::sort(k.begin(), k.end());
        vertex_sets.insert(k);
    }
    EXPECT_EQ(vertex_sets.size(), 4u);
}

TEST(EnumerateCombinations, ExhaustionThrows) {
    std::vector<Point> pts{Point({0, 0}, 1.0), Point({1, 0.1}, 2.0), Point({0.1, 1}, 3.0), Point({1.1, 1.2}, 4.0)};
    const auto ts = validate_training_set(pts, 2);
    try {
        enumerate_combinations(ts, nullptr, std::vector<double>{0.45, 0.5}, 5);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InsufficientPoints);
    }
}

TEST(EnumerateCombinations, DistinctNonsingularAndOrdered) {
    auto g = grid({{0, 1, 2, 3, 4, 5, 6, 7, 8}, {0, 1, 2, 3, 4, 5, 6, 7, 8}, {0, 1, 2, 3, 4, 5, 6, 7, 8}}, 0.2);
    const std::vector<double> q{4.3, 4.4, 4.35};
    const auto plan = enumerate_combinations(g.ts, &g.mesh, q, 16);
    ASSERT_EQ(plan.size(), 16u);
    std::set<std::vector<std::size_t>> keys;
    for (const auto &s : plan.simplexes) {
        EXPECT_TRUE(detail::nonsingular(g.ts, s));
        keys.insert(s.key());
    }
    EXPECT_EQ(keys.size(), 16u);
    for (std::size_t i = 2; i < plan.size(); ++i) {
        EXPECT_LE(detail::aggregate_distance(g.ts, plan.simplexes[i - 1], q),
                  detail::aggregate_distance(g.ts, plan.simplexes[i], q) + 1e-12);
    }
}

TEST(EnumerateCombinations, HighDimensionUsesGreedyPath) {
    const std::size_t n = 8;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> pts;
    for (int i = 0; i < 400; ++i) {
        std::vector<double> x(n);
        for (auto &v : x) {
            v = u(rng);
        }
        pts.emplace_back(x, 0.0);
    }
    const auto ts = validate_training_set(pts, n);
    const std::vector<double> q(n, 0.5);
    const auto plan = enumerate_combinations(ts, nullptr, q, 6);
    std::set<std::vector<std::size_t>> keys;
    for (const auto &s : plan.simplexes) {
        EXPECT_TRUE(detail::nonsingular(ts, s));
        keys.insert(s.key());
    }
    EXPECT_EQ(keys.size(), 6u);
}

TEST(AxisStencil, InteriorCell) {
    auto g = grid({{0, 1, 2, 3}, {0, 1, 2}});
    const std::vector<double> q{1.4, 0.3};
    const auto r = locate_reference(g.ts, &g.mesh, q);
    const auto st = axis_stencil(g.ts, g.mesh, r, q, 0);
    ASSERT_TRUE(st.has(0) && st.has(3));
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(g.ts.coords(st.points[k])[0], double(k));
        EXPECT_EQ(g.ts.coords(st.points[k])[1], 0.0);
    }
}

TEST(AxisStencil, BoundaryFlagsMissingPoints) {
    auto g = grid({{0, 1, 2, 3}, {0, 1, 2}});
    const std::vector<double> q{0.4, 1.5};
    const auto r = locate_reference(g.ts, &g.mesh, q);
    const auto st0 = axis_stencil(g.ts, g.mesh, r, q, 0);
    EXPECT_FALSE(st0.has(0));
    EXPECT_TRUE(st0.has(3));
    const auto st1 = axis_stencil(g.ts, g.mesh, r, q, 1);
    EXPECT_TRUE(st1.has(0));
    EXPECT_FALSE(st1.has(3));
}

TEST(AxisStencil, JitteredStencilOrderedByActualCoordinate) {
    const std::vector<double> nodes{0, 1, 2, 3, 4, 5, 6};
    auto g = grid({nodes, nodes}, 0.45, 21);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> cell(1, 3);
    std::uniform_real_distribution<double> t(0.3, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<double> q{cell(rng) + t(rng), cell(rng) + t(rng)};
        const auto r = locate_reference(g.ts, &g.mesh, q);
        for (std::size_t axis = 0; axis < 2; ++axis) {
            const auto st = axis_stencil(g.ts, g.mesh, r, q, axis);
            std::vector<double> xs;
            for (auto p : st.points) {
                ASSERT_NE(p, npos);
                xs.push_back(g.ts.coords(p)[axis]);
            }
            auto sorted = xs;
            std::sort(sorted.begin(), sorted.end());
            EXPECT_EQ(xs, sorted);
            EXPECT_LT(xs[0], xs[1]);
            EXPECT_LT(xs[2], xs[3]);
        }
    }
}

TEST(AxisStencil, OrderingInvariantOnCleanMesh) {
    auto g = grid({{0, 1, 2, 3, 4}, {0, 1, 2, 3, 4}});
    const std::vector<double> q{2.35, 1.45};
    const auto r = locate_reference(g.ts, &g.mesh, q);
    for (std::size_t axis = 0; axis < 2; ++axis) {
        const auto st = axis_stencil(g.ts, g.mesh, r, q, axis);
        const auto x = [&](int k) { return g.ts.coords(st.points[k])[axis]; };
        EXPECT_LT(x(0), x(1));
        EXPECT_LE(x(1), q[axis]);
        EXPECT_LE(q[axis], x(2));
        EXPECT_LT(x(2), x(3));
    }
}

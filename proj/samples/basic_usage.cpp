// Reconstruct a few values of a 3-D surface from a 20-node mesh with both
// methods, then average noisy estimates over several point combinations.

#include "locus/locus.hpp"

#include <cstdio>
#include <vector>

int main() {
    using namespace locus;
    const auto f = bench::TestFunction::make(bench::FunctionId::S2);
    const auto data = bench::gen_mesh_dataset(f, 20, {1.0, 4.0}, 0.0, bench::NoiseSpec::none(), 7);

    const std::vector<std::vector<double>> queries{{1.7, 2.25, 3.1}, {2.05, 1.4, 3.62}, {3.3, 3.3, 1.9}};
    std::printf("%-22s %12s %12s %12s\n", "query", "truth", "gradient", "smooth");
    for (const auto &q : queries) {
        const double truth = f(q);
        const Estimate g = evaluate_gradient(data.training, &data.mesh, q);
        const Estimate s = evaluate_smooth(data.training, data.mesh, q);
        std::printf("(%.2f, %.2f, %.2f)     %12.8f %12.8f %12.8f\n", q[0], q[1], q[2], truth, g.value, s.value);
    }

    // Scattered affine data with outcome noise: averaging over combinations
    // pulls the estimate toward the noiseless plane.
    std::vector<Point> pts;
    auto rng = bench::make_rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int i = 0; i < 2000; ++i) {
        const double x = u(rng);
        const double y = u(rng);
        pts.emplace_back(std::vector<double>{x, y}, 1.0 + 2.0 * x - y + noise(rng));
    }
    const TrainingSet scattered = validate_training_set(pts, 2);
    const std::vector<double> q{0.4, 0.6};
    for (std::size_t c : {1, 4, 16}) {
        const Estimate e = evaluate_gradient(scattered, nullptr, q, c);
        std::printf("C=%-3zu estimate %.5f (plane 1.20000)\n", c, e.value);
    }
    return 0;
}

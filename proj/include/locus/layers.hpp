#pragma once

#include "locus/core.hpp"
#include "locus/gradient.hpp"
#include "locus/parallel.hpp"
#include "locus/smooth.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace locus {

struct EvalConfig {
    Method method = Method::Smooth;
    std::size_t combinations = 1;
    SmoothOptions smooth;
};

/// Scalar estimate of one outcome layer with the configured method. The
/// smooth method needs mesh structure.
inline Estimate evaluate(const TrainingSet &ts, const MeshIndex *mesh, std::span<const double> q, const EvalConfig &cfg,
                         std::size_t layer = 0) {
    if (cfg.method == Method::Smooth) {
        if (mesh == nullptr) {
            throw Error(ErrorKind::InvalidArgument, "the smooth method requires mesh-structured training data");
        }
        return evaluate_smooth(ts, *mesh, q, cfg.smooth, layer);
    }
    return evaluate_gradient(ts, mesh, q, cfg.combinations, layer);
}

/// One component per outcome layer; a failed layer carries its error instead.
struct LayerComponent {
    std::optional<Estimate> estimate;
    std::optional<ErrorKind> error;
    std::string message;

    bool ok() const noexcept { return estimate.has_value(); }
};

struct LayeredResult {
    std::vector<LayerComponent> components;

    std::size_t size() const noexcept { return components.size(); }

    /// Estimated values; throws if any layer failed.
    std::vector<double> values() const {
        std::vector<double> v;
        v.reserve(components.size());
        for (const auto &c : components) {
            if (!c.ok()) {
                throw Error(*c.error, c.message);
            }
            v.push_back(c.estimate->value);
        }
        return v;
    }
};

/**
 * @brief Evaluates every outcome layer independently at one query.
 *
 * Chaining derived datasets is composition: feed values() of one call as the
 * coordinates of a query against the next training set.
 */
inline LayeredResult evaluate_layers(const TrainingSet &ts, const MeshIndex *mesh, std::span<const double> q,
                                     const EvalConfig &cfg, std::size_t workers = 1) {
    validate_query(q, ts.dim());
    LayeredResult result;
    result.components = parallel_map<LayerComponent>(ts.layer_count(), workers, [&](std::size_t j) {
        LayerComponent c;
        try {
            c.estimate = evaluate(ts, mesh, q, cfg, j);
        } catch (const Error &e) {
            c.error = e.kind();
            c.message = e.what();
        }
        return c;
    });
    return result;
}

} // namespace locus

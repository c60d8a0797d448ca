#pragma once

#include "locus/bench.hpp"
#include "locus/core.hpp"
#include "locus/layers.hpp"
#include "locus/parallel.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace locus::io {

// ============================================================================
// CSV primitives
// ============================================================================

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) {
            return out;
        }
        start = comma + 1;
    }
}

inline double parse_number(std::string_view field, std::size_t line) {
    double v = 0.0;
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    const auto *end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc() || ptr != end) {
        throw ParseError(line, "not a number: '" + std::string(field) + "'");
    }
    return v;
}

/// Shortest representation that parses back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct Header {
    std::size_t n = 0;
    std::size_t layers = 0;
};

/// Accepts x1..xn followed by y or y1..ym (outcomes optional when allowed).
inline Header parse_header(std::string_view line, bool outcomes_required) {
    const auto cols = split(line);
    Header h;
    std::size_t i = 0;
    while (i < cols.size() && cols[i] == "x" + std::to_string(i + 1)) {
        ++i;
    }
    h.n = i;
    if (h.n == 0) {
        throw ParseError(1, "header must start with x1");
    }
    const std::size_t rest = cols.size() - i;
    if (rest == 1 && cols[i] == "y") {
        h.layers = 1;
    } else {
        for (std::size_t j = 0; j < rest; ++j) {
            if (cols[i + j] != "y" + std::to_string(j + 1)) {
                throw ParseError(1, "unexpected header column '" + std::string(cols[i + j]) + "'");
            }
        }
        h.layers = rest;
    }
    if (outcomes_required && h.layers == 0) {
        throw ParseError(1, "header has no outcome column");
    }
    return h;
}

struct Table {
    Header header;
    std::vector<double> coords;
    std::vector<double> outcomes;
    std::size_t rows = 0;
};

inline Table read_table(std::istream &in, bool outcomes_required) {
    std::string line;
    std::size_t lineno = 0;
    Table t;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        if (!have_header) {
            if (lineno == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
                line.erase(0, 3); // UTF-8 byte order mark
            }
            t.header = parse_header(line, outcomes_required);
            have_header = true;
            continue;
        }
        const auto cols = split(line);
        const std::size_t width = t.header.n + t.header.layers;
        if (cols.size() != width) {
            throw ParseError(lineno, "expected " + std::to_string(width) + " fields, got " + std::to_string(cols.size()));
        }
        for (std::size_t c = 0; c < t.header.n; ++c) {
            t.coords.push_back(parse_number(cols[c], lineno));
        }
        for (std::size_t c = t.header.n; c < width; ++c) {
            t.outcomes.push_back(parse_number(cols[c], lineno));
        }
        ++t.rows;
    }
    if (!have_header) {
        throw ParseError(lineno == 0 ? 1 : lineno, "file is empty");
    }
    return t;
}

inline std::ifstream open_in(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::InvalidArgument, "cannot open '" + path.string() + "'");
    }
    return in;
}

inline std::ofstream open_out(const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
    }
    return out;
}

inline void write_header(std::ostream &out, std::size_t n, std::size_t layers) {
    for (std::size_t a = 0; a < n; ++a) {
        out << (a ? "," : "") << 'x' << a + 1;
    }
    if (layers == 1) {
        out << ",y";
    } else {
        for (std::size_t j = 0; j < layers; ++j) {
            out << ",y" << j + 1;
        }
    }
}

} // namespace detail

// ============================================================================
// Datasets
// ============================================================================

struct LoadedDataset {
    TrainingSet training;
    std::optional<MeshIndex> mesh;
};

/// Default sidecar location: "<dataset>.mesh.json".
inline std::filesystem::path sidecar_path(const std::filesystem::path &dataset) {
    return std::filesystem::path(dataset.string() + ".mesh.json");
}

inline MeshIndex read_mesh_sidecar(const std::filesystem::path &path, const TrainingSet &ts) {
    auto in = detail::open_in(path);
    nlohmann::json j;
    try {
        in >> j;
        auto axes = j.at("axes").get<std::vector<std::vector<double>>>();
        const double jitter = j.value("jitter", 0.0);
        return MeshIndex::from_training(std::move(axes), jitter, ts);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(1, std::string("mesh sidecar: ") + e.what());
    }
}

inline void write_mesh_sidecar(const std::filesystem::path &path, const MeshIndex &mesh) {
    nlohmann::ordered_json j;
    j["axes"] = mesh.axes();
    j["jitter"] = mesh.jitter();
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

/**
 * @brief Recognizes an exact rectangular grid (every combination of the
 * distinct per-axis values present exactly once).
 */
inline std::optional<MeshIndex> infer_mesh(const TrainingSet &ts) {
    std::vector<std::vector<double>> axes(ts.dim());
    double product = 1.0;
    for (std::size_t a = 0; a < ts.dim(); ++a) {
        std::set<double> values;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            values.insert(ts.coords(i)[a]);
        }
        if (values.size() < 2) {
            return std::nullopt;
        }
        axes[a].assign(values.begin(), values.end());
        product *= static_cast<double>(values.size());
    }
    if (product != static_cast<double>(ts.size())) {
        return std::nullopt;
    }
    return MeshIndex::from_training(std::move(axes), 0.0, ts);
}

inline TrainingSet read_dataset(std::istream &in) {
    auto t = detail::read_table(in, true);
    return TrainingSet::from_flat(t.header.n, t.header.layers, std::move(t.coords), std::move(t.outcomes));
}

/// Reads a dataset CSV plus its mesh sidecar when one exists.
inline LoadedDataset load_dataset(const std::filesystem::path &path, std::optional<std::filesystem::path> sidecar = {}) {
    auto in = detail::open_in(path);
    LoadedDataset d{read_dataset(in), std::nullopt};
    const auto meta = sidecar.value_or(sidecar_path(path));
    if (sidecar || std::filesystem::exists(meta)) {
        d.mesh = read_mesh_sidecar(meta, d.training);
    }
    return d;
}

inline void write_dataset(std::ostream &out, const TrainingSet &ts) {
    detail::write_header(out, ts.dim(), ts.layer_count());
    out << '\n';
    for (std::size_t i = 0; i < ts.size(); ++i) {
        auto c = ts.coords(i);
        for (std::size_t a = 0; a < ts.dim(); ++a) {
            out << (a ? "," : "") << detail::format_number(c[a]);
        }
        for (double y : ts.outcomes(i)) {
            out << ',' << detail::format_number(y);
        }
        out << '\n';
    }
}

inline void save_dataset(const std::filesystem::path &path, const TrainingSet &ts, const MeshIndex *mesh = nullptr) {
    auto out = detail::open_out(path);
    write_dataset(out, ts);
    if (mesh != nullptr) {
        write_mesh_sidecar(sidecar_path(path), *mesh);
    }
}

/// Query coordinates; outcome columns, if present, are ignored.
inline std::vector<std::vector<double>> read_queries(std::istream &in) {
    auto t = detail::read_table(in, false);
    std::vector<std::vector<double>> q(t.rows);
    for (std::size_t r = 0; r < t.rows; ++r) {
        q[r].assign(t.coords.begin() + static_cast<std::ptrdiff_t>(r * t.header.n),
                    t.coords.begin() + static_cast<std::ptrdiff_t>((r + 1) * t.header.n));
    }
    return q;
}

// ============================================================================
// Run configuration and imputation
// ============================================================================

struct RunConfig {
    std::string command = "impute";
    Method method = Method::Smooth;
    std::size_t combinations = 1;
    double d = 1.0;
    double tolerance = 1e-9;
    int max_iterations = 20;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    std::string input;
    std::string queries;
    std::string output;
    std::string sidecar;
    std::string plot;
    std::string table = "T1";
    std::string scale = "small";
    std::size_t budget = 0;
    bool timing = true;

    EvalConfig eval() const {
        EvalConfig c;
        c.method = method;
        c.combinations = combinations;
        c.smooth = {d, tolerance, max_iterations};
        return c;
    }
};

struct ImputeRow {
    std::vector<double> query;
    LayeredResult result;
    Method method = Method::Gradient;
    bool method_fallback = false; ///< smooth requested but no mesh structure available
};

struct ImputeSummary {
    std::size_t rows = 0;
    std::size_t failed = 0;
};

/// Evaluates every query against the dataset; rows keep input order.
inline std::vector<ImputeRow> impute_rows(const LoadedDataset &data, const std::vector<std::vector<double>> &queries,
                                          const RunConfig &cfg) {
    EvalConfig ec = cfg.eval();
    const MeshIndex *mesh = data.mesh ? &*data.mesh : nullptr;
    bool fallback = false;
    if (ec.method == Method::Smooth && mesh == nullptr) {
        ec.method = Method::Gradient;
        fallback = true;
    }
    return parallel_map<ImputeRow>(queries.size(), cfg.workers, [&](std::size_t i) {
        ImputeRow row;
        row.query = queries[i];
        row.method = ec.method;
        row.method_fallback = fallback;
        try {
            validate_query(row.query, data.training.dim());
            row.result = evaluate_layers(data.training, mesh, row.query, ec);
        } catch (const Error &e) {
            LayerComponent c;
            c.error = e.kind();
            c.message = e.what();
            row.result.components.assign(data.training.layer_count(), c);
        }
        return row;
    });
}

inline std::string row_flags(const ImputeRow &row) {
    std::set<std::string> flags;
    if (row.method_fallback) {
        flags.insert("no-mesh");
    }
    for (const auto &c : row.result.components) {
        if (!c.ok()) {
            continue;
        }
        const auto &d = c.estimate->diagnostics;
        if (d.extrapolated) {
            flags.insert("extrapolated");
        }
        if (d.inflection_warning) {
            flags.insert("inflection");
        }
        for (AxisFlag f : d.axis_flags) {
            if (f != AxisFlag::Corrected) {
                flags.insert(std::string(to_string(f)));
            }
        }
    }
    std::string out;
    for (const auto &f : flags) {
        out += (out.empty() ? "" : ";") + f;
    }
    return out;
}

/// Output CSV: query coordinates, one column per layer, method, status, flags.
inline ImputeSummary write_impute(std::ostream &out, const std::vector<ImputeRow> &rows, std::size_t n, std::size_t layers) {
    detail::write_header(out, n, layers);
    out << ",method,status,flags\n";
    ImputeSummary s;
    for (const auto &row : rows) {
        ++s.rows;
        std::string status = "ok";
        for (std::size_t a = 0; a < n; ++a) {
            out << (a ? "," : "") << (a < row.query.size() ? detail::format_number(row.query[a]) : "");
        }
        for (const auto &c : row.result.components) {
            out << ',';
            if (c.ok()) {
                out << detail::format_number(c.estimate->value);
            } else if (status == "ok") {
                status = std::string(to_string(*c.error));
            }
        }
        if (status != "ok") {
            ++s.failed;
        }
        out << ',' << to_string(row.method) << ',' << status << ',' << row_flags(row) << '\n';
    }
    return s;
}

inline ImputeSummary impute(const RunConfig &cfg) {
    auto data = load_dataset(cfg.input, cfg.sidecar.empty() ? std::nullopt
                                                            : std::optional<std::filesystem::path>(cfg.sidecar));
    if (!data.mesh && cfg.method == Method::Smooth) {
        data.mesh = infer_mesh(data.training);
    }
    auto qin = detail::open_in(cfg.queries);
    const auto queries = read_queries(qin);
    const auto rows = impute_rows(data, queries, cfg);
    auto out = detail::open_out(cfg.output);
    return write_impute(out, rows, data.training.dim(), data.training.layer_count());
}

// ============================================================================
// Benchmark reports
// ============================================================================

inline nlohmann::ordered_json row_json(const bench::ScenarioRow &r, const bench::BenchReport &rep, bool timing) {
    nlohmann::ordered_json j;
    j["table"] = r.table;
    j["scenario"] = r.scenario;
    j["function"] = r.function;
    j["method"] = std::string(to_string(r.method));
    j["N"] = r.predictors + 1;
    j["predictors"] = r.predictors;
    j["nodes_per_axis"] = r.nodes;
    j["points"] = r.points;
    j["domain"] = {r.domain.lo, r.domain.hi};
    j["jitter"] = r.jitter;
    j["noise"] = r.noise;
    j["combinations"] = r.combinations;
    j["seed"] = rep.seed;
    j["scale"] = rep.scale;
    j["M"] = r.stats.M;
    j["avg_y_differ"] = r.stats.avg_y_differ;
    j["avg_abs_err"] = r.stats.avg_abs_err;
    j["max_abs_err"] = r.stats.max_abs_err;
    j["rel_err"] = r.stats.rel_err;
    if (r.ratio_to_gradient) {
        j["ratio_to_gradient"] = *r.ratio_to_gradient;
    }
    if (r.noise_ratios) {
        j["R1"] = r.noise_ratios->R1;
        j["R2"] = r.noise_ratios->R2;
        j["R1_capped"] = r.noise_ratios->r1_capped;
        j["R2_capped"] = r.noise_ratios->r2_capped;
    }
    j["fallback_axes"] = r.fallback_axes;
    if (timing) {
        j["timing"] = {{"wall_time", r.stats.wall_time},
                       {"per_query", r.stats.M ? r.stats.wall_time / static_cast<double>(r.stats.M) : 0.0}};
    }
    return j;
}

/// JSON Lines: one object per scenario, then one summary object.
inline void write_report(std::ostream &out, const bench::BenchReport &rep, bool timing) {
    for (const auto &r : rep.rows) {
        out << row_json(r, rep, timing).dump() << '\n';
    }
    nlohmann::ordered_json s;
    s["table"] = rep.table;
    s["scale"] = rep.scale;
    s["seed"] = rep.seed;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    for (const auto &[k, v] : rep.summary) {
        summary[k] = v;
    }
    s["summary"] = summary;
    out << s.dump() << '\n';
}

/// Plot-ready CSV of error against log10 of the training point count.
inline void write_plot_csv(std::ostream &out, const bench::BenchReport &rep) {
    out << "table,scenario,method,points,log10_points,avg_abs_err,rel_err\n";
    for (const auto &r : rep.rows) {
        out << r.table << ',' << r.scenario << ',' << to_string(r.method) << ',' << r.points << ','
            << detail::format_number(std::log10(static_cast<double>(r.points))) << ','
            << detail::format_number(r.stats.avg_abs_err) << ',' << detail::format_number(r.stats.rel_err) << '\n';
    }
}

inline bench::BenchReport bench(const RunConfig &cfg) {
    bench::BenchOptions opt;
    opt.workers = cfg.workers;
    opt.timing = cfg.timing;
    opt.query_budget = cfg.budget;
    auto rep = bench::run_benchmark(bench::table_from_string(cfg.table), bench::scale_from_string(cfg.scale), cfg.seed, opt);
    if (!cfg.output.empty()) {
        auto out = detail::open_out(cfg.output);
        write_report(out, rep, cfg.timing);
    }
    if (!cfg.plot.empty()) {
        auto out = detail::open_out(cfg.plot);
        write_plot_csv(out, rep);
    }
    return rep;
}

} // namespace locus::io

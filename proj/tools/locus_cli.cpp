// Command-line front end: evaluate single queries, impute a query file, or
// regenerate the benchmark tables.

#include "locus/locus.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kValidation = 2,
    kRuntime = 3,
    kRowsFailed = 4,
};

std::vector<double> parse_point(const std::string &text) {
    std::vector<double> x;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) {
        try {
            std::size_t used = 0;
            x.push_back(std::stod(field, &used));
            if (used != field.size()) {
                throw std::invalid_argument(field);
            }
        } catch (const std::exception &) {
            throw locus::Error(locus::ErrorKind::InvalidArgument, "bad query coordinate '" + field + "'");
        }
    }
    return x;
}

void add_method_flags(CLI::App &cmd, locus::io::RunConfig &cfg) {
    cmd.add_option_function<std::string>(
           "--method",
           [&cfg](const std::string &name) {
               cfg.method = name == "gradient" ? locus::Method::Gradient : locus::Method::Smooth;
           },
           "gradient or smooth")
        ->check(CLI::IsMember({"gradient", "smooth"}, CLI::ignore_case))
        ->default_str("smooth");
    cmd.add_option("--combinations", cfg.combinations, "point combinations averaged (gradient method)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--d-exponent", cfg.d, "shape exponent of the approximant")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--tolerance", cfg.tolerance, "Newton step tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--max-iter", cfg.max_iterations, "Newton iteration budget")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--sidecar", cfg.sidecar, "mesh metadata JSON (default <data>.mesh.json)");
}

int run_eval(const locus::io::RunConfig &cfg, const std::string &point) {
    auto data = locus::io::load_dataset(cfg.input, cfg.sidecar.empty() ? std::nullopt
                                                                      : std::optional<std::filesystem::path>(cfg.sidecar));
    if (!data.mesh && cfg.method == locus::Method::Smooth) {
        data.mesh = locus::io::infer_mesh(data.training);
    }
    const auto q = parse_point(point);
    const auto rows = locus::io::impute_rows(data, {q}, cfg);
    const auto &row = rows.front();
    nlohmann::ordered_json j;
    j["query"] = q;
    j["method"] = std::string(locus::to_string(row.method));
    std::vector<nlohmann::ordered_json> layers;
    int code = kOk;
    for (const auto &c : row.result.components) {
        nlohmann::ordered_json l;
        if (c.ok()) {
            const auto &e = *c.estimate;
            l["value"] = e.value;
            l["reference"] = e.reference;
            l["combinations"] = e.combinations;
            l["extrapolated"] = e.diagnostics.extrapolated;
            std::vector<std::string> flags;
            for (auto f : e.diagnostics.axis_flags) {
                flags.emplace_back(locus::to_string(f));
            }
            if (!flags.empty()) {
                l["axis_flags"] = flags;
                l["newton_iterations"] = e.diagnostics.newton_iterations;
            }
        } else {
            l["error"] = std::string(locus::to_string(*c.error));
            l["message"] = c.message;
            code = locus::Error(*c.error, "").is_validation() ? kValidation : kRuntime;
        }
        layers.push_back(std::move(l));
    }
    j["layers"] = layers;
    j["flags"] = locus::io::row_flags(row);
    std::cout << j.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Local gradient and smooth-surface reconstruction for multidimensional data"};
    app.require_subcommand(1);
    locus::io::RunConfig cfg;
    std::string point;

    auto *eval = app.add_subcommand("eval", "estimate the outcome at one query point");
    eval->add_option("--data", cfg.input, "training CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--query", point, "comma-separated coordinates")->required();
    add_method_flags(*eval, cfg);

    auto *imp = app.add_subcommand("impute", "estimate outcomes for every row of a query CSV");
    imp->add_option("--data", cfg.input, "training CSV")->required()->check(CLI::ExistingFile);
    imp->add_option("--queries", cfg.queries, "query CSV (x1..xn)")->required()->check(CLI::ExistingFile);
    imp->add_option("--output", cfg.output, "output CSV")->required();
    imp->add_option("--workers", cfg.workers, "evaluation threads")->check(CLI::PositiveNumber)->capture_default_str();
    add_method_flags(*imp, cfg);

    auto *bench = app.add_subcommand("bench", "regenerate an accuracy table");
    bench->add_option("--table", cfg.table, "T1, T2, T3, T4 or averaging")
        ->check(CLI::IsMember({"T1", "T2", "T3", "T4", "averaging"}))
        ->capture_default_str();
    bench->add_option("--scale", cfg.scale, "small, medium or full")
        ->check(CLI::IsMember({"small", "medium", "full"}))
        ->capture_default_str();
    bench->add_option("--seed", cfg.seed, "generator seed")->capture_default_str();
    bench->add_option("--workers", cfg.workers, "evaluation threads (used with --no-timing)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench->add_option("--budget", cfg.budget, "queries per scenario (0 = table default)")->capture_default_str();
    bench->add_option("--output", cfg.output, "JSON Lines report (default stdout)");
    bench->add_option("--plot", cfg.plot, "plot-ready CSV");
    bench->add_flag("!--no-timing", cfg.timing, "omit timing fields; allows several workers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (eval->parsed()) {
            cfg.command = "eval";
            return run_eval(cfg, point);
        }
        if (imp->parsed()) {
            cfg.command = "impute";
            const auto s = locus::io::impute(cfg);
            std::cerr << s.rows << " rows, " << s.failed << " failed\n";
            return s.failed == 0 ? kOk : kRowsFailed;
        }
        cfg.command = "bench";
        const std::string out = cfg.output;
        cfg.output.clear();
        const auto rep = locus::io::bench(cfg);
        if (out.empty()) {
            locus::io::write_report(std::cout, rep, cfg.timing);
        } else {
            std::ofstream f(out, std::ios::binary | std::ios::trunc);
            if (!f) {
                throw locus::Error(locus::ErrorKind::InvalidArgument, "cannot write '" + out + "'");
            }
            locus::io::write_report(f, rep, cfg.timing);
        }
        return kOk;
    } catch (const locus::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_validation() ? kValidation : kRuntime;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}

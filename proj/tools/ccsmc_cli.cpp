// Command-line front end: quantiles | run | allocate | curvature | report.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccsmc/ccsmc.hpp"

namespace {

using namespace ccsmc;
using namespace ccsmc::harness;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    std::optional<std::string> method;
    std::optional<double> alpha;
    std::optional<double> threshold;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

ExperimentConfig load_with_overrides(const Options& o, bool seed_is_quantile_seed) {
    if (o.config.empty()) throw ConfigError("--config is required");
    auto c = load_config(o.config);
    if (o.out) c.output = *o.out;
    if (o.threads) {
        if (*o.threads == 0) throw ConfigError("--threads must be positive");
        c.threads = *o.threads;
    }
    if (o.seed) {
        if (seed_is_quantile_seed) c.quantiles.seed = *o.seed;
        else c.seed = *o.seed;
    }
    if (o.alpha) {
        if (!(*o.alpha > 0.0 && *o.alpha < 1.0)) throw ConfigError("--alpha must lie in (0,1)");
        c.targets = {*o.alpha};
    }
    return c;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path().empty() ? "." : p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int cmd_quantiles(const Options& o) {
    auto c = load_with_overrides(o, true);
    if (o.out && c.quantiles.cache.empty()) c.output = *o.out;
    const auto t = ensure_quantile_table(c, &std::cerr);
    std::cout << "alpha,var,run_sd\n";
    for (std::size_t i = 0; i < t.alphas.size(); ++i)
        std::cout << format_double(t.alphas[i]) << ',' << format_double(t.var[i]) << ','
                  << format_double(i < t.run_sd.size() ? t.run_sd[i] : std::nan("")) << '\n';
    std::cerr << "quantile table: " << c.quantile_cache() << '\n';
    return 0;
}

int cmd_run(const Options& o) {
    auto c = load_with_overrides(o, false);
    if (o.method) {
        c.methods.clear();
        for (const auto& m : split_list(*o.method)) {
            const auto mm = method_from_string(m);
            if (!c.has(mm)) c.methods.push_back(mm);
        }
        if (c.methods.empty()) throw ConfigError("--method must name at least one method");
        if (c.measure == RiskMeasure::var && c.has(Method::is_ach))
            throw ConfigError("the IS-ACH baseline is implemented for tail (ES) targets only");
    }
    std::cerr << "running " << c.repetitions << " repetitions, fingerprint " << c.fingerprint() << '\n';
    const auto result = run_experiment(c, &std::cerr);
    write_outputs(c, result);
    for (const auto& e : result.metrics.entries) {
        if (e.target != "ES" && e.target != "VaR") continue;
        std::cout << e.method << " alpha=" << format_double(e.alpha) << " mean=" << format_double(e.mean);
        if (e.relative_bias) std::cout << " RB=" << format_double(*e.relative_bias);
        if (e.variance_reduction) std::cout << " VR=" << format_double(*e.variance_reduction);
        if (e.failures) std::cout << " failures=" << e.failures;
        std::cout << '\n';
    }
    std::cerr << "outputs written to " << c.output << '\n';
    return 0;
}

int cmd_allocate(const Options& o) {
    auto c = load_with_overrides(o, false);
    const std::string method = o.method.value_or("smc");
    const double alpha = o.alpha.value_or(c.targets.back());
    const auto rpt = single_allocation(c, method, alpha, c.seed, &std::cerr);
    const std::filesystem::path dir(c.output);
    write_file(dir / "allocation.json", to_json(rpt).dump(2) + "\n");
    write_file(dir / "allocation.csv", to_csv(rpt, method, c.seed));
    std::cout << to_json(rpt).dump(2) << '\n';
    return 0;
}

int cmd_curvature(const Options& o) {
    auto c = load_with_overrides(o, false);
    const std::optional<double> b = o.threshold ? o.threshold : c.curvature.threshold;
    if (!b) throw ConfigError("curvature needs a threshold (--B or [curvature] B)");
    if (!(*b > 0.0)) throw ConfigError("the curvature threshold must be positive");
    const auto pts = curvature_scan(c.margins, *b, c.curvature.points);
    std::string csv = "point,s";
    for (std::size_t k = 1; k <= c.dim(); ++k) csv += ",u" + std::to_string(k);
    csv += ",min_eigenvalue,convex\n";
    std::size_t convex = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        csv += std::to_string(i) + "," + format_double(pts[i].s);
        for (double u : pts[i].u) csv += "," + format_double(u);
        csv += "," + format_double(pts[i].min_eigenvalue) + "," + (pts[i].convex ? "1" : "0") + "\n";
        convex += pts[i].convex ? 1 : 0;
    }
    write_file(std::filesystem::path(c.output) / "curvature.csv", csv);
    std::cout << convex << " of " << pts.size() << " surface points are locally convex at B=" << format_double(*b)
              << '\n';
    return 0;
}

int cmd_report(const Options& o) {
    std::filesystem::path dir;
    nlohmann::json meta = nlohmann::json::object();
    if (!o.config.empty()) {
        auto c = load_with_overrides(o, false);
        dir = c.output;
        meta = {{"fingerprint", c.fingerprint()}, {"model", c.model}, {"seed", c.seed}};
    } else if (o.out) {
        dir = *o.out;
    } else {
        throw ConfigError("report needs --out or --config");
    }
    const auto old_path = dir / "metrics.json";
    if (std::filesystem::exists(old_path)) {
        // keep the run metadata written by `run`
        const auto old = nlohmann::json::parse(slurp(old_path));
        for (const auto& [k, v] : old.items())
            if (k != "entries" && k != "timings" && !meta.contains(k)) meta[k] = v;
    }
    std::istringstream runs(slurp(dir / "runs.csv"));
    const auto metrics = compute_metrics(parse_runs_csv(runs));
    std::vector<TimingRow> timings;
    if (std::filesystem::exists(dir / "timings.csv")) {
        std::istringstream ts(slurp(dir / "timings.csv"));
        timings = parse_timings_csv(ts);
    }
    write_file(dir / "metrics.json", metrics_json(metrics, timings, meta).dump(2) + "\n");
    write_file(dir / "curves.csv", curves_csv(metrics));
    std::cout << "re-aggregated " << metrics.entries.size() << " entries in " << dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional-sampling capital allocation: quantiles, experiments, allocations, curvature"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment configuration (.toml or .json)");
        sub->add_option("--seed", o.seed, "master seed override");
        sub->add_option("--out", o.out, "output directory override");
        sub->add_option("--threads", o.threads, "worker threads");
        sub->add_option("--method", o.method, "method(s): mc, smc, is_ach (allocate also: stddev)");
        sub->add_option("--alpha", o.alpha, "target probability level");
    };
    auto* q = app.add_subcommand("quantiles", "build or reuse the VaR table (--seed sets its seed)");
    auto* r = app.add_subcommand("run", "run the repetition experiment and write all outputs");
    auto* a = app.add_subcommand("allocate", "single Euler allocation, rolled up into the configured groups");
    auto* cv = app.add_subcommand("curvature", "convexity of the constraint surface");
    auto* rp = app.add_subcommand("report", "re-aggregate runs.csv into metrics.json and curves.csv");
    for (auto* s : {q, r, a, cv, rp}) add_common(s);
    cv->add_option("--B", o.threshold, "threshold of the constraint surface");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitConfig;
    }

    try {
        if (*q) return cmd_quantiles(o);
        if (*r) return cmd_run(o);
        if (*a) return cmd_allocate(o);
        if (*cv) return cmd_curvature(o);
        if (*rp) return cmd_report(o);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}

#pragma once

// Seeded repetition runner: quantile table (built or reused), per-method
// estimates per repetition, metrics and the output files.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "../baselines.hpp"
#include "../estimators.hpp"
#include "../geometry.hpp"
#include "../quantiles.hpp"
#include "../smc_sampler.hpp"
#include "config.hpp"
#include "metrics.hpp"

namespace ccsmc::harness {

/// Loads the persisted quantile table when it matches the model and protocol
/// and covers every needed level; otherwise builds and persists a new one.
inline QuantileTable ensure_quantile_table(const ExperimentConfig& c, std::ostream* log = nullptr,
                                           bool rebuild = false) {
    const std::string path = c.quantile_cache();
    const std::string fp = c.fingerprint();
    const auto alphas = c.table_alphas();
    if (!rebuild && std::filesystem::exists(path)) {
        try {
            auto t = load_quantile_table(path);
            if (table_covers(t, fp, alphas, c.quantiles.n_per_run, c.quantiles.n_runs, c.quantiles.seed)) {
                if (log) *log << "reusing persisted quantile table " << path << '\n';
                return t;
            }
            if (log) *log << "persisted quantile table " << path << " does not match; rebuilding\n";
        } catch (const std::exception& e) {
            if (log) *log << "ignoring unreadable quantile table " << path << ": " << e.what() << '\n';
        }
    }
    if (log)
        *log << "building quantile table: " << c.quantiles.n_runs << " runs x " << c.quantiles.n_per_run
             << " draws\n";
    auto t = estimate_quantiles(*c.copula, c.margins, alphas, c.quantiles.n_per_run, c.quantiles.n_runs,
                                c.quantiles.seed, c.threads, fp);
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    save_quantile_table(t, path);
    if (log) *log << "saved quantile table " << path << '\n';
    return t;
}

inline std::vector<std::string> target_names(std::size_t d, RiskMeasure measure) {
    std::vector<std::string> out;
    for (std::size_t k = 1; k <= d; ++k) out.push_back("X" + std::to_string(k));
    out.push_back(measure == RiskMeasure::var ? "VaR" : "ES");
    return out;
}

struct RepetitionResult {
    std::vector<RunRow> rows;
    std::vector<TimingRow> timings;
};

struct ExperimentResult {
    QuantileTable table;
    std::vector<RunRow> rows;
    std::vector<TimingRow> timings;
    MetricsReport metrics;
};

namespace detail {

struct RowStats {
    std::size_t sample_size = 0;
    std::size_t levels = 1;
    double cost_factor = 1.0;
    std::uint64_t draws = 0;
    std::size_t accepted = 0;
};

inline void append_rows(std::vector<RunRow>& rows, const ExperimentConfig& c, std::size_t rep, Method m, double alpha,
                        const AllocationReport* report, const RowStats& st) {
    const auto names = target_names(c.dim(), c.measure);
    for (std::size_t k = 0; k < names.size(); ++k) {
        RunRow r;
        r.repetition = rep;
        r.method = to_string(m);
        r.alpha = alpha;
        r.target = names[k];
        r.sample_size = st.sample_size;
        r.levels = st.levels;
        r.cost_factor = st.cost_factor;
        r.draws = st.draws;
        r.accepted = st.accepted;
        r.ok = report != nullptr;
        if (report) r.estimate = k < c.dim() ? report->contributions[k] : report->total;
        rows.push_back(std::move(r));
    }
}

inline std::size_t level_index(const LevelSchedule& s, double alpha) {
    for (std::size_t i = 0; i < s.alphas.size(); ++i)
        if (std::fabs(s.alphas[i] - alpha) <= 1e-12) return i;
    throw std::out_of_range("target level missing from schedule");
}

inline void run_mc(const ExperimentConfig& c, const QuantileTable& table, const std::vector<double>& targets,
                   std::size_t rep, std::vector<RunRow>& rows) {
    const std::uint64_t seed = derive_seed(c.seed, {tag(Stream::mc), rep});
    if (c.measure == RiskMeasure::es) {
        std::vector<double> b;
        for (double a : targets) b.push_back(table.at(a));
        try {
            const auto res = mc_rejection_estimates(*c.copula, c.margins, b, targets, c.n_mc, seed, c.mc_draw_cap);
            for (std::size_t t = 0; t < targets.size(); ++t)
                append_rows(rows, c, rep, Method::mc, targets[t], &res[t].report, {c.n_mc, 1, 1.0, res[t].draws, c.n_mc});
        } catch (const std::runtime_error&) {
            for (double a : targets) append_rows(rows, c, rep, Method::mc, a, nullptr, {c.n_mc, 1, 1.0, c.mc_draw_cap, 0});
        }
        return;
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const double b = table.at(targets[t]);
        try {
            const auto res = mc_band_estimate(*c.copula, c.margins, b, c.band_fraction * b, c.n_mc,
                                              derive_seed(seed, {t}), targets[t], c.mc_draw_cap);
            append_rows(rows, c, rep, Method::mc, targets[t], &res.report, {c.n_mc, 1, 1.0, res.draws, c.n_mc});
        } catch (const std::runtime_error&) {
            append_rows(rows, c, rep, Method::mc, targets[t], nullptr, {c.n_mc, 1, 1.0, c.mc_draw_cap, 0});
        }
    }
}

inline void run_smc(const ExperimentConfig& c, const QuantileTable& table, const std::vector<double>& targets,
                    std::size_t rep, std::vector<RunRow>& rows) {
    const std::uint64_t seed = derive_seed(c.seed, {tag(Stream::smc), rep});
    if (c.measure == RiskMeasure::es) {
        // one pass to the highest target; lower targets are intermediate levels
        const auto sched = build_level_schedule(table, targets.back());
        try {
            const auto res = run_smc_sampler(*c.copula, c.margins, sched, c.smc_options(seed));
            std::uint64_t draws = 0;
            std::size_t next = 0;
            for (std::size_t t = 0; t < targets.size(); ++t) {
                const std::size_t idx = level_index(sched, targets[t]);
                for (; next <= idx; ++next) draws += res.diagnostics[next].draws;
                const auto rpt = euler_es_allocation(res.levels[idx], c.margins, targets[t]);
                append_rows(rows, c, rep, Method::smc, targets[t], &rpt, {c.n_smc, idx + 1, 1.0, draws, c.n_smc});
            }
        } catch (const std::runtime_error&) {
            for (double a : targets) append_rows(rows, c, rep, Method::smc, a, nullptr, {c.n_smc, 1, 1.0, 0, 0});
        }
        return;
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto sched = build_band_schedule(table, targets[t], c.band_fraction);
        try {
            const auto res = run_smc_sampler(*c.copula, c.margins, sched, c.smc_options(derive_seed(seed, {t})));
            std::uint64_t draws = 0;
            for (const auto& d : res.diagnostics) draws += d.draws;
            const auto& band = sched.regions.back();
            const auto rpt = euler_var_allocation(res.levels.back(), c.margins, targets[t], band.epsilon);
            append_rows(rows, c, rep, Method::smc, targets[t], &rpt, {c.n_smc, sched.size(), 1.0, draws, c.n_smc});
        } catch (const std::runtime_error&) {
            append_rows(rows, c, rep, Method::smc, targets[t], nullptr, {c.n_smc, sched.size(), 1.0, 0, 0});
        }
    }
}

inline void run_is(const ExperimentConfig& c, const AchSampler& sampler, const QuantileTable& table,
                   const std::vector<double>& targets, std::size_t rep, std::vector<RunRow>& rows) {
    const std::uint64_t seed = derive_seed(c.seed, {tag(Stream::is_ach), rep});
    std::vector<double> b;
    for (double a : targets) b.push_back(table.at(a));
    const auto res = is_ach_estimates(sampler, c.margins, b, targets, c.n_is, seed);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto& d = res[t].diagnostics;
        const RowStats st{c.n_is, 1, d.expected_draws,
                          static_cast<std::uint64_t>(std::llround(d.mean_draws * static_cast<double>(c.n_is))),
                          d.n_tilde};
        append_rows(rows, c, rep, Method::is_ach, targets[t], d.available ? &res[t].report : nullptr, st);
    }
}

}  // namespace detail

/// Sorted target levels of the configuration.
inline std::vector<double> sorted_targets(const ExperimentConfig& c) {
    auto t = c.targets;
    std::sort(t.begin(), t.end());
    return t;
}

/// All methods for one repetition; rows are ordered by method (config
/// order), then target level, then cell.
inline RepetitionResult run_repetition(const ExperimentConfig& c, const QuantileTable& table, const AchSampler* sampler,
                                       std::size_t rep) {
    RepetitionResult out;
    const auto targets = sorted_targets(c);
    for (Method m : c.methods) {
        const auto start = std::chrono::steady_clock::now();
        switch (m) {
            case Method::mc: detail::run_mc(c, table, targets, rep, out.rows); break;
            case Method::smc: detail::run_smc(c, table, targets, rep, out.rows); break;
            case Method::is_ach: detail::run_is(c, *sampler, table, targets, rep, out.rows); break;
        }
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        out.timings.push_back({rep, to_string(m), dt.count()});
    }
    return out;
}

/// Runs every repetition on a pool of c.threads workers. Each repetition
/// draws from streams derived from (seed, method, repetition), so the rows
/// do not depend on the thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& c, std::ostream* log = nullptr) {
    ExperimentResult result;
    result.table = ensure_quantile_table(c, log);
    std::optional<AchSampler> sampler;
    if (c.has(Method::is_ach)) sampler.emplace(*c.copula, c.mixing);
    std::vector<RepetitionResult> reps(c.repetitions);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    auto worker = [&]() {
        for (std::size_t r = next++; r < c.repetitions; r = next++) {
            reps[r] = run_repetition(c, result.table, sampler ? &*sampler : nullptr, r);
            const std::size_t k = ++done;
            if (log && (k % 10 == 0 || k == c.repetitions)) *log << "  repetition " << k << '/' << c.repetitions << '\n';
        }
    };
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(c.threads, c.repetitions));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& r : reps) {
        result.rows.insert(result.rows.end(), r.rows.begin(), r.rows.end());
        result.timings.insert(result.timings.end(), r.timings.begin(), r.timings.end());
    }
    result.metrics = compute_metrics(result.rows);
    return result;
}

inline nlohmann::json experiment_meta(const ExperimentConfig& c, const QuantileTable& table) {
    nlohmann::json thresholds = nlohmann::json::object();
    for (double a : sorted_targets(c)) thresholds[format_double(a)] = table.at(a);
    std::vector<std::string> methods;
    for (auto m : c.methods) methods.push_back(to_string(m));
    return {{"fingerprint", c.fingerprint()},
            {"model", c.model},
            {"seed", c.seed},
            {"repetitions", c.repetitions},
            {"measure", to_string(c.measure)},
            {"methods", methods},
            {"thresholds", thresholds}};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

/// Writes runs.csv, timings.csv, metrics.json and curves.csv into c.output.
inline void write_outputs(const ExperimentConfig& c, const ExperimentResult& r) {
    const std::filesystem::path dir(c.output);
    std::filesystem::create_directories(dir);
    write_text(dir / "runs.csv", runs_csv(r.rows));
    write_text(dir / "timings.csv", timings_csv(r.timings));
    write_text(dir / "metrics.json", metrics_json(r.metrics, r.timings, experiment_meta(c, r.table)).dump(2) + "\n");
    write_text(dir / "curves.csv", curves_csv(r.metrics));
}

/// One allocation at level `alpha` with the chosen method ("smc", "mc",
/// "is_ach" or "stddev"), rolled up into the configured groups.
inline AllocationReport single_allocation(const ExperimentConfig& c, const std::string& method, double alpha,
                                          std::uint64_t seed, std::ostream* log = nullptr) {
    AllocationReport rpt;
    if (method == "stddev") {
        rpt = stddev_allocation(*c.copula, c.margins, c.n_stddev, derive_seed(seed, {tag(Stream::stddev)}));
    } else {
        ExperimentConfig cc = c;
        cc.targets = {alpha};
        const auto table = ensure_quantile_table(cc, log);
        const double b = table.at(alpha);
        if (method == "smc") {
            const auto sched = c.measure == RiskMeasure::es ? build_level_schedule(table, alpha)
                                                            : build_band_schedule(table, alpha, c.band_fraction);
            const auto res = run_smc_sampler(*c.copula, c.margins, sched, c.smc_options(derive_seed(seed, {tag(Stream::smc)})));
            rpt = c.measure == RiskMeasure::es
                      ? euler_es_allocation(res.levels.back(), c.margins, alpha)
                      : euler_var_allocation(res.levels.back(), c.margins, alpha, sched.regions.back().epsilon);
        } else if (method == "mc") {
            const auto s = derive_seed(seed, {tag(Stream::mc)});
            rpt = c.measure == RiskMeasure::es
                      ? mc_rejection_estimate(*c.copula, c.margins, b, c.n_mc, s, alpha, c.mc_draw_cap).report
                      : mc_band_estimate(*c.copula, c.margins, b, c.band_fraction * b, c.n_mc, s, alpha, c.mc_draw_cap).report;
        } else if (method == "is_ach") {
            if (c.measure != RiskMeasure::es) throw ConfigError("the IS-ACH baseline is implemented for ES targets only");
            const auto res = is_ach_estimate(*c.copula, c.margins, b, c.mixing, c.n_is, derive_seed(seed, {tag(Stream::is_ach)}), alpha);
            if (!res.diagnostics.available) throw std::runtime_error("IS-ACH: no proposal exceeded the threshold");
            rpt = res.report;
        } else {
            throw ConfigError("unknown allocation method '" + method + "' (expected smc, mc, is_ach or stddev)");
        }
    }
    if (!c.groups.empty()) rpt = hierarchical_rollup(std::move(rpt), c.groups);
    return rpt;
}

/// Convexity verdicts along the constraint surface sum_i F_i^-1(u_i) = B:
/// the free cells sit at x_i = s B / (d - 1) for s on an even grid in (0,1).
struct CurvaturePoint {
    double s = 0.0;
    std::vector<double> u;  ///< full point, last coordinate on the surface
    double min_eigenvalue = 0.0;
    bool convex = false;
};

inline std::vector<CurvaturePoint> curvature_scan(const Marginals& margins, double b, std::size_t points) {
    const std::size_t d = margins.size();
    if (d < 2) throw ConfigError("curvature needs at least two cells");
    std::vector<CurvaturePoint> out;
    for (std::size_t i = 1; i <= points; ++i) {
        CurvaturePoint p;
        p.s = static_cast<double>(i) / static_cast<double>(points + 1);
        std::vector<double> head(d - 1);
        for (std::size_t k = 0; k + 1 < d; ++k) head[k] = margins[k]->cdf(p.s * b / static_cast<double>(d - 1));
        try {
            const double last = curve_point(margins, b, head);
            const Eigen::MatrixXd h = curvature_hessian(margins, b, head);
            p.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues().minCoeff();
            p.convex = is_convex_at(margins, b, head);
            p.u = head;
            p.u.push_back(last);
            out.push_back(std::move(p));
        } catch (const std::domain_error&) {
            // the point has no preimage on the surface; skip it
        }
    }
    return out;
}

}  // namespace ccsmc::harness

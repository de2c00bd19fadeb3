#pragma once

// Per-repetition result rows and the Relative Bias / Variance Reduction
// summary computed from them.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace ccsmc::harness {

/// One estimate of one target (cell "X<k>" or the aggregate "ES") from one
/// repetition of one method.
struct RunRow {
    std::size_t repetition = 0;
    std::string method;
    double alpha = 0.0;
    std::string target;
    double estimate = std::numeric_limits<double>::quiet_NaN();
    std::size_t sample_size = 0;    ///< N_MC, N_SMC or N_IS
    std::size_t levels = 1;         ///< T for SMC, 1 otherwise
    double cost_factor = 1.0;       ///< E[N_V] for IS-ACH, 1 otherwise
    std::uint64_t draws = 0;        ///< copula draws / proposals used
    std::size_t accepted = 0;       ///< accepted draws (MC), particles (SMC), N-tilde (IS)
    bool ok = true;
};

inline constexpr const char* kRunsHeader =
    "repetition,method,alpha,target,estimate,sample_size,levels,cost_factor,draws,accepted,status";

inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string to_csv_line(const RunRow& r) {
    std::ostringstream os;
    os << r.repetition << ',' << r.method << ',' << format_double(r.alpha) << ',' << r.target << ','
       << format_double(r.estimate) << ',' << r.sample_size << ',' << r.levels << ',' << format_double(r.cost_factor)
       << ',' << r.draws << ',' << r.accepted << ',' << (r.ok ? "ok" : "failed");
    return os.str();
}

inline std::string runs_csv(const std::vector<RunRow>& rows) {
    std::string out = std::string(kRunsHeader) + "\n";
    for (const auto& r : rows) out += to_csv_line(r) + "\n";
    return out;
}

inline std::vector<RunRow> parse_runs_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kRunsHeader) throw std::runtime_error("runs.csv: unexpected header");
    std::vector<RunRow> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 11) throw std::runtime_error("runs.csv: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
        try {
            RunRow r;
            r.repetition = std::stoull(f[0]);
            r.method = f[1];
            r.alpha = std::stod(f[2]);
            r.target = f[3];
            r.estimate = f[4] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[4]);
            r.sample_size = std::stoull(f[5]);
            r.levels = std::stoull(f[6]);
            r.cost_factor = std::stod(f[7]);
            r.draws = std::stoull(f[8]);
            r.accepted = std::stoull(f[9]);
            if (f[10] != "ok" && f[10] != "failed") throw std::invalid_argument("status");
            r.ok = f[10] == "ok";
            rows.push_back(std::move(r));
        } catch (const std::exception&) {
            throw std::runtime_error("runs.csv: malformed line " + std::to_string(lineno));
        }
    }
    return rows;
}

/// Summary of one (method, alpha, target) cell over repetitions.
struct MetricEntry {
    std::string method;
    double alpha = 0.0;
    std::string target;
    std::size_t n_ok = 0;
    std::size_t failures = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double variance = std::numeric_limits<double>::quiet_NaN();  ///< across-repetition, unbiased
    std::size_t sample_size = 0;
    double levels = 1.0;
    double cost_factor = 1.0;
    double mean_draws = 0.0;
    double mean_accepted = 0.0;
    std::optional<double> relative_bias;
    std::optional<double> variance_reduction;
    /// Same ratio with the MC cost counted in copula draws (the mean number
    /// of draws needed to collect N_MC accepted samples) instead of N_MC.
    std::optional<double> variance_reduction_draws;
    bool degenerate_baseline = false;  ///< MC variance zero: VR undefined

    /// N-tilde / (E[N_V] N_IS), meaningful for IS-ACH rows.
    double p_is() const { return mean_accepted / (cost_factor * static_cast<double>(sample_size)); }
};

struct MetricsReport {
    std::vector<MetricEntry> entries;

    const MetricEntry* find(const std::string& method, double alpha, const std::string& target) const {
        for (const auto& e : entries)
            if (e.method == method && e.target == target && std::fabs(e.alpha - alpha) <= 1e-12) return &e;
        return nullptr;
    }

    const MetricEntry& at(const std::string& method, double alpha, const std::string& target) const {
        const auto* e = find(method, alpha, target);
        if (!e) throw std::out_of_range("metrics: no entry for " + method + "/" + target);
        return *e;
    }
};

/// Variance Reduction N_MC Var_MC / (cost * N * Var), with cost = T for the
/// SMC sampler and E[N_V] for IS-ACH.
inline double variance_reduction(double n_mc, double var_mc, double cost, double n, double var) {
    return n_mc * var_mc / (cost * n * var);
}

inline double relative_bias(double estimate, double baseline) { return (estimate - baseline) / baseline; }

/// Aggregates rows per (method, alpha, target); failed rows are counted but
/// excluded from the statistics. Relative Bias and Variance Reduction are
/// reported against the "mc" rows when present.
inline MetricsReport compute_metrics(const std::vector<RunRow>& rows) {
    using Key = std::tuple<std::string, double, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const RunRow*>> groups;
    for (const auto& r : rows) {
        const Key k{r.method, r.alpha, r.target};
        auto [it, inserted] = groups.try_emplace(k);
        if (inserted) order.push_back(k);
        it->second.push_back(&r);
    }
    MetricsReport report;
    for (const auto& k : order) {
        const auto& g = groups.at(k);
        MetricEntry e;
        std::tie(e.method, e.alpha, e.target) = k;
        double sum = 0.0;
        double levels = 0.0;
        double draws = 0.0;
        double accepted = 0.0;
        for (const auto* r : g) {
            if (!r->ok || std::isnan(r->estimate)) {
                ++e.failures;
                continue;
            }
            ++e.n_ok;
            sum += r->estimate;
            levels += static_cast<double>(r->levels);
            draws += static_cast<double>(r->draws);
            accepted += static_cast<double>(r->accepted);
            e.sample_size = r->sample_size;
            e.cost_factor = r->cost_factor;
        }
        if (e.n_ok > 0) {
            const double n = static_cast<double>(e.n_ok);
            e.mean = sum / n;
            e.levels = levels / n;
            e.mean_draws = draws / n;
            e.mean_accepted = accepted / n;
            if (e.n_ok > 1) {
                double ss = 0.0;
                for (const auto* r : g)
                    if (r->ok && !std::isnan(r->estimate)) ss += (r->estimate - e.mean) * (r->estimate - e.mean);
                e.variance = ss / (n - 1.0);
            }
        }
        report.entries.push_back(std::move(e));
    }
    for (auto& e : report.entries) {
        if (e.method == "mc" || e.n_ok == 0) continue;
        const auto* mc = report.find("mc", e.alpha, e.target);
        if (!mc || mc->n_ok == 0) continue;
        e.relative_bias = relative_bias(e.mean, mc->mean);
        if (std::isnan(mc->variance) || std::isnan(e.variance)) continue;
        if (!(mc->variance > 0.0) || !(e.variance > 0.0)) {
            e.degenerate_baseline = true;
            continue;
        }
        const double cost = e.method == "smc" ? e.levels : e.cost_factor;
        e.variance_reduction = variance_reduction(static_cast<double>(mc->sample_size), mc->variance, cost,
                                                  static_cast<double>(e.sample_size), e.variance);
        if (mc->mean_draws > 0.0)
            e.variance_reduction_draws =
                variance_reduction(mc->mean_draws, mc->variance, cost, static_cast<double>(e.sample_size), e.variance);
    }
    return report;
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const MetricEntry& e) {
    nlohmann::json j{{"method", e.method},
                     {"alpha", e.alpha},
                     {"target", e.target},
                     {"n_ok", e.n_ok},
                     {"failures", e.failures},
                     {"mean", finite_or_null(e.mean)},
                     {"variance", finite_or_null(e.variance)},
                     {"sample_size", e.sample_size},
                     {"levels", e.levels},
                     {"mean_draws", e.mean_draws},
                     {"relative_bias", optional_json(e.relative_bias)},
                     {"variance_reduction", optional_json(e.variance_reduction)},
                     {"variance_reduction_draws", optional_json(e.variance_reduction_draws)}};
    if (e.variance_reduction) j["log10_variance_reduction"] = std::log10(*e.variance_reduction);
    if (e.degenerate_baseline) j["variance_reduction_note"] = "undefined: zero variance";
    if (e.method == "is_ach") {
        j["expected_draws"] = e.cost_factor;
        j["p_is"] = e.p_is();
    }
    return j;
}

/// Plot data: one row per (alpha, method, target, metric).
inline std::string curves_csv(const MetricsReport& m) {
    std::string out = "alpha,method,target,metric,value\n";
    auto row = [&](const MetricEntry& e, const char* metric, double v) {
        out += format_double(e.alpha) + "," + e.method + "," + e.target + "," + metric + "," + format_double(v) + "\n";
    };
    for (const auto& e : m.entries) {
        row(e, "mean", e.mean);
        if (e.relative_bias) row(e, "relative_bias", *e.relative_bias);
        if (e.variance_reduction) row(e, "log10_variance_reduction", std::log10(*e.variance_reduction));
        if (e.variance_reduction_draws)
            row(e, "log10_variance_reduction_draws", std::log10(*e.variance_reduction_draws));
        if (e.method == "is_ach") row(e, "p_is_over_tail_probability", e.p_is() / (1.0 - e.alpha));
    }
    return out;
}

/// Per-method wall-clock seconds of one repetition.
struct TimingRow {
    std::size_t repetition = 0;
    std::string method;
    double seconds = 0.0;
};

inline std::string timings_csv(const std::vector<TimingRow>& rows) {
    std::string out = "repetition,method,seconds\n";
    for (const auto& t : rows) out += std::to_string(t.repetition) + "," + t.method + "," + format_double(t.seconds) + "\n";
    return out;
}

inline std::vector<TimingRow> parse_timings_csv(std::istream& is) {
    std::string line;
    std::vector<TimingRow> rows;
    if (!std::getline(is, line) || line != "repetition,method,seconds") throw std::runtime_error("timings.csv: unexpected header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c, ',');
        try {
            rows.push_back({std::stoull(a), b, std::stod(c)});
        } catch (const std::exception&) {
            throw std::runtime_error("timings.csv: malformed line");
        }
    }
    return rows;
}

inline nlohmann::json metrics_json(const MetricsReport& m, const std::vector<TimingRow>& timings,
                                   const nlohmann::json& meta) {
    nlohmann::json j = meta;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : m.entries) j["entries"].push_back(to_json(e));
    std::map<std::string, std::pair<double, std::size_t>> t;
    for (const auto& r : timings) {
        t[r.method].first += r.seconds;
        ++t[r.method].second;
    }
    nlohmann::json tj = nlohmann::json::object();
    for (const auto& [method, s] : t) tj[method] = {{"mean_seconds", s.first / static_cast<double>(s.second)}, {"total_seconds", s.first}};
    j["timings"] = tj;
    return j;
}

}  // namespace ccsmc::harness

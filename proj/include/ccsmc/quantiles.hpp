#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "copula.hpp"
#include "geometry.hpp"
#include "marginals.hpp"
#include "random.hpp"

namespace ccsmc {

/// Intermediate and target probability levels 0.1, ..., 0.9, 0.95, 0.99,
/// 0.995, 0.999, 0.9995, 0.9999, 0.99995.
inline std::vector<double> standard_alpha_grid() {
    return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9995, 0.9999, 0.99995};
}

/// Across-run averages of empirical aggregate-loss quantiles.
struct QuantileTable {
    std::string fingerprint;
    std::vector<double> alphas;
    std::vector<double> var;
    std::vector<double> run_sd;  ///< across-run standard deviation of each entry
    std::size_t n_per_run = 0;
    std::size_t n_runs = 0;
    std::uint64_t seed = 0;

    std::size_t index_of(double alpha) const {
        for (std::size_t i = 0; i < alphas.size(); ++i)
            if (std::fabs(alphas[i] - alpha) <= 1e-12) return i;
        throw std::out_of_range("quantile table has no entry for alpha " + std::to_string(alpha));
    }

    double at(double alpha) const { return var[index_of(alpha)]; }
};

/// 64-bit FNV-1a digest as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

/// Fingerprint of a model description (copula + marginals); object keys are
/// serialized in sorted order so equal descriptions give equal digests.
inline std::string model_fingerprint(const nlohmann::json& model) { return fnv1a_hex(model.dump()); }

/// Type-1 empirical quantiles (order statistic ceil(alpha n)) of `sample`,
/// for ascending alphas. Reorders `sample`.
inline std::vector<double> empirical_quantiles(std::vector<double>& sample, const std::vector<double>& alphas) {
    const std::size_t n = sample.size();
    if (n == 0) throw std::invalid_argument("empirical_quantiles: empty sample");
    std::vector<double> out(alphas.size());
    auto first = sample.begin();
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        if (a > 0 && alphas[a] < alphas[a - 1]) throw std::invalid_argument("empirical_quantiles: alphas unsorted");
        auto k = static_cast<std::size_t>(std::ceil(alphas[a] * static_cast<double>(n)));
        k = std::clamp<std::size_t>(k, 1, n);
        auto nth = sample.begin() + static_cast<std::ptrdiff_t>(k - 1);
        if (nth >= first) {
            std::nth_element(first, nth, sample.end());
            first = nth;
        }
        out[a] = *nth;
    }
    return out;
}

/// For each of `n_runs` independent runs, the empirical quantiles of
/// S = sum_i F_i^-1(U_i) over `n_per_run` copula draws; the table holds the
/// across-run means. Runs use derived substreams, so the result does not
/// depend on `threads`.
inline QuantileTable estimate_quantiles(const CopulaModel& copula, const Marginals& margins,
                                        const std::vector<double>& alphas, std::size_t n_per_run,
                                        std::size_t n_runs, std::uint64_t seed, std::size_t threads = 1,
                                        std::string fingerprint = {}) {
    if (alphas.empty()) throw std::invalid_argument("estimate_quantiles: no probability levels");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0 && alphas[i] < 1.0)) throw std::invalid_argument("estimate_quantiles: alpha outside (0,1)");
        if (i > 0 && !(alphas[i] > alphas[i - 1]))
            throw std::invalid_argument("estimate_quantiles: alphas must be strictly increasing");
    }
    if (n_per_run == 0 || n_runs == 0) throw std::invalid_argument("estimate_quantiles: sizes must be positive");
    if (margins.size() != copula.dim()) throw std::invalid_argument("estimate_quantiles: dimension mismatch");

    std::vector<std::vector<double>> per_run(n_runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        std::vector<double> sums(n_per_run);
        std::vector<double> u(copula.dim());
        for (std::size_t r = next++; r < n_runs; r = next++) {
            Rng rng = make_rng(derive_seed(seed, {tag(Stream::quantiles), r}));
            for (double& s : sums) {
                copula.sample(rng, u);
                s = aggregate_loss(margins, u);
            }
            per_run[r] = empirical_quantiles(sums, alphas);
        }
    };
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, n_runs));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    QuantileTable table;
    table.fingerprint = std::move(fingerprint);
    table.alphas = alphas;
    table.n_per_run = n_per_run;
    table.n_runs = n_runs;
    table.seed = seed;
    table.var.assign(alphas.size(), 0.0);
    table.run_sd.assign(alphas.size(), 0.0);
    for (const auto& q : per_run)
        for (std::size_t a = 0; a < alphas.size(); ++a) table.var[a] += q[a];
    for (double& v : table.var) v /= static_cast<double>(n_runs);
    if (n_runs > 1) {
        for (const auto& q : per_run)
            for (std::size_t a = 0; a < alphas.size(); ++a) table.run_sd[a] += (q[a] - table.var[a]) * (q[a] - table.var[a]);
        for (double& s : table.run_sd) s = std::sqrt(s / static_cast<double>(n_runs - 1));
    }
    for (std::size_t a = 1; a < table.var.size(); ++a)
        if (!(table.var[a] > table.var[a - 1]))
            throw std::runtime_error("estimate_quantiles: table is not strictly increasing; increase n_per_run");
    return table;
}

/// Tail levels for every grid probability up to and including the target.
inline LevelSchedule build_level_schedule(const QuantileTable& table, double target_alpha) {
    const std::size_t last = table.index_of(target_alpha);
    LevelSchedule s;
    for (std::size_t i = 0; i <= last; ++i) {
        s.alphas.push_back(table.alphas[i]);
        s.regions.push_back(ConstraintRegion::tail(table.var[i]));
    }
    s.validate();
    return s;
}

/// Tail levels strictly below the target followed by the band
/// |S - VaR_target| <= eps_fraction * VaR_target.
inline LevelSchedule build_band_schedule(const QuantileTable& table, double target_alpha,
                                         double eps_fraction = 0.005) {
    const std::size_t last = table.index_of(target_alpha);
    const double b = table.var[last];
    const double eps = eps_fraction * b;
    LevelSchedule s;
    for (std::size_t i = 0; i < last; ++i) {
        if (!(table.var[i] < b - eps)) break;
        s.alphas.push_back(table.alphas[i]);
        s.regions.push_back(ConstraintRegion::tail(table.var[i]));
    }
    s.alphas.push_back(target_alpha);
    s.regions.push_back(ConstraintRegion::band(b, eps));
    s.validate();
    return s;
}

inline nlohmann::json to_json(const QuantileTable& t) {
    return {{"fingerprint", t.fingerprint}, {"alphas", t.alphas}, {"var", t.var},       {"run_sd", t.run_sd},
            {"n_per_run", t.n_per_run},     {"n_runs", t.n_runs}, {"seed", t.seed}};
}

inline QuantileTable quantile_table_from_json(const nlohmann::json& j) {
    QuantileTable t;
    t.fingerprint = j.at("fingerprint").get<std::string>();
    t.alphas = j.at("alphas").get<std::vector<double>>();
    t.var = j.at("var").get<std::vector<double>>();
    if (j.contains("run_sd")) t.run_sd = j.at("run_sd").get<std::vector<double>>();
    t.n_per_run = j.at("n_per_run").get<std::size_t>();
    t.n_runs = j.at("n_runs").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    if (t.alphas.size() != t.var.size()) throw std::runtime_error("quantile table: alphas and var differ in length");
    return t;
}

inline void save_quantile_table(const QuantileTable& t, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << std::setprecision(17) << to_json(t).dump(2) << '\n';
}

inline QuantileTable load_quantile_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return quantile_table_from_json(nlohmann::json::parse(is));
}

/// True when `t` was built for the same model and protocol and covers every
/// requested level.
inline bool table_covers(const QuantileTable& t, const std::string& fingerprint, const std::vector<double>& alphas,
                         std::size_t n_per_run, std::size_t n_runs, std::uint64_t seed) {
    if (t.fingerprint != fingerprint || t.n_per_run != n_per_run || t.n_runs != n_runs || t.seed != seed) return false;
    for (double a : alphas) {
        try {
            t.index_of(a);
        } catch (const std::out_of_range&) {
            return false;
        }
    }
    return true;
}

}  // namespace ccsmc

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copula.hpp"
#include "marginals.hpp"
#include "particles.hpp"
#include "random.hpp"

namespace ccsmc {

enum class RiskMeasure { es, var, stddev };

inline std::string to_string(RiskMeasure r) {
    switch (r) {
        case RiskMeasure::es: return "ES";
        case RiskMeasure::var: return "VaR";
        case RiskMeasure::stddev: return "StdDev";
    }
    return "unknown";
}

/// A named set of cells (0-based) whose contributions are summed.
struct CellGroup {
    std::string name;
    std::vector<std::size_t> cells;
};

/// Per-cell Euler contributions; `total` is the allocated risk figure.
struct AllocationReport {
    RiskMeasure measure = RiskMeasure::es;
    double alpha = 0.0;
    double epsilon = 0.0;  ///< band half-width for VaR reports
    std::vector<double> contributions;
    double total = 0.0;
    std::vector<CellGroup> groups;
    std::vector<double> group_totals;
};

/// h(x) = x_k or h(x) = sum_i x_i.
struct TestFunction {
    std::optional<std::size_t> cell;  ///< empty means the aggregate sum

    static TestFunction marginal(std::size_t k) { return {k}; }
    static TestFunction sum() { return {}; }
};

inline void check_system(const ParticleSystem& system, const Marginals& margins) {
    if (system.size() == 0) throw std::invalid_argument("estimator: empty particle system");
    if (system.dim != margins.size()) throw std::invalid_argument("estimator: dimension mismatch");
    double s = 0.0;
    for (double w : system.weights) s += w;
    if (!(s > 0.0)) throw std::domain_error("estimator: particle system has no weight");
}

/// Weighted means of every cell loss, sum_j W_j F_k^-1(u_jk), k = 1..d.
inline std::vector<double> weighted_cell_means(const ParticleSystem& system, const Marginals& margins) {
    check_system(system, margins);
    std::vector<double> out(system.dim, 0.0);
    for (std::size_t j = 0; j < system.size(); ++j) {
        const double w = system.weights[j];
        if (w == 0.0) continue;
        const auto u = system.point(j);
        for (std::size_t k = 0; k < system.dim; ++k)
            out[k] += w * margins[k]->quantile(u[k], QuantilePolicy::clamp);
    }
    return out;
}

/// sum_j W_j h(F^-1(u_j)); the aggregate is the sum of the cell means so
/// that linearity holds exactly.
inline double conditional_expectation(const ParticleSystem& system, const Marginals& margins, TestFunction h) {
    const auto means = weighted_cell_means(system, margins);
    if (h.cell) {
        if (*h.cell >= means.size()) throw std::out_of_range("conditional_expectation: cell index");
        return means[*h.cell];
    }
    double s = 0.0;
    for (double m : means) s += m;
    return s;
}

inline AllocationReport make_report(RiskMeasure measure, double alpha, std::vector<double> contributions,
                                    double epsilon = 0.0) {
    AllocationReport r;
    r.measure = measure;
    r.alpha = alpha;
    r.epsilon = epsilon;
    r.contributions = std::move(contributions);
    for (double c : r.contributions) r.total += c;
    return r;
}

/// ES contributions E[X_k | S > VaR_alpha] from a system at the final tail
/// level; the total is the ES estimate.
inline AllocationReport euler_es_allocation(const ParticleSystem& system, const Marginals& margins, double alpha) {
    return make_report(RiskMeasure::es, alpha, weighted_cell_means(system, margins));
}

/// VaR contributions E[X_k | |S - VaR_alpha| <= eps] from a band-level system.
inline AllocationReport euler_var_allocation(const ParticleSystem& system, const Marginals& margins, double alpha,
                                             double epsilon) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("VaR allocation needs epsilon >= 0");
    return make_report(RiskMeasure::var, alpha, weighted_cell_means(system, margins), epsilon);
}

/// Contributions Cov(X_k, S) / sd(S) from n plain copula draws; they sum to
/// the sample standard deviation of S.
inline AllocationReport stddev_allocation(const CopulaModel& copula, const Marginals& margins, std::size_t n,
                                          std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("stddev allocation needs at least two samples");
    const std::size_t d = copula.dim();
    std::vector<double> x(n * d);
    std::vector<double> s(n, 0.0);
    Rng rng = make_rng(seed);
    std::vector<double> u(d);
    for (std::size_t j = 0; j < n; ++j) {
        copula.sample(rng, u);
        for (std::size_t k = 0; k < d; ++k) {
            x[j * d + k] = margins[k]->quantile(u[k], QuantilePolicy::clamp);
            s[j] += x[j * d + k];
        }
    }
    std::vector<double> mean(d, 0.0);
    double mean_s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < d; ++k) mean[k] += x[j * d + k];
        mean_s += s[j];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    mean_s /= static_cast<double>(n);
    std::vector<double> cov(d, 0.0);
    double var_s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double ds = s[j] - mean_s;
        var_s += ds * ds;
        for (std::size_t k = 0; k < d; ++k) cov[k] += (x[j * d + k] - mean[k]) * ds;
    }
    if (!(var_s > 0.0)) throw std::domain_error("stddev allocation: aggregate variance is zero");
    const double sd = std::sqrt(var_s / static_cast<double>(n - 1));
    for (double& c : cov) c = c / static_cast<double>(n - 1) / sd;
    return make_report(RiskMeasure::stddev, 0.0, std::move(cov));
}

inline void validate_partition(const std::vector<CellGroup>& groups, std::size_t d) {
    std::vector<int> seen(d, 0);
    for (const auto& g : groups)
        for (std::size_t c : g.cells) {
            if (c >= d) throw std::invalid_argument("group '" + g.name + "' references a cell out of range");
            ++seen[c];
        }
    for (int s : seen)
        if (s != 1) throw std::invalid_argument("groups must partition the cells");
}

/// Adds group totals (sums of cell contributions) to a report.
inline AllocationReport hierarchical_rollup(AllocationReport report, const std::vector<CellGroup>& groups) {
    validate_partition(groups, report.contributions.size());
    report.groups = groups;
    report.group_totals.assign(groups.size(), 0.0);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t c : groups[g].cells) report.group_totals[g] += report.contributions[c];
    return report;
}

inline nlohmann::json to_json(const AllocationReport& r) {
    nlohmann::json j;
    j["measure"] = to_string(r.measure);
    j["alpha"] = r.alpha;
    if (r.measure == RiskMeasure::var) j["epsilon"] = r.epsilon;
    j["contributions"] = r.contributions;
    j["total"] = r.total;
    if (!r.groups.empty()) {
        nlohmann::json g = nlohmann::json::object();
        for (std::size_t i = 0; i < r.groups.size(); ++i) g[r.groups[i].name] = r.group_totals[i];
        j["groups"] = g;
    }
    return j;
}

/// One row per cell: cell,group,contribution,total,alpha,method,seed.
inline std::string to_csv(const AllocationReport& r, const std::string& method, std::uint64_t seed) {
    std::vector<std::string> group_of(r.contributions.size());
    for (const auto& g : r.groups)
        for (std::size_t c : g.cells) group_of[c] = g.name;
    std::ostringstream os;
    os.precision(17);
    os << "cell,group,contribution,total,alpha,method,seed\n";
    for (std::size_t k = 0; k < r.contributions.size(); ++k)
        os << k + 1 << ',' << group_of[k] << ',' << r.contributions[k] << ',' << r.total << ',' << r.alpha << ','
           << method << ',' << seed << '\n';
    return os.str();
}

}  // namespace ccsmc

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "copula.hpp"
#include "estimators.hpp"
#include "marginals.hpp"
#include "random.hpp"

namespace ccsmc {

inline constexpr std::uint64_t kDefaultDrawCap = 1'000'000'000;

struct McResult {
    AllocationReport report;
    std::uint64_t draws = 0;  ///< copula draws needed to collect the accepted sample
};

/// Rejection Monte Carlo for several tail thresholds from one stream of
/// copula draws: draws continue until every threshold has `n_accept`
/// exceedances (S > B); each threshold keeps its first `n_accept` and
/// records the draw index at which it was complete.
inline std::vector<McResult> mc_rejection_estimates(const CopulaModel& copula, const Marginals& margins,
                                                    std::span<const double> thresholds,
                                                    std::span<const double> alphas, std::size_t n_accept,
                                                    std::uint64_t seed, std::uint64_t draw_cap = kDefaultDrawCap) {
    if (n_accept == 0) throw std::invalid_argument("rejection MC needs a positive sample size");
    if (thresholds.size() != alphas.size()) throw std::invalid_argument("rejection MC: thresholds and alphas differ");
    const std::size_t d = copula.dim();
    const std::size_t nt = thresholds.size();
    std::vector<std::vector<double>> sums(nt, std::vector<double>(d, 0.0));
    std::vector<std::size_t> accepted(nt, 0);
    std::vector<std::uint64_t> done_at(nt, 0);
    std::size_t remaining = nt;
    Rng rng = make_rng(seed);
    std::vector<double> u(d);
    std::vector<double> x(d);
    std::uint64_t draws = 0;
    while (remaining > 0) {
        if (draws >= draw_cap) throw std::runtime_error("rejection MC: draw cap exceeded");
        ++draws;
        copula.sample(rng, u);
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = margins[k]->quantile(u[k], QuantilePolicy::clamp);
            s += x[k];
        }
        for (std::size_t t = 0; t < nt; ++t) {
            if (accepted[t] == n_accept || !(s > thresholds[t])) continue;
            for (std::size_t k = 0; k < d; ++k) sums[t][k] += x[k];
            if (++accepted[t] == n_accept) {
                done_at[t] = draws;
                --remaining;
            }
        }
    }
    std::vector<McResult> out(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        for (double& v : sums[t]) v /= static_cast<double>(n_accept);
        out[t] = {make_report(RiskMeasure::es, alphas[t], std::move(sums[t])), done_at[t]};
    }
    return out;
}

/// Unweighted average of exactly `n_accept` draws with S > B.
inline McResult mc_rejection_estimate(const CopulaModel& copula, const Marginals& margins, double threshold,
                                      std::size_t n_accept, std::uint64_t seed, double alpha = 0.0,
                                      std::uint64_t draw_cap = kDefaultDrawCap) {
    const double b[1] = {threshold};
    const double a[1] = {alpha};
    return mc_rejection_estimates(copula, margins, b, a, n_accept, seed, draw_cap).front();
}

/// Band-conditioned rejection MC: draws with |S - B| <= eps.
inline McResult mc_band_estimate(const CopulaModel& copula, const Marginals& margins, double threshold, double eps,
                                 std::size_t n_accept, std::uint64_t seed, double alpha = 0.0,
                                 std::uint64_t draw_cap = kDefaultDrawCap) {
    const std::size_t d = copula.dim();
    std::vector<double> sums(d, 0.0);
    Rng rng = make_rng(seed);
    std::vector<double> u(d);
    std::vector<double> x(d);
    std::uint64_t draws = 0;
    std::size_t accepted = 0;
    while (accepted < n_accept) {
        if (draws >= draw_cap) throw std::runtime_error("band rejection MC: draw cap exceeded");
        ++draws;
        copula.sample(rng, u);
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = margins[k]->quantile(u[k], QuantilePolicy::clamp);
            s += x[k];
        }
        if (std::fabs(s - threshold) > eps) continue;
        for (std::size_t k = 0; k < d; ++k) sums[k] += x[k];
        ++accepted;
    }
    for (double& v : sums) v /= static_cast<double>(n_accept);
    return {make_report(RiskMeasure::var, alpha, std::move(sums), eps), draws};
}

/// Discrete mixing law of the level Lambda, with an atom at 0.
struct MixingDistribution {
    std::vector<double> lambdas;
    std::vector<double> probs;

    void validate() const {
        if (lambdas.empty() || lambdas.size() != probs.size())
            throw std::invalid_argument("mixing distribution: atoms and masses differ in length");
        double s = 0.0;
        bool has_zero = false;
        for (std::size_t k = 0; k < lambdas.size(); ++k) {
            if (!(lambdas[k] >= 0.0 && lambdas[k] < 1.0))
                throw std::invalid_argument("mixing distribution: atoms must lie in [0,1)");
            if (!(probs[k] > 0.0)) throw std::invalid_argument("mixing distribution: masses must be positive");
            if (k > 0 && !(lambdas[k] > lambdas[k - 1]))
                throw std::invalid_argument("mixing distribution: atoms must be strictly increasing");
            if (lambdas[k] == 0.0) has_zero = true;
            s += probs[k];
        }
        if (!has_zero) throw std::invalid_argument("mixing distribution needs an atom at 0");
        if (std::fabs(s - 1.0) > 1e-12) throw std::invalid_argument("mixing distribution masses must sum to 1");
    }

    /// Atoms 0 and 1 - 2^-k, k = 1..levels, with equal masses.
    static MixingDistribution dyadic(unsigned levels = 20) {
        MixingDistribution m;
        m.lambdas.push_back(0.0);
        for (unsigned k = 1; k <= levels; ++k) m.lambdas.push_back(1.0 - std::ldexp(1.0, -static_cast<int>(k)));
        m.probs.assign(m.lambdas.size(), 1.0 / static_cast<double>(m.lambdas.size()));
        return m;
    }

    /// Single atom; a positive atom fails validate() and is meant for
    /// diagnostics through AchSampler(..., validate = false).
    static MixingDistribution point_mass(double lambda) { return {{lambda}, {1.0}}; }
};

struct AchDraw {
    double lambda = 0.0;
    std::uint64_t draws = 0;  ///< copula draws spent (>= 1)
};

/// Rejection sampler for the mixture proposal: draw Lambda ~ F_Lambda, then
/// u ~ C until max_i u_i > Lambda. The proposal density is
///   sum_k p_k c(u) 1{max u > lambda_k} / (1 - C(lambda_k 1)),
/// so the weight targeting c is the reciprocal of the bracketed mixture.
class AchSampler {
public:
    AchSampler(const CopulaModel& copula, MixingDistribution mixing, bool validate = true)
        : copula_(&copula), mixing_(std::move(mixing)) {
        if (validate) mixing_.validate();
        if (mixing_.lambdas.size() != mixing_.probs.size())
            throw std::invalid_argument("mixing distribution: atoms and masses differ in length");
        cum_.resize(mixing_.probs.size());
        std::partial_sum(mixing_.probs.begin(), mixing_.probs.end(), cum_.begin());
        survival_.resize(mixing_.lambdas.size());
        for (std::size_t k = 0; k < mixing_.lambdas.size(); ++k) {
            const double l = mixing_.lambdas[k];
            survival_[k] = l == 0.0 ? 1.0 : 1.0 - copula.cdf(std::vector<double>(copula.dim(), l));
        }
    }

    const MixingDistribution& mixing() const noexcept { return mixing_; }

    /// P[max U > lambda_k] = 1 - C(lambda_k, ..., lambda_k).
    double survival(std::size_t k) const { return survival_[k]; }

    /// E[N_V] = sum_k p_k / (1 - C(lambda_k 1)), the mean number of copula
    /// draws per accepted proposal.
    double expected_draws() const {
        double s = 0.0;
        for (std::size_t k = 0; k < survival_.size(); ++k) s += mixing_.probs[k] / survival_[k];
        return s;
    }

    /// A single-atom law consumes no randomness for the atom, so a point
    /// mass at 0 reproduces the plain copula stream.
    AchDraw sample(Rng& rng, std::span<double> u) const {
        std::size_t k = 0;
        if (cum_.size() > 1) {
            const double v = uniform01(rng) * cum_.back();
            k = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), v) - cum_.begin());
            k = std::min(k, cum_.size() - 1);
        }
        const double lambda = mixing_.lambdas[k];
        AchDraw out{lambda, 0};
        for (;;) {
            ++out.draws;
            copula_->sample(rng, u);
            if (*std::max_element(u.begin(), u.end()) > lambda) return out;
        }
    }

    double weight(std::span<const double> u) const {
        const double mx = *std::max_element(u.begin(), u.end());
        double s = 0.0;
        for (std::size_t k = 0; k < survival_.size(); ++k)
            if (mx > mixing_.lambdas[k]) s += mixing_.probs[k] / survival_[k];
        return 1.0 / s;
    }

private:
    const CopulaModel* copula_;
    MixingDistribution mixing_;
    std::vector<double> cum_;
    std::vector<double> survival_;
};

inline AchDraw ach_sample(const AchSampler& sampler, Rng& rng, std::span<double> u) { return sampler.sample(rng, u); }

inline double ach_weight(const AchSampler& sampler, std::span<const double> u) { return sampler.weight(u); }

struct IsDiagnostics {
    std::size_t n_proposals = 0;
    std::size_t n_tilde = 0;          ///< proposals with S > B
    double expected_draws = 0.0;      ///< E[N_V]
    double mean_draws = 0.0;          ///< observed copula draws per proposal
    double p_is = 0.0;                ///< n_tilde / (E[N_V] n_proposals)
    double stop_loss = 0.0;           ///< (1/N) sum_j w_j max(S_j - B, 0)
    bool available = false;           ///< false when n_tilde == 0
};

struct IsResult {
    AllocationReport report;
    IsDiagnostics diagnostics;
};

/// IS-ACH estimates for several thresholds from the same proposals: the
/// self-normalized weighted mean of the cell losses over proposals with
/// S > B.
inline std::vector<IsResult> is_ach_estimates(const AchSampler& sampler, const Marginals& margins,
                                              std::span<const double> thresholds, std::span<const double> alphas,
                                              std::size_t n_proposals, std::uint64_t seed) {
    if (n_proposals == 0) throw std::invalid_argument("IS-ACH needs a positive number of proposals");
    const std::size_t d = margins.size();
    const std::size_t nt = thresholds.size();
    std::vector<std::vector<double>> wx(nt, std::vector<double>(d, 0.0));
    std::vector<double> wsum(nt, 0.0);
    std::vector<double> stop_loss(nt, 0.0);
    std::vector<std::size_t> hits(nt, 0);
    std::uint64_t draws = 0;
    Rng rng = make_rng(seed);
    std::vector<double> u(d);
    std::vector<double> x(d);
    for (std::size_t j = 0; j < n_proposals; ++j) {
        draws += sampler.sample(rng, u).draws;
        const double w = sampler.weight(u);
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = margins[k]->quantile(u[k], QuantilePolicy::clamp);
            s += x[k];
        }
        for (std::size_t t = 0; t < nt; ++t) {
            if (!(s > thresholds[t])) continue;
            ++hits[t];
            wsum[t] += w;
            stop_loss[t] += w * (s - thresholds[t]);
            for (std::size_t k = 0; k < d; ++k) wx[t][k] += w * x[k];
        }
    }
    const double e_nv = sampler.expected_draws();
    std::vector<IsResult> out(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        IsDiagnostics diag;
        diag.n_proposals = n_proposals;
        diag.n_tilde = hits[t];
        diag.expected_draws = e_nv;
        diag.mean_draws = static_cast<double>(draws) / static_cast<double>(n_proposals);
        diag.p_is = static_cast<double>(hits[t]) / (e_nv * static_cast<double>(n_proposals));
        diag.stop_loss = stop_loss[t] / static_cast<double>(n_proposals);
        diag.available = hits[t] > 0;
        std::vector<double> c(d, std::nan(""));
        if (diag.available)
            for (std::size_t k = 0; k < d; ++k) c[k] = wx[t][k] / wsum[t];
        out[t] = {make_report(RiskMeasure::es, alphas[t], std::move(c)), diag};
    }
    return out;
}

inline IsResult is_ach_estimate(const CopulaModel& copula, const Marginals& margins, double threshold,
                                const MixingDistribution& mixing, std::size_t n_proposals, std::uint64_t seed,
                                double alpha = 0.0) {
    const AchSampler sampler(copula, mixing);
    const double b[1] = {threshold};
    const double a[1] = {alpha};
    return is_ach_estimates(sampler, margins, b, a, n_proposals, seed).front();
}

}  // namespace ccsmc

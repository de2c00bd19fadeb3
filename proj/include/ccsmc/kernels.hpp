#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "marginals.hpp"
#include "particles.hpp"
#include "random.hpp"

namespace ccsmc {

enum class KernelKind { uniform_slice, global_beta };

inline std::string to_string(KernelKind k) {
    return k == KernelKind::uniform_slice ? "uniform" : "beta";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "uniform" || s == "uniform_slice") return KernelKind::uniform_slice;
    if (s == "beta" || s == "global_beta") return KernelKind::global_beta;
    throw std::invalid_argument("unknown mutation kernel '" + s + "'");
}

/// How the Beta parameters are obtained from the weighted mean and variance.
///   moments:      exact solution of the two moment equations,
///                 alpha = mu (mu (1 - mu) / var - 1)
///   closed_form:  the small-variance form alpha = (1 - mu) mu^2 / var
/// Both use beta = alpha (1 / mu - 1).
enum class BetaFitRule { moments, closed_form };

struct BetaClamps {
    double min_variance = 1e-6;
    double mean_margin = 1e-4;
    double min_shape = 0.1;
    double max_shape = 1e4;
};

struct MutationKernelSpec {
    KernelKind kind = KernelKind::uniform_slice;
    BetaClamps clamps{};
    BetaFitRule rule = BetaFitRule::moments;

    void validate() const {
        if (!(clamps.min_variance > 0.0 && clamps.mean_margin > 0.0 && clamps.mean_margin < 0.5 &&
              clamps.min_shape > 0.0 && clamps.max_shape > clamps.min_shape))
            throw std::invalid_argument("mutation kernel clamps must be positive and ordered");
    }
};

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;
};

inline BetaParams beta_from_moments(double mean, double variance, const BetaClamps& clamps = {},
                                    BetaFitRule rule = BetaFitRule::moments) {
    const double mu = std::clamp(mean, clamps.mean_margin, 1.0 - clamps.mean_margin);
    const double var = std::max(variance, clamps.min_variance);
    double a = rule == BetaFitRule::moments ? mu * (mu * (1.0 - mu) / var - 1.0) : (1.0 - mu) * mu * mu / var;
    a = std::clamp(a, clamps.min_shape, clamps.max_shape);
    const double b = std::clamp(a * (1.0 / mu - 1.0), clamps.min_shape, clamps.max_shape);
    return {a, b};
}

/// Per-coordinate Beta fit to the weighted cloud: mu = sum W u and
/// var = sum W u^2 - mu^2.
inline std::vector<BetaParams> fit_global_beta(const ParticleSystem& system, const BetaClamps& clamps = {},
                                               BetaFitRule rule = BetaFitRule::moments) {
    std::vector<BetaParams> out(system.dim);
    for (std::size_t i = 0; i < system.dim; ++i) {
        double m1 = 0.0;
        double m2 = 0.0;
        for (std::size_t j = 0; j < system.size(); ++j) {
            const double u = system.points[j * system.dim + i];
            m1 += system.weights[j] * u;
            m2 += system.weights[j] * u * u;
        }
        out[i] = beta_from_moments(m1, m2 - m1 * m1, clamps, rule);
    }
    return out;
}

inline double beta_log_pdf(double u, const BetaParams& p) {
    if (!(u > 0.0 && u < 1.0)) return -std::numeric_limits<double>::infinity();
    return (p.alpha - 1.0) * std::log(u) + (p.beta - 1.0) * std::log1p(-u) + std::lgamma(p.alpha + p.beta) -
           std::lgamma(p.alpha) - std::lgamma(p.beta);
}

inline double beta_variate(Rng& rng, const BetaParams& p) {
    for (;;) {
        const double x = gamma_variate(rng, p.alpha);
        const double y = gamma_variate(rng, p.beta);
        const double u = x / (x + y);
        if (u > 0.0 && u < 1.0) return u;
    }
}

/// Mixture mutation kernel with p_m = 1/d: pick m uniformly, draw the other
/// coordinates from the base law (Uniform or fitted Beta), then draw u_m
/// uniformly on its conditional support given the region. The proposal does
/// not depend on the particle being moved, so its density is a function of
/// the new point only:
///   K(u) = (1/d) sum_m prod_{i != m} base_i(u_i) 1{u_m in S_m(u_-m)} / |S_m(u_-m)|.
class MutationKernel {
public:
    static constexpr int kRetryCap = 100;

    MutationKernel(const Marginals& margins, ConstraintRegion region, KernelKind kind,
                   std::vector<BetaParams> beta = {})
        : margins_(&margins), region_(region), kind_(kind), beta_(std::move(beta)) {
        if (kind_ == KernelKind::global_beta && beta_.size() != margins.size())
            throw std::invalid_argument("global Beta kernel needs one parameter pair per coordinate");
    }

    const ConstraintRegion& region() const noexcept { return region_; }

    /// Draws a point into `out`. Infeasible draws (empty conditional support
    /// or a rounding miss of the region) restart the whole proposal, which
    /// rescales the proposal law by a common constant only; after kRetryCap
    /// restarts the particle is reported dead (false).
    bool propose(Rng& rng, std::span<double> out) const {
        const std::size_t d = out.size();
        for (int attempt = 0; attempt < kRetryCap; ++attempt) {
            const auto m = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(d));
            double rest = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                if (i == m) continue;
                out[i] = kind_ == KernelKind::uniform_slice ? uniform01(rng) : beta_variate(rng, beta_[i]);
                rest += (*margins_)[i]->quantile(out[i], QuantilePolicy::clamp);
            }
            const Interval s = support_from_rest(region_, *(*margins_)[m], rest);
            const double width = support_width_from_rest(region_, *(*margins_)[m], rest);
            if (!(width > 0.0)) continue;
            const double v = uniform01(rng);
            // sample from the top end in tail mode so that narrow supports near 1 keep full resolution
            out[m] = region_.mode == RegionMode::tail ? 1.0 - width * v : s.lo + (s.hi - s.lo) * v;
            if (out[m] >= 1.0 || out[m] <= 0.0) continue;
            if (contains_u(region_, *margins_, out)) return true;
        }
        return false;
    }

    /// log K(u); -inf when u is not reachable. A point of the region lies in
    /// every conditional support S_m(u_-m), so each mixture component whose
    /// support is non-empty contributes.
    double log_density(std::span<const double> u) const {
        const std::size_t d = u.size();
        std::vector<double> x(d);
        std::vector<double> lb(d, 0.0);
        double total = 0.0;
        double lb_all = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = (*margins_)[i]->quantile(u[i], QuantilePolicy::clamp);
            total += x[i];
            if (kind_ == KernelKind::global_beta) lb[i] = beta_log_pdf(u[i], beta_[i]);
            lb_all += lb[i];
        }
        const double neg_inf = -std::numeric_limits<double>::infinity();
        if (!region_.admits(total) || !std::isfinite(lb_all)) return neg_inf;
        double hi = neg_inf;
        std::vector<double> terms(d, neg_inf);
        for (std::size_t m = 0; m < d; ++m) {
            double rest = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                if (i != m) rest += x[i];
            const double width = support_width_from_rest(region_, *(*margins_)[m], rest);
            if (!(width > 0.0)) continue;
            terms[m] = lb_all - lb[m] - std::log(width);
            hi = std::max(hi, terms[m]);
        }
        if (!std::isfinite(hi)) return hi;
        double s = 0.0;
        for (double t : terms) s += std::exp(t - hi);
        return hi + std::log(s) - std::log(static_cast<double>(d));
    }

    double density(std::span<const double> u) const { return std::exp(log_density(u)); }

private:
    const Marginals* margins_;
    ConstraintRegion region_;
    KernelKind kind_;
    std::vector<BetaParams> beta_;
};

}  // namespace ccsmc

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "normal.hpp"

namespace ccsmc {

/// How quantile() treats probabilities on or near the boundary of (0,1).
enum class QuantilePolicy {
    strict,     ///< p outside (0,1) is a domain error
    clamp,      ///< p is clamped to [kQuantileClamp, 1 - kQuantileClamp] first
    endpoints,  ///< p in {0,1} maps to the support endpoints
};

inline constexpr double kQuantileClamp = 1e-12;

/// A continuous loss distribution. Implementations are immutable and
/// safe to share between threads.
class Marginal {
public:
    virtual ~Marginal() = default;

    virtual double cdf(double x) const = 0;
    /// 1 - cdf(x), computed without cancellation in the upper tail.
    virtual double sf(double x) const = 0;
    virtual double pdf(double x) const = 0;
    virtual double pdf_prime(double x) const = 0;
    virtual double lower_support() const = 0;
    virtual double upper_support() const = 0;
    virtual std::string family() const = 0;

    double quantile(double p, QuantilePolicy policy = QuantilePolicy::strict) const {
        if (std::isnan(p)) throw std::domain_error("quantile: probability is NaN");
        switch (policy) {
            case QuantilePolicy::strict:
                if (!(p > 0.0 && p < 1.0))
                    throw std::domain_error("quantile: probability must lie in (0,1)");
                break;
            case QuantilePolicy::clamp:
                p = std::clamp(p, kQuantileClamp, 1.0 - kQuantileClamp);
                break;
            case QuantilePolicy::endpoints:
                if (p < 0.0 || p > 1.0)
                    throw std::domain_error("quantile: probability must lie in [0,1]");
                if (p == 0.0) return lower_support();
                if (p == 1.0) return upper_support();
                break;
        }
        return interior_quantile(p);
    }

protected:
    virtual double interior_quantile(double p) const = 0;
};

class LogNormal final : public Marginal {
public:
    LogNormal(double mu, double sigma) : mu_(mu), sigma_(sigma) {
        if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu))
            throw std::invalid_argument("LogNormal: requires finite mu and sigma > 0");
    }

    double mu() const noexcept { return mu_; }
    double sigma() const noexcept { return sigma_; }

    double cdf(double x) const override {
        if (x <= 0.0) return 0.0;
        if (std::isinf(x)) return 1.0;
        return normal::cdf(standardize(x));
    }

    double sf(double x) const override {
        if (x <= 0.0) return 1.0;
        if (std::isinf(x)) return 0.0;
        return normal::sf(standardize(x));
    }

    double pdf(double x) const override {
        if (x <= 0.0 || std::isinf(x)) return 0.0;
        return normal::pdf(standardize(x)) / (sigma_ * x);
    }

    /// d/dx pdf(x) = -pdf(x) (1 + z / sigma) / x, z = (ln x - mu) / sigma.
    double pdf_prime(double x) const override {
        if (x <= 0.0 || std::isinf(x)) return 0.0;
        const double z = standardize(x);
        return -pdf(x) * (1.0 + z / sigma_) / x;
    }

    double lower_support() const override { return 0.0; }
    double upper_support() const override { return std::numeric_limits<double>::infinity(); }
    std::string family() const override { return "lognormal"; }

protected:
    double interior_quantile(double p) const override {
        return std::exp(mu_ + sigma_ * normal::quantile(p));
    }

private:
    double standardize(double x) const { return (std::log(x) - mu_) / sigma_; }

    double mu_;
    double sigma_;
};

using MarginalPtr = std::shared_ptr<const Marginal>;
using Marginals = std::vector<MarginalPtr>;

inline MarginalPtr make_lognormal(double mu, double sigma) {
    return std::make_shared<const LogNormal>(mu, sigma);
}

/// The benchmark marginals X_i ~ LN(10 - 0.1 i, 1 + 0.2 i), i = 1..d.
inline Marginals lognormal_ladder(std::size_t d) {
    Marginals out;
    out.reserve(d);
    for (std::size_t i = 1; i <= d; ++i)
        out.push_back(make_lognormal(10.0 - 0.1 * static_cast<double>(i),
                                     1.0 + 0.2 * static_cast<double>(i)));
    return out;
}

/// Component-wise quantile transform of a unit-cube point.
inline void to_losses(const Marginals& margins, std::span<const double> u, std::span<double> x,
                      QuantilePolicy policy = QuantilePolicy::clamp) {
    for (std::size_t i = 0; i < u.size(); ++i) x[i] = margins[i]->quantile(u[i], policy);
}

inline double aggregate_loss(const Marginals& margins, std::span<const double> u,
                             QuantilePolicy policy = QuantilePolicy::clamp) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += margins[i]->quantile(u[i], policy);
    return s;
}

}  // namespace ccsmc

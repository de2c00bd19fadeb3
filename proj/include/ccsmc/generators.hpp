#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "combinatorics.hpp"
#include "random.hpp"
#include "stable.hpp"

namespace ccsmc {

enum class Family { clayton, gumbel, frank };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::clayton: return "clayton";
        case Family::gumbel: return "gumbel";
        case Family::frank: return "frank";
    }
    return "unknown";
}

inline Family family_from_string(const std::string& s) {
    if (s == "clayton") return Family::clayton;
    if (s == "gumbel") return Family::gumbel;
    if (s == "frank") return Family::frank;
    throw std::invalid_argument("unknown copula family '" + s + "'");
}

/// Highest derivative order precomputed for generator derivatives.
inline constexpr unsigned kMaxDerivativeOrder = 40;

/// Archimedean generator psi: [0, inf] -> [0, 1] with psi(0) = 1.
///   Clayton  psi(t) = (1 + t)^(-1/theta),                     theta > 0
///   Gumbel   psi(t) = exp(-t^(1/theta)),                      theta >= 1
///   Frank    psi(t) = -log(1 - (1 - e^-theta) e^-t) / theta,  theta != 0
class ArchimedeanGenerator {
public:
    ArchimedeanGenerator(Family family, double theta) : family_(family), theta_(theta) {
        if (!std::isfinite(theta)) throw std::invalid_argument("generator: theta must be finite");
        switch (family) {
            case Family::clayton:
                if (!(theta > 0.0)) throw std::invalid_argument("Clayton requires theta > 0");
                break;
            case Family::gumbel:
                if (!(theta >= 1.0)) throw std::invalid_argument("Gumbel requires theta >= 1");
                gumbel_poly_ = std::make_shared<const std::vector<std::vector<double>>>(
                    gumbel_polynomials(1.0 / theta, kMaxDerivativeOrder));
                break;
            case Family::frank:
                if (theta == 0.0) throw std::invalid_argument("Frank requires theta != 0");
                break;
        }
    }

    Family family() const noexcept { return family_; }
    double theta() const noexcept { return theta_; }

    double psi(double t) const {
        if (std::isinf(t)) return 0.0;
        switch (family_) {
            case Family::clayton: return std::exp(-std::log1p(t) / theta_);
            case Family::gumbel: return std::exp(-std::pow(t, 1.0 / theta_));
            case Family::frank: return -std::log1p(std::expm1(-theta_) * std::exp(-t)) / theta_;
        }
        return 0.0;
    }

    double psi_inv(double u) const {
        if (u <= 0.0) return std::numeric_limits<double>::infinity();
        if (u >= 1.0) return 0.0;
        switch (family_) {
            case Family::clayton: return std::expm1(-theta_ * std::log(u));
            case Family::gumbel: return std::pow(-std::log(u), theta_);
            case Family::frank: return -std::log(std::expm1(-theta_ * u) / std::expm1(-theta_));
        }
        return 0.0;
    }

    /// Derivative of psi_inv; negative on (0,1).
    double psi_inv_prime(double u) const {
        switch (family_) {
            case Family::clayton: return -theta_ * std::exp((-theta_ - 1.0) * std::log(u));
            case Family::gumbel: {
                const double l = -std::log(u);
                return -theta_ * std::pow(l, theta_ - 1.0) / u;
            }
            case Family::frank: return theta_ * std::exp(-theta_ * u) / std::expm1(-theta_ * u);
        }
        return 0.0;
    }

    /// n-th derivative psi^(n)(t), signed.
    double psi_deriv(unsigned n, double t) const {
        if (n == 0) return psi(t);
        if (family_ == Family::frank) return frank_deriv(n, t);
        const double mag = std::exp(log_abs_psi_deriv(n, t));
        return (n % 2 == 0) ? mag : -mag;
    }

    /// log |psi^(n)(t)|. For the completely monotone families the sign of
    /// psi^(n) is (-1)^n.
    double log_abs_psi_deriv(unsigned n, double t) const {
        if (n == 0) return std::log(psi(t));
        check_order(n);
        switch (family_) {
            case Family::clayton: {
                double s = 0.0;
                for (unsigned k = 0; k < n; ++k) s += std::log(1.0 / theta_ + k);
                return s - (1.0 / theta_ + n) * std::log1p(t);
            }
            case Family::gumbel: return gumbel_log_abs_deriv(n, t);
            case Family::frank: return std::log(std::fabs(frank_deriv(n, t)));
        }
        return 0.0;
    }

    /// Laplace-transform frailty V with E[exp(-t V)] = psi(t).
    double sample_frailty(Rng& rng) const {
        switch (family_) {
            case Family::clayton: return gamma_variate(rng, 1.0 / theta_);
            case Family::gumbel: return positive_stable(rng, 1.0 / theta_);
            case Family::frank:
                if (theta_ <= 0.0)
                    throw std::domain_error("Frank frailty sampling requires theta > 0");
                return log_series(rng, -theta_);
        }
        return 0.0;
    }

private:
    void check_order(unsigned n) const {
        if (n > kMaxDerivativeOrder)
            throw std::invalid_argument("generator derivative order exceeds supported maximum");
    }

    /// psi^(n)(t) = (-1)^n psi(t) t^-n P_n(t^a), a = 1/theta, with
    /// P_0 = 1 and P_{n+1}(x) = (n + a x) P_n(x) - a x P_n'(x).
    /// All coefficients are nonnegative for a <= 1, so no cancellation occurs.
    static std::vector<std::vector<double>> gumbel_polynomials(double a, unsigned max_n) {
        std::vector<std::vector<double>> p(max_n + 1);
        p[0] = {1.0};
        for (unsigned n = 0; n < max_n; ++n) {
            std::vector<double> next(n + 2, 0.0);
            for (unsigned k = 0; k <= n; ++k) {
                const double c = p[n][k];
                next[k] += (static_cast<double>(n) - a * k) * c;
                next[k + 1] += a * c;
            }
            p[n + 1] = std::move(next);
        }
        return p;
    }

    double gumbel_log_abs_deriv(unsigned n, double t) const {
        if (t <= 0.0) return std::numeric_limits<double>::infinity();
        const double a = 1.0 / theta_;
        const double log_t = std::log(t);
        const double log_x = a * log_t;
        const auto& coef = (*gumbel_poly_)[n];
        double hi = -std::numeric_limits<double>::infinity();
        for (unsigned k = 0; k < coef.size(); ++k)
            if (coef[k] > 0.0) hi = std::max(hi, std::log(coef[k]) + k * log_x);
        double s = 0.0;
        for (unsigned k = 0; k < coef.size(); ++k)
            if (coef[k] > 0.0) s += std::exp(std::log(coef[k]) + k * log_x - hi);
        return -std::exp(log_x) - n * log_t + hi + std::log(s);
    }

    /// psi^(n)(t) = (-1)^n / theta * Li_{1-n}(z), z = (1 - e^-theta) e^-t, using
    /// Li_{1-n}(z) = z E_{n-1}(z) / (1 - z)^n with Eulerian polynomial E.
    double frank_deriv(unsigned n, double t) const {
        const double z = -std::expm1(-theta_) * std::exp(-t);
        const auto eul = comb::eulerian_row(n - 1);
        double poly = 0.0;
        for (std::size_t k = eul.size(); k-- > 0;) poly = poly * z + eul[k];
        const double li = z * poly / std::pow(1.0 - z, static_cast<double>(n));
        const double v = li / theta_;
        return (n % 2 == 0) ? v : -v;
    }

    Family family_;
    double theta_;
    std::shared_ptr<const std::vector<std::vector<double>>> gumbel_poly_;
};

}  // namespace ccsmc

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "random.hpp"

namespace ccsmc {

/// Positive alpha-stable variate with Laplace transform exp(-t^alpha),
/// 0 < alpha <= 1, via Kanter's (1975) representation
///   S = sin(a U) / sin(U)^(1/a) * (sin((1-a) U) / E)^((1-a)/a),
/// U ~ Uniform(0, pi), E ~ Exp(1).
inline double positive_stable(Rng& rng, double alpha) {
    if (alpha >= 1.0) return 1.0;
    const double u = std::numbers::pi * uniform01(rng);
    const double e = exponential1(rng);
    const double a = std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha);
    return a * std::pow(std::sin((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
}

/// Exponentially tilted stable variate with Laplace transform
///   exp(-v0 ((1 + t)^alpha - 1)).
/// The law is split into m = ceil(v0) i.i.d. pieces with parameter v0/m, each
/// drawn by rejection from a scaled positive stable with acceptance
/// probability exp(-v0/m) >= 1/e (Hofert, 2011).
inline double tilted_stable(Rng& rng, double alpha, double v0) {
    if (alpha >= 1.0) return v0;
    if (v0 <= 0.0) return 0.0;
    const double pieces = std::max(1.0, std::ceil(v0));
    const double part = v0 / pieces;
    const double scale = std::pow(part, 1.0 / alpha);
    double sum = 0.0;
    for (double i = 0; i < pieces; i += 1.0) {
        for (;;) {
            const double s = scale * positive_stable(rng, alpha);
            if (uniform01(rng) <= std::exp(-s)) {
                sum += s;
                break;
            }
        }
    }
    return sum;
}

/// Logarithmic series variate, P[X = k] = -p^k / (k log(1 - p)), given
/// log1m_p = log(1 - p). Kemp's (1981) representation
///   X = floor(1 + log V / log(1 - (1 - p)^U)).
inline double log_series(Rng& rng, double log1m_p) {
    const double q = -std::expm1(log1m_p * uniform01(rng));
    const double v = uniform01(rng);
    if (q <= 0.0) return 1.0;
    return std::max(1.0, std::floor(1.0 + std::log(v) / std::log(q)));
}

}  // namespace ccsmc

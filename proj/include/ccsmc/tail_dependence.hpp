#pragma once

#include <cmath>
#include <stdexcept>

#include "combinatorics.hpp"
#include "generators.hpp"

namespace ccsmc {

namespace detail {
inline void check_tail_args(Family family, double theta, unsigned d) {
    if (d < 2) throw std::invalid_argument("tail dependence needs d >= 2");
    ArchimedeanGenerator(family, theta);  // validates theta
}
}  // namespace detail

/// Multivariate lower tail-dependence coefficient
///   lim_{u->0} P[U_1 <= u | U_2 <= u, ..., U_d <= u]
///   = d/(d-1) lim_{t->inf} psi'(d t) / psi'((d-1) t).
/// Clayton: ((d-1)/d)^(1/theta). Gumbel and Frank: 0.
inline double tail_dependence_lower(Family family, double theta, unsigned d) {
    detail::check_tail_args(family, theta, d);
    if (family != Family::clayton) return 0.0;
    const double dd = static_cast<double>(d);
    return std::pow((dd - 1.0) / dd, 1.0 / theta);
}

/// Multivariate upper tail-dependence coefficient
///   lim_{u->1} P[U_1 > u | U_2 > u, ..., U_d > u]
///   = lim_{t->0} sum_{i=1}^d C(d,i) i (-1)^i psi'(i t)
///              / sum_{i=1}^{d-1} C(d-1,i) i (-1)^i psi'(i t).
/// For Gumbel, psi'(s) ~ -(1/theta) s^(1/theta - 1) as s -> 0, which gives
///   sum_i C(d,i) (-1)^i i^(1/theta) / sum_i C(d-1,i) (-1)^i i^(1/theta)
/// (2 - 2^(1/theta) for d = 2). Clayton and Frank: 0.
inline double tail_dependence_upper(Family family, double theta, unsigned d) {
    detail::check_tail_args(family, theta, d);
    if (family != Family::gumbel || theta == 1.0) return 0.0;
    const double a = 1.0 / theta;
    double num = 0.0;
    for (unsigned i = 1; i <= d; ++i)
        num += comb::binomial(d, i) * ((i % 2) ? -1.0 : 1.0) * std::pow(static_cast<double>(i), a);
    double den = 0.0;
    for (unsigned i = 1; i <= d - 1; ++i)
        den += comb::binomial(d - 1, i) * ((i % 2) ? -1.0 : 1.0) * std::pow(static_cast<double>(i), a);
    return num / den;
}

enum class Tail { lower, upper };

inline double tail_dependence(Family family, Tail tail, double theta, unsigned d) {
    return tail == Tail::lower ? tail_dependence_lower(family, theta, d)
                               : tail_dependence_upper(family, theta, d);
}

/// Parameter theta whose tail-dependence coefficient equals `target`, by
/// bisection (the coefficient is increasing in theta for both families).
inline double inverse_tail_dependence(Family family, Tail tail, double target, unsigned d) {
    if (!(target > 0.0 && target < 1.0))
        throw std::domain_error("inverse_tail_dependence: target must lie in (0,1)");
    if ((tail == Tail::lower && family != Family::clayton) ||
        (tail == Tail::upper && family != Family::gumbel))
        throw std::domain_error("inverse_tail_dependence: family has no such tail dependence");
    // For Gumbel with d >= 3 the coefficient does not vanish as theta -> 1+,
    // so small targets are unattainable.
    double lo = family == Family::gumbel ? 1.0 + 1e-9 : 1e-8;
    if (tail_dependence(family, tail, lo, d) >= target)
        throw std::domain_error("inverse_tail_dependence: target below the attainable range");
    double hi = 2.0;
    while (tail_dependence(family, tail, hi, d) < target) {
        hi *= 2.0;
        if (hi > 1e8) throw std::domain_error("inverse_tail_dependence: target unattainable");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (tail_dependence(family, tail, mid, d) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace ccsmc

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "marginals.hpp"

namespace ccsmc {

enum class RegionMode { tail, band };

/// The conditioning event on the aggregate loss S = sum_i F_i^-1(u_i):
///   tail  S > threshold            (S == threshold counts as outside)
///   band  |S - threshold| <= epsilon
struct ConstraintRegion {
    RegionMode mode = RegionMode::tail;
    double threshold = 0.0;
    double epsilon = 0.0;

    static ConstraintRegion tail(double b) { return {RegionMode::tail, b, 0.0}; }

    static ConstraintRegion band(double b, double eps) {
        if (!(eps >= 0.0)) throw std::invalid_argument("band region requires epsilon >= 0");
        return {RegionMode::band, b, eps};
    }

    bool admits(double s) const {
        return mode == RegionMode::tail ? s > threshold : std::fabs(s - threshold) <= epsilon;
    }
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

inline bool contains_u(const ConstraintRegion& region, const Marginals& margins,
                       std::span<const double> u) {
    return region.admits(aggregate_loss(margins, u));
}

/// Support of u_m given the other losses summing to `rest`.
/// Tail: [F_m(max(0, B - rest)), 1]. Band: the F_m-image of
/// [B - eps - rest, B + eps - rest] intersected with the support.
inline Interval support_from_rest(const ConstraintRegion& region, const Marginal& m, double rest) {
    const double lo_res = (region.mode == RegionMode::tail ? region.threshold
                                                           : region.threshold - region.epsilon) - rest;
    Interval out;
    out.lo = lo_res <= 0.0 ? 0.0 : m.cdf(lo_res);
    if (region.mode == RegionMode::band) {
        const double hi_res = region.threshold + region.epsilon - rest;
        out.hi = hi_res <= 0.0 ? 0.0 : m.cdf(hi_res);
    }
    return out;
}

/// Length of support_from_rest, computed from survival functions in the
/// upper tail where 1 - cdf would cancel.
inline double support_width_from_rest(const ConstraintRegion& region, const Marginal& m, double rest) {
    const double lo_res = (region.mode == RegionMode::tail ? region.threshold
                                                           : region.threshold - region.epsilon) - rest;
    const double sf_lo = lo_res <= 0.0 ? 1.0 : m.sf(lo_res);
    if (region.mode == RegionMode::tail) return sf_lo;
    const double hi_res = region.threshold + region.epsilon - rest;
    if (hi_res <= 0.0) return 0.0;
    if (sf_lo < 0.5) return sf_lo - m.sf(hi_res);
    return m.cdf(hi_res) - (lo_res <= 0.0 ? 0.0 : m.cdf(lo_res));
}

inline double rest_sum(const Marginals& margins, std::span<const double> u, std::size_t m) {
    double rest = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (i != m) rest += margins[i]->quantile(u[i], QuantilePolicy::clamp);
    return rest;
}

/// Conditional support of coordinate m given the others (u[m] is ignored).
inline Interval conditional_support(const ConstraintRegion& region, const Marginals& margins,
                                    std::span<const double> u, std::size_t m) {
    return support_from_rest(region, *margins[m], rest_sum(margins, u, m));
}

/// Smallest u_m keeping the point in a tail region:
///   F_m(max{0, B - sum_{i != m} F_i^-1(u_i)}).
/// u[m] is ignored; with d = 1 this is F_1(B).
inline double residual_bound(const ConstraintRegion& region, const Marginals& margins,
                             std::span<const double> u, std::size_t m) {
    return conditional_support(region, margins, u, m).lo;
}

/// The constraint curve r(u_{-d}) = F_d(B - sum_{i<d} F_i^-1(u_i)) for the
/// first d-1 coordinates.
inline double curve_point(const Marginals& margins, double b, std::span<const double> u_minus_d) {
    if (u_minus_d.size() + 1 != margins.size())
        throw std::invalid_argument("curve_point: expects d-1 coordinates");
    double s = b;
    for (std::size_t i = 0; i < u_minus_d.size(); ++i) s -= margins[i]->quantile(u_minus_d[i]);
    const Marginal& last = *margins.back();
    if (!(s > last.lower_support() && s < last.upper_support()))
        throw std::domain_error("curve_point: residual lies outside the last marginal's support");
    return last.cdf(s);
}

/// Hessian of r(u_{-d}); with x_i = F_i^-1(u_i) and s = B - sum x_i:
///   d2r/du_j du_k = f_d'(s) / (f_j(x_j) f_k(x_k)),                  j != k
///   d2r/du_j^2    = [f_d'(s) f_j(x_j) + f_d(s) f_j'(x_j)] / f_j(x_j)^3
inline Eigen::MatrixXd curvature_hessian(const Marginals& margins, double b,
                                         std::span<const double> u_minus_d) {
    curve_point(margins, b, u_minus_d);
    const std::size_t n = u_minus_d.size();
    std::vector<double> x(n), f(n), fp(n);
    double s = b;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = margins[i]->quantile(u_minus_d[i]);
        f[i] = margins[i]->pdf(x[i]);
        fp[i] = margins[i]->pdf_prime(x[i]);
        s -= x[i];
    }
    const Marginal& last = *margins.back();
    const double fd = last.pdf(s);
    const double fdp = last.pdf_prime(s);
    Eigen::MatrixXd h(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
            h(j, k) = j == k ? (fdp * f[j] + fd * fp[j]) / (f[j] * f[j] * f[j]) : fdp / (f[j] * f[k]);
    return h;
}

/// Convexity of the constraint curve at the point: the Hessian of r is
/// positive definite (a Cholesky factorization succeeds).
inline bool is_convex_at(const Marginals& margins, double b, std::span<const double> u_minus_d) {
    const Eigen::MatrixXd h = curvature_hessian(margins, b, u_minus_d);
    if (h.size() == 0) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    return llt.info() == Eigen::Success;
}

/// Nested regions A_1 ⊃ A_2 ⊃ ... ⊃ A_T; the last one is the target.
struct LevelSchedule {
    std::vector<double> alphas;
    std::vector<ConstraintRegion> regions;

    std::size_t size() const noexcept { return regions.size(); }

    void validate() const {
        if (regions.empty()) throw std::invalid_argument("level schedule is empty");
        if (alphas.size() != regions.size())
            throw std::invalid_argument("level schedule: alphas and regions differ in length");
        for (std::size_t t = 0; t < regions.size(); ++t) {
            if (regions[t].mode == RegionMode::band && t + 1 != regions.size())
                throw std::invalid_argument("level schedule: only the last level may be a band");
            if (t > 0 && !(alphas[t] > alphas[t - 1]))
                throw std::invalid_argument("level schedule: alphas must be strictly increasing");
            if (t > 0 && regions[t].mode == RegionMode::tail &&
                !(regions[t].threshold > regions[t - 1].threshold))
                throw std::invalid_argument("level schedule: thresholds must be strictly increasing");
            if (t > 0 && regions[t].mode == RegionMode::band &&
                !(regions[t].threshold - regions[t].epsilon > regions[t - 1].threshold))
                throw std::invalid_argument("level schedule: band must lie inside the previous level");
        }
    }
};

}  // namespace ccsmc

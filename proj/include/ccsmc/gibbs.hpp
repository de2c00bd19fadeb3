#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "copula.hpp"
#include "geometry.hpp"
#include "marginals.hpp"
#include "random.hpp"

namespace ccsmc {

struct GibbsStats {
    std::size_t updates = 0;      ///< coordinate updates attempted
    std::size_t capped = 0;       ///< updates left unchanged after the shrink cap
    std::size_t evaluations = 0;  ///< copula density evaluations
};

/// Systematic-scan Gibbs sweep(s) targeting c(u) 1{u in region}: each
/// coordinate in turn is refreshed from its full conditional, which is
/// proportional to c on the conditional support S_m(u_-m). The univariate
/// draw is a slice sampler whose initial bracket is the whole (bounded)
/// support, shrunk towards the current value on rejection. If `shrink_cap`
/// shrinks do not produce an acceptance, the coordinate is left unchanged,
/// which keeps the target invariant.
inline GibbsStats gibbs_move(std::span<double> u, const CopulaModel& copula, const ConstraintRegion& region,
                             const Marginals& margins, Rng& rng, std::size_t sweeps = 1,
                             std::size_t shrink_cap = 100) {
    GibbsStats stats;
    const std::size_t d = u.size();
    const double neg_inf = -std::numeric_limits<double>::infinity();
    auto log_target = [&]() {
        ++stats.evaluations;
        if (!contains_u(region, margins, u)) return neg_inf;
        const double v = copula.log_density(u);
        return std::isnan(v) ? neg_inf : v;
    };
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t m = 0; m < d; ++m) {
            ++stats.updates;
            const double current = u[m];
            const double f0 = log_target();
            if (!std::isfinite(f0)) continue;
            const Interval s = conditional_support(region, margins, u, m);
            double lo = s.lo;
            double hi = region.mode == RegionMode::tail ? 1.0 : s.hi;
            const double level = f0 - exponential1(rng);
            bool accepted = false;
            for (std::size_t it = 0; it < shrink_cap; ++it) {
                const double v = lo + (hi - lo) * uniform01(rng);
                if (v > 0.0 && v < 1.0) {
                    u[m] = v;
                    if (log_target() > level) {
                        accepted = true;
                        break;
                    }
                }
                if (v < current) lo = v;
                else hi = v;
            }
            if (!accepted) {
                u[m] = current;
                ++stats.capped;
            }
        }
    }
    return stats;
}

}  // namespace ccsmc

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "copula.hpp"
#include "geometry.hpp"
#include "gibbs.hpp"
#include "kernels.hpp"
#include "marginals.hpp"
#include "particles.hpp"
#include "random.hpp"

namespace ccsmc {

struct SmcOptions {
    std::size_t n_particles = 250;
    MutationKernelSpec kernel{};
    std::size_t move_sweeps = 1;
    double ess_fraction = 0.5;  ///< resample-move when ESS < ess_fraction * N
    ResampleScheme resampling = ResampleScheme::multinomial;
    std::size_t shrink_cap = 100;
    std::uint64_t init_draw_cap = 1'000'000'000;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_particles < 2) throw std::invalid_argument("SMC needs at least two particles");
        if (!(ess_fraction >= 0.0 && ess_fraction <= 1.0))
            throw std::invalid_argument("ESS threshold fraction must lie in [0,1]");
        kernel.validate();
    }
};

struct LevelDiagnostics {
    double ess = 0.0;              ///< ESS after weighting, before any resampling
    bool resampled = false;
    std::size_t dead = 0;          ///< particles whose mutation hit the retry cap
    std::size_t slice_capped = 0;  ///< Gibbs coordinate updates left unchanged
    std::uint64_t draws = 0;       ///< copula draws (first level) or proposals (later levels)
};

struct SmcResult {
    std::vector<ParticleSystem> levels;
    std::vector<LevelDiagnostics> diagnostics;
};

/// Self-normalized weights W_j ∝ c(u_j) 1{u_j in region} / K(u_j) for
/// proposals from a kernel that does not depend on the moved particle.
/// Dead proposals (alive[j] == 0) get weight 0. Returns false if all vanish.
inline bool weight_update(std::span<const double> points, std::span<const char> alive, std::size_t dim,
                          const MutationKernel& kernel, const CopulaModel& copula, const Marginals& margins,
                          std::span<double> weights_out) {
    const std::size_t n = alive.size();
    std::vector<double> log_w(n, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n; ++j) {
        if (!alive[j]) continue;
        const std::span<const double> u = points.subspan(j * dim, dim);
        if (!contains_u(kernel.region(), margins, u)) continue;
        log_w[j] = copula.log_density(u) - kernel.log_density(u);
    }
    return normalize_log_weights(log_w, weights_out);
}

/// General form of the same update for kernels that depend on the moved
/// particle: W_j ∝ f(u_j) / sum_k W_prev,k K(u_prev,k, u_j), O(N^2).
using PairKernelDensity = std::function<double(std::span<const double>, std::span<const double>)>;

inline bool weight_update_general(const ParticleSystem& prev, std::span<const double> points,
                                  std::span<const char> alive, const PairKernelDensity& kernel_density,
                                  const CopulaModel& copula, const ConstraintRegion& region,
                                  const Marginals& margins, std::span<double> weights_out) {
    const std::size_t n = alive.size();
    const std::size_t d = prev.dim;
    std::vector<double> log_w(n, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n; ++j) {
        if (!alive[j]) continue;
        const std::span<const double> u = points.subspan(j * d, d);
        if (!contains_u(region, margins, u)) continue;
        double denom = 0.0;
        for (std::size_t k = 0; k < prev.size(); ++k)
            if (prev.weights[k] > 0.0) denom += prev.weights[k] * kernel_density(prev.point(k), u);
        if (!(denom > 0.0)) continue;
        log_w[j] = copula.log_density(u) - std::log(denom);
    }
    return normalize_log_weights(log_w, weights_out);
}

/// The mutation kernel used to move from `prev` into `region`.
inline MutationKernel make_kernel(const MutationKernelSpec& spec, const ParticleSystem& prev,
                                  const ConstraintRegion& region, const Marginals& margins) {
    if (spec.kind == KernelKind::global_beta)
        return MutationKernel(margins, region, spec.kind, fit_global_beta(prev, spec.clamps, spec.rule));
    return MutationKernel(margins, region, spec.kind);
}

/// Proposes N points for level `level`; particle j uses its own substream.
inline void mutate(const MutationKernel& kernel, std::size_t level, std::uint64_t seed, ParticleSystem& out,
                   std::vector<char>& alive) {
    alive.assign(out.size(), 0);
    for (std::size_t j = 0; j < out.size(); ++j) {
        Rng rng = make_rng(derive_seed(seed, {tag(Stream::mutate), level, j}));
        alive[j] = kernel.propose(rng, out.point(j)) ? 1 : 0;
    }
}

/// Copula-constrained SMC sampler over a nested level schedule.
///   level 1: i.i.d. copula draws kept if they satisfy the first constraint;
///   level t: mutate with the mixture kernel -> reweight against the
///            approximate optimal backward kernel -> if ESS < fraction * N,
///            resample and apply Gibbs sweeps, then reset weights to 1/N.
/// Deterministic given options.seed; every particle at every level draws
/// from its own derived substream.
inline SmcResult run_smc_sampler(const CopulaModel& copula, const Marginals& margins,
                                 const LevelSchedule& schedule, const SmcOptions& opts) {
    schedule.validate();
    opts.validate();
    if (margins.size() != copula.dim()) throw std::invalid_argument("marginal count differs from copula dimension");
    const std::size_t d = copula.dim();
    const std::size_t n = opts.n_particles;
    SmcResult result;
    result.levels.reserve(schedule.size());

    {
        ParticleSystem first(d, n, 0);
        LevelDiagnostics diag;
        for (std::size_t j = 0; j < n; ++j) {
            Rng rng = make_rng(derive_seed(opts.seed, {tag(Stream::init), 0, j}));
            auto u = first.point(j);
            for (;;) {
                if (++diag.draws > opts.init_draw_cap) throw LevelFailure(0, "initial rejection draw cap exceeded");
                copula.sample(rng, u);
                if (contains_u(schedule.regions[0], margins, u)) break;
            }
        }
        diag.ess = static_cast<double>(n);
        result.levels.push_back(std::move(first));
        result.diagnostics.push_back(diag);
    }

    std::vector<char> alive;
    for (std::size_t t = 1; t < schedule.size(); ++t) {
        const ParticleSystem& prev = result.levels.back();
        const ConstraintRegion& region = schedule.regions[t];
        const MutationKernel kernel = make_kernel(opts.kernel, prev, region, margins);
        ParticleSystem next(d, n, t);
        LevelDiagnostics diag;
        mutate(kernel, t, opts.seed, next, alive);
        diag.draws = n;
        for (char a : alive) diag.dead += a ? 0 : 1;
        if (!weight_update(next.points, alive, d, kernel, copula, margins, next.weights))
            throw LevelFailure(t, "all particle weights are zero");
        diag.ess = ess(next.weights);
        if (diag.ess < opts.ess_fraction * static_cast<double>(n)) {
            Rng rrng = make_rng(derive_seed(opts.seed, {tag(Stream::resample), t}));
            next = resample(next, opts.resampling, rrng);
            for (std::size_t j = 0; j < n; ++j) {
                Rng mrng = make_rng(derive_seed(opts.seed, {tag(Stream::move), t, j}));
                const auto st = gibbs_move(next.point(j), copula, region, margins, mrng, opts.move_sweeps,
                                           opts.shrink_cap);
                diag.slice_capped += st.capped;
            }
            next.set_equal_weights();
            diag.resampled = true;
        }
        result.levels.push_back(std::move(next));
        result.diagnostics.push_back(diag);
    }
    return result;
}

}  // namespace ccsmc

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "random.hpp"

namespace ccsmc {

/// Raised when every particle of a level carries zero weight (the level
/// schedule is too aggressive for the particle budget).
class LevelFailure : public std::runtime_error {
public:
    LevelFailure(std::size_t level, const std::string& what)
        : std::runtime_error("level " + std::to_string(level + 1) + ": " + what), level_(level) {}
    std::size_t level() const noexcept { return level_; }

private:
    std::size_t level_;
};

/// N weighted points of [0,1]^d, stored row-major.
struct ParticleSystem {
    std::size_t dim = 0;
    std::vector<double> points;
    std::vector<double> weights;
    std::size_t level = 0;

    ParticleSystem() = default;
    ParticleSystem(std::size_t d, std::size_t n, std::size_t lvl = 0)
        : dim(d), points(n * d, 0.0), weights(n, n ? 1.0 / static_cast<double>(n) : 0.0), level(lvl) {}

    std::size_t size() const noexcept { return weights.size(); }
    std::span<double> point(std::size_t j) { return {points.data() + j * dim, dim}; }
    std::span<const double> point(std::size_t j) const { return {points.data() + j * dim, dim}; }

    void set_equal_weights() {
        std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(size()));
    }
};

/// Effective sample size [sum W^2]^-1 of normalized weights.
inline double ess(std::span<const double> weights) {
    double s = 0.0;
    for (double w : weights) s += w * w;
    if (!(s > 0.0)) throw std::domain_error("ess: all weights are zero");
    return 1.0 / s;
}

/// Turns log-weights into normalized weights; -inf entries become exactly 0.
/// Returns false when no entry is finite.
inline bool normalize_log_weights(std::span<const double> log_w, std::span<double> out) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : log_w)
        if (!std::isnan(v)) hi = std::max(hi, v);
    if (!std::isfinite(hi)) {
        std::fill(out.begin(), out.end(), 0.0);
        return false;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < log_w.size(); ++j) {
        out[j] = std::isnan(log_w[j]) ? 0.0 : std::exp(log_w[j] - hi);
        s += out[j];
    }
    for (double& w : out) w /= s;
    return true;
}

enum class ResampleScheme { multinomial, systematic };

inline std::string to_string(ResampleScheme s) {
    return s == ResampleScheme::multinomial ? "multinomial" : "systematic";
}

inline ResampleScheme resample_scheme_from_string(const std::string& s) {
    if (s == "multinomial") return ResampleScheme::multinomial;
    if (s == "systematic") return ResampleScheme::systematic;
    throw std::invalid_argument("unknown resampling scheme '" + s + "'");
}

/// Ancestor indices for N offspring drawn with probabilities `weights`.
inline std::vector<std::size_t> resample_indices(std::span<const double> weights, ResampleScheme scheme,
                                                 Rng& rng) {
    const std::size_t n = weights.size();
    std::vector<double> cum(n);
    std::partial_sum(weights.begin(), weights.end(), cum.begin());
    const double total = cum.empty() ? 0.0 : cum.back();
    if (!(total > 0.0)) throw std::domain_error("resample: all weights are zero");
    std::vector<double> targets(n);
    if (scheme == ResampleScheme::systematic) {
        const double u0 = uniform01(rng);
        for (std::size_t j = 0; j < n; ++j) targets[j] = (static_cast<double>(j) + u0) / n * total;
    } else {
        // sorted uniforms via normalized exponential spacings
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += exponential1(rng);
            targets[j] = acc;
        }
        const double scale = (acc + exponential1(rng)) / total;
        for (double& t : targets) t /= scale;
    }
    std::vector<std::size_t> idx(n);
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
        while (k + 1 < n && cum[k] <= targets[j]) ++k;
        // never select a zero-weight ancestor through rounding at the top end
        while (weights[k] == 0.0 && k > 0) --k;
        idx[j] = k;
    }
    return idx;
}

/// Resampled copy with equal weights 1/N.
inline ParticleSystem resample(const ParticleSystem& system, ResampleScheme scheme, Rng& rng) {
    const auto idx = resample_indices(system.weights, scheme, rng);
    ParticleSystem out(system.dim, system.size(), system.level);
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto src = system.point(idx[j]);
        std::copy(src.begin(), src.end(), out.point(j).begin());
    }
    return out;
}

}  // namespace ccsmc

#pragma once

// Small statistical helpers shared by the test suites and the acceptance run.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ccsmc::testing {

/// Upper 1e-3 point of the standard normal.
inline constexpr double kZ999 = 3.090232306167813;

/// Upper quantile of chi-square(df) at the level whose normal quantile is z
/// (Wilson-Hilferty; relative error well below 1% for df >= 5).
inline double chi_square_critical(double df, double z = kZ999) {
    const double a = 2.0 / (9.0 * df);
    const double c = 1.0 - a + z * std::sqrt(a);
    return df * c * c * c;
}

/// Two-sample chi-square homogeneity statistic over matching bins; bins whose
/// pooled count is below `min_pooled` are merged into one bucket. Returns the
/// statistic and writes the degrees of freedom.
inline double chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b, double& df,
                                    double min_pooled = 10.0) {
    double na = 0.0;
    double nb = 0.0;
    for (double v : a) na += v;
    for (double v : b) nb += v;
    std::vector<double> ca;
    std::vector<double> cb;
    double ra = 0.0;
    double rb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] + b[i] >= min_pooled) {
            ca.push_back(a[i]);
            cb.push_back(b[i]);
        } else {
            ra += a[i];
            rb += b[i];
        }
    }
    if (ra + rb > 0.0) {
        ca.push_back(ra);
        cb.push_back(rb);
    }
    double stat = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) {
        const double pooled = (ca[i] + cb[i]) / (na + nb);
        const double ea = pooled * na;
        const double eb = pooled * nb;
        stat += (ca[i] - ea) * (ca[i] - ea) / ea + (cb[i] - eb) * (cb[i] - eb) / eb;
    }
    df = static_cast<double>(ca.size()) - 1.0;
    return stat;
}

/// One-sample Kolmogorov-Smirnov distance to Uniform(0,1). Sorts `x`.
inline double ks_uniform(std::vector<double>& x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, x[i] - lo, hi - x[i]});
    }
    return d;
}

/// Asymptotic KS critical distance at significance 1e-3.
inline double ks_critical_1e3(std::size_t n) { return std::sqrt(-0.5 * std::log(0.5e-3)) / std::sqrt(static_cast<double>(n)); }

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  ///< unbiased sample variance
};

inline MeanVar mean_var(const std::vector<double>& x) {
    MeanVar r;
    const double n = static_cast<double>(x.size());
    for (double v : x) r.mean += v;
    r.mean /= n;
    for (double v : x) r.var += (v - r.mean) * (v - r.mean);
    if (x.size() > 1) r.var /= n - 1.0;
    return r;
}

}  // namespace ccsmc::testing

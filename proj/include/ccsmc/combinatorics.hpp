#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ccsmc::comb {

inline double binomial(unsigned n, unsigned k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (unsigned i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

/// Falling factorial a (a-1) ... (a-k+1).
inline double falling(double a, unsigned k) {
    double r = 1.0;
    for (unsigned i = 0; i < k; ++i) r *= a - static_cast<double>(i);
    return r;
}

/// Eulerian numbers A(n, k), k = 0..n-1 (A(0,0) = 1).
inline std::vector<double> eulerian_row(unsigned n) {
    std::vector<double> row{1.0};
    for (unsigned m = 1; m <= n; ++m) {
        std::vector<double> next(m, 0.0);
        for (unsigned k = 0; k < m; ++k) {
            const double left = k < row.size() ? row[k] : 0.0;
            const double right = (k >= 1 && k - 1 < row.size()) ? row[k - 1] : 0.0;
            next[k] = static_cast<double>(k + 1) * left + static_cast<double>(m - k) * right;
        }
        row = std::move(next);
    }
    return row;
}

/// Partial Bell polynomials B_{m,j}(x_1, ..., x_{m-j+1}) for 0 <= j <= m <= n,
/// returned as a (n+1) x (n+1) row-major table. `x[i-1]` holds x_i.
/// Recurrence: B_{m,j} = sum_{i=1}^{m-j+1} C(m-1, i-1) x_i B_{m-i, j-1}.
inline std::vector<double> partial_bell_table(std::span<const double> x, unsigned n) {
    const std::size_t w = n + 1;
    std::vector<double> b(w * w, 0.0);
    b[0] = 1.0;
    for (unsigned m = 1; m <= n; ++m)
        for (unsigned j = 1; j <= m; ++j) {
            double s = 0.0;
            for (unsigned i = 1; i + j <= m + 1; ++i)
                s += binomial(m - 1, i - 1) * x[i - 1] * b[(m - i) * w + (j - 1)];
            b[m * w + j] = s;
        }
    return b;
}

}  // namespace ccsmc::comb

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ccsmc/geometry.hpp"
#include "ccsmc/random.hpp"

using namespace ccsmc;

namespace {

/// Two-cell setup of the worked Gibbs example: X1 ~ LN(0.6, 1.4), X2 ~ LN(0.4, 1).
Marginals worked_pair() { return {make_lognormal(0.6, 1.4), make_lognormal(0.4, 1.0)}; }

Marginals curvature_pair() { return {make_lognormal(3.0, 0.4), make_lognormal(3.0, 0.6)}; }

}  // namespace

TEST(Region, TailAndBandAdmission) {
    const auto t = ConstraintRegion::tail(3.0);
    EXPECT_TRUE(t.admits(3.0001));
    EXPECT_FALSE(t.admits(3.0));  // tie is outside
    const auto b = ConstraintRegion::band(10.0, 0.5);
    EXPECT_TRUE(b.admits(9.5));
    EXPECT_TRUE(b.admits(10.5));
    EXPECT_FALSE(b.admits(10.6));
    EXPECT_THROW(ConstraintRegion::band(10.0, -1.0), std::invalid_argument);
}

TEST(ContainsU, Examples) {
    const auto m = worked_pair();
    const auto zero = ConstraintRegion::tail(0.0);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> u{uniform01(rng), uniform01(rng)};
        EXPECT_TRUE(contains_u(zero, m, u));
    }
    const auto r = ConstraintRegion::tail(3.57);
    EXPECT_TRUE(contains_u(r, m, std::vector<double>{0.9, 0.3}));
    EXPECT_FALSE(contains_u(r, m, std::vector<double>{0.01, 0.01}));
}

TEST(ResidualBound, WorkedGibbsExample) {
    const auto m = worked_pair();
    const std::vector<double> u{0.5 /* ignored */, 0.3};
    // F1(3.57 - F2^-1(0.3)) from scipy.stats.lognorm
    EXPECT_NEAR(residual_bound(ConstraintRegion::tail(3.57), m, u, 0), 0.6092791, 1e-6);
    EXPECT_NEAR(residual_bound(ConstraintRegion::tail(3.57), m, u, 0), 0.609, 0.005);
}

TEST(ResidualBound, ClampsAndDegenerateCases) {
    const auto m = worked_pair();
    // other coordinate alone exceeds B
    EXPECT_EQ(residual_bound(ConstraintRegion::tail(3.57), m, std::vector<double>{0.5, 0.99}, 0), 0.0);
    const Marginals one{make_lognormal(0.0, 1.0)};
    EXPECT_DOUBLE_EQ(residual_bound(ConstraintRegion::tail(2.0), one, std::vector<double>{0.4}, 0),
                     one[0]->cdf(2.0));
}

TEST(ResidualBound, BandSupport) {
    const auto m = worked_pair();
    const std::vector<double> u{0.5, 0.3};
    const double rest = m[1]->quantile(0.3);
    const auto iv = conditional_support(ConstraintRegion::band(5.0, 0.5), m, u, 0);
    EXPECT_DOUBLE_EQ(iv.lo, m[0]->cdf(4.5 - rest));
    EXPECT_DOUBLE_EQ(iv.hi, m[0]->cdf(5.5 - rest));
    EXPECT_NEAR(support_width_from_rest(ConstraintRegion::band(5.0, 0.5), *m[0], rest), iv.hi - iv.lo, 1e-15);
}

TEST(ResidualBound, UpperTailWidthIsPrecise) {
    const Marginals m{make_lognormal(0.0, 1.0), make_lognormal(0.0, 1.0)};
    const double rest = m[1]->quantile(0.5);
    const double w = support_width_from_rest(ConstraintRegion::tail(1e4), *m[0], rest);
    EXPECT_GT(w, 0.0);
    EXPECT_NEAR(w / m[0]->sf(1e4 - rest), 1.0, 1e-14);
}

TEST(GeometryProperty, ResidualBoundIsTheBoundary) {
    const Marginals m = lognormal_ladder(4);
    Rng rng(3);
    const auto region = ConstraintRegion::tail(2.0e5);
    const double delta = 1e-6;
    int checked = 0;
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> u(4);
        for (auto& v : u) v = uniform01(rng);
        const std::size_t k = i % 4;
        const double b = residual_bound(region, m, u, k);
        if (b + delta < 1.0) {
            u[k] = b + delta;
            EXPECT_TRUE(contains_u(region, m, u));
        }
        if (b > delta) {
            u[k] = b - delta;
            EXPECT_FALSE(contains_u(region, m, u));
            ++checked;
        }
    }
    EXPECT_GT(checked, 100);
}

TEST(GeometryProperty, ResidualBoundNonincreasingInOtherCoordinates) {
    const Marginals m = lognormal_ladder(3);
    const auto region = ConstraintRegion::tail(1.5e5);
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> u{uniform01(rng), uniform01(rng), uniform01(rng)};
        const double before = residual_bound(region, m, u, 0);
        u[2] = u[2] + (1 - u[2]) * uniform01(rng);
        EXPECT_LE(residual_bound(region, m, u, 0), before);
    }
}

TEST(GeometryProperty, BandIsDifferenceOfTails) {
    const Marginals m = lognormal_ladder(3);
    const double b = 1.0e5;
    const double eps = 2.0e4;
    Rng rng(4);
    for (int i = 0; i < 5000; ++i) {
        const std::vector<double> u{uniform01(rng), uniform01(rng), uniform01(rng)};
        const bool band = contains_u(ConstraintRegion::band(b, eps), m, u);
        const bool lower = contains_u(ConstraintRegion::tail(b - eps), m, u);
        const bool upper = contains_u(ConstraintRegion::tail(b + eps), m, u);
        // ties at the band edges have probability zero
        EXPECT_EQ(band, lower && !upper);
    }
}

TEST(CurvePoint, Examples) {
    const auto m = worked_pair();
    const double u1 = m[0]->cdf(3.57 - 0.883);
    EXPECT_NEAR(curve_point(m, 3.57, std::vector<double>{u1}), m[1]->cdf(0.883), 1e-12);
    EXPECT_NEAR(curve_point(m, 3.57, std::vector<double>{u1}), 0.30, 0.001);
    const double medians = m[0]->quantile(0.5) + m[1]->quantile(0.5);
    EXPECT_NEAR(curve_point(m, medians, std::vector<double>{0.5}), 0.5, 1e-12);
    EXPECT_THROW(curve_point(m, 1.0, std::vector<double>{0.99}), std::domain_error);
    EXPECT_THROW(curve_point(m, 1.0, std::vector<double>{}), std::invalid_argument);
}

TEST(Curvature, HessianMatchesFiniteDifferences) {
    const Marginals m{make_lognormal(3.0, 0.4), make_lognormal(3.0, 0.6), make_lognormal(2.8, 0.5),
                      make_lognormal(3.0, 0.6)};
    for (double b : {80.0, 120.0, 200.0}) {
        const std::vector<double> u{0.3, 0.45, 0.2};
        const auto h = curvature_hessian(m, b, u);
        const double step = 1e-4;
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                auto at = [&](double dj, double dk) {
                    auto v = u;
                    v[j] += dj;
                    v[k] += dk;
                    return curve_point(m, b, v);
                };
                double fd;
                if (j == k) {
                    fd = (at(step, 0) - 2 * curve_point(m, b, u) + at(-step, 0)) / (step * step);
                } else {
                    fd = (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step)) / (4 * step * step);
                }
                EXPECT_NEAR(h(j, k) / fd, 1.0, 1e-3) << "B=" << b << " (" << j << "," << k << ")";
            }
    }
}

TEST(Curvature, TwoDimensionalSignRule) {
    const auto m = curvature_pair();
    for (double b : {23.0, 46.0}) {
        const double u1 = m[0]->cdf(b) / 2;
        const double x1 = m[0]->quantile(u1);
        const double s = b - x1;
        const double sign_term = m[1]->pdf_prime(s) * m[0]->pdf(x1) + m[1]->pdf(s) * m[0]->pdf_prime(x1);
        EXPECT_EQ(is_convex_at(m, b, std::vector<double>{u1}), sign_term > 0.0);
    }
}

// The level curve moves from convex to concave as the threshold grows.
TEST(Curvature, VerdictFlipsBetweenLowAndHighThreshold) {
    const auto m = curvature_pair();
    const auto midpoint = [&](double b) { return std::vector<double>{m[0]->cdf(b) / 2}; };
    const bool low = is_convex_at(m, 23.0, midpoint(23.0));
    const bool high = is_convex_at(m, 46.0, midpoint(46.0));
    EXPECT_TRUE(low);
    EXPECT_FALSE(high);
}

TEST(LevelSchedule, Validation) {
    LevelSchedule ok{{0.5, 0.9}, {ConstraintRegion::tail(1.0), ConstraintRegion::tail(2.0)}};
    EXPECT_NO_THROW(ok.validate());
    LevelSchedule unsorted{{0.5, 0.9}, {ConstraintRegion::tail(2.0), ConstraintRegion::tail(1.0)}};
    EXPECT_THROW(unsorted.validate(), std::invalid_argument);
    LevelSchedule band_first{{0.5, 0.9}, {ConstraintRegion::band(1.0, 0.1), ConstraintRegion::tail(2.0)}};
    EXPECT_THROW(band_first.validate(), std::invalid_argument);
    LevelSchedule band_last{{0.5, 0.9}, {ConstraintRegion::tail(1.0), ConstraintRegion::band(2.0, 0.1)}};
    EXPECT_NO_THROW(band_last.validate());
    EXPECT_THROW(LevelSchedule{}.validate(), std::invalid_argument);
}

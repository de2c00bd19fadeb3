#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ccsmc/marginals.hpp"
#include "ccsmc/normal.hpp"

using namespace ccsmc;

TEST(Normal, QuantileInvertsCdf) {
    for (double p : {1e-300, 1e-12, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1 - 1e-9})
        EXPECT_NEAR(normal::cdf(normal::quantile(p)) / p, 1.0, 1e-13) << p;
}

TEST(Normal, KnownValues) {
    EXPECT_NEAR(normal::quantile(0.975), 1.959963984540054, 1e-14);
    EXPECT_NEAR(normal::cdf(-1.0), 0.15865525393145707, 1e-16);
    EXPECT_NEAR(normal::sf(8.0), 6.22096057427174e-16, 1e-27);  // scipy.stats.norm.sf
}

TEST(LogNormal, CdfExamples) {
    EXPECT_DOUBLE_EQ(LogNormal(0, 1).cdf(1.0), 0.5);
    EXPECT_NEAR(LogNormal(0.4, 1).cdf(0.883), 0.29998972031455085, 1e-12);  // scipy.stats.lognorm(1, scale=e^0.4)
    EXPECT_EQ(LogNormal(0.4, 1).cdf(0.0), 0.0);
    EXPECT_EQ(LogNormal(0.4, 1).cdf(-3.0), 0.0);
}

TEST(LogNormal, QuantileExamples) {
    EXPECT_NEAR(LogNormal(0, 1).quantile(0.5), 1.0, 1e-15);
    EXPECT_NEAR(LogNormal(9.9, 1.2).quantile(0.5) / std::exp(9.9), 1.0, 1e-14);
    EXPECT_NEAR(LogNormal(0.6, 1.4).quantile(0.609), 2.68424391239455, 1e-10);  // scipy
}

TEST(LogNormal, QuantileBoundaryPolicy) {
    const LogNormal m(0, 1);
    EXPECT_THROW(m.quantile(0.0), std::domain_error);
    EXPECT_THROW(m.quantile(1.0), std::domain_error);
    EXPECT_THROW(m.quantile(-0.1, QuantilePolicy::endpoints), std::domain_error);
    EXPECT_EQ(m.quantile(0.0, QuantilePolicy::endpoints), 0.0);
    EXPECT_TRUE(std::isinf(m.quantile(1.0, QuantilePolicy::endpoints)));
    EXPECT_DOUBLE_EQ(m.quantile(1.0, QuantilePolicy::clamp), m.quantile(1.0 - kQuantileClamp));
    EXPECT_DOUBLE_EQ(m.quantile(0.0, QuantilePolicy::clamp), m.quantile(kQuantileClamp));
}

TEST(LogNormal, PdfExamples) {
    const LogNormal m(0, 1);
    EXPECT_NEAR(m.pdf(1.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(m.pdf_prime(std::exp(-1.0)), 0.0, 1e-15);
    EXPECT_LT(m.pdf_prime(3.0), 0.0);
    EXPECT_EQ(m.pdf(-1.0), 0.0);
}

TEST(LogNormal, RejectsBadParameters) {
    EXPECT_THROW(LogNormal(0, 0), std::invalid_argument);
    EXPECT_THROW(LogNormal(0, -1), std::invalid_argument);
    EXPECT_THROW(LogNormal(NAN, 1), std::invalid_argument);
}

TEST(LogNormalProperty, RoundTrip) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& m : {LogNormal(0, 1), LogNormal(9.9, 1.2), LogNormal(9.5, 2.0)}) {
        for (int i = 0; i < 1000; ++i) {
            double p = unif(rng);
            if (p == 0.0) continue;
            EXPECT_LT(std::fabs(m.cdf(m.quantile(p)) - p), 1e-10);
        }
    }
}

TEST(LogNormalProperty, QuantileStrictlyIncreasing) {
    const LogNormal m(9.9, 1.2);
    double prev = 0.0;
    for (int i = 1; i < 10000; ++i) {
        const double q = m.quantile(i / 10000.0);
        EXPECT_GT(q, prev);
        prev = q;
    }
}

TEST(LogNormalProperty, PdfPrimeMatchesCentralDifference) {
    for (const auto& m : {LogNormal(0, 1), LogNormal(0.6, 1.4), LogNormal(3, 0.4)}) {
        for (double x = 0.1; x <= 100.0; x *= 1.1) {
            if (std::fabs(std::log(x) - (m.mu() - m.sigma() * m.sigma())) < 0.05) continue;  // mode
            const double h = 1e-5 * x;
            const double fd = (m.pdf(x + h) - m.pdf(x - h)) / (2 * h);
            const double an = m.pdf_prime(x);
            if (std::fabs(an) < 1e-200) continue;
            EXPECT_LT(std::fabs(fd - an) / std::fabs(an), 1e-5) << "x=" << x;
        }
    }
}

TEST(LogNormalProperty, PdfIntegratesToOne) {
    // trapezoid in log-space: integral of f(x) dx = integral of f(e^y) e^y dy
    for (const auto& m : {LogNormal(0, 1), LogNormal(9.9, 1.2)}) {
        const double lo = m.mu() - 12 * m.sigma();
        const double hi = m.mu() + 12 * m.sigma();
        const int n = 200000;
        const double h = (hi - lo) / n;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double y = lo + i * h;
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            s += w * m.pdf(std::exp(y)) * std::exp(y);
        }
        EXPECT_NEAR(s * h, 1.0, 1e-6);
    }
}

TEST(LogNormal, CdfMonotoneAndSfComplement) {
    const LogNormal m(0.6, 1.4);
    double prev = 0.0;
    for (double x = 0.01; x < 1e4; x *= 1.3) {
        EXPECT_GE(m.cdf(x), prev);
        prev = m.cdf(x);
        EXPECT_NEAR(m.cdf(x) + m.sf(x), 1.0, 1e-15);
    }
}

TEST(Ladder, BenchmarkParameters) {
    const auto ms = lognormal_ladder(5);
    ASSERT_EQ(ms.size(), 5u);
    const auto& m1 = dynamic_cast<const LogNormal&>(*ms[0]);
    const auto& m5 = dynamic_cast<const LogNormal&>(*ms[4]);
    EXPECT_DOUBLE_EQ(m1.mu(), 9.9);
    EXPECT_DOUBLE_EQ(m1.sigma(), 1.2);
    EXPECT_DOUBLE_EQ(m5.mu(), 9.5);
    EXPECT_DOUBLE_EQ(m5.sigma(), 2.0);
}

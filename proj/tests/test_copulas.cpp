#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ccsmc/combinatorics.hpp"
#include "ccsmc/copula.hpp"
#include "ccsmc/generators.hpp"
#include "ccsmc/random.hpp"
#include "ccsmc/tail_dependence.hpp"

using namespace ccsmc;

namespace {

/// Clayton (theta0 = 0.5) over two business units: cells 1-3 at theta 0.75,
/// cells 4-7 at theta 1.
CopulaModel business_unit_clayton() {
    CopulaNode bu1{ArchimedeanGenerator(Family::clayton, 0.75), {0, 1, 2}, {}};
    CopulaNode bu2{ArchimedeanGenerator(Family::clayton, 1.0), {3, 4, 5, 6}, {}};
    return CopulaModel::nested(CopulaNode{ArchimedeanGenerator(Family::clayton, 0.5), {}, {bu1, bu2}});
}

CopulaModel nested3(Family f, double t0, double t1) {
    CopulaNode child{ArchimedeanGenerator(f, t1), {1, 2}, {}};
    return CopulaModel::nested(CopulaNode{ArchimedeanGenerator(f, t0), {0}, {child}});
}

double clayton_cdf_closed(std::span<const double> u, double th) {
    double s = 0.0;
    for (double v : u) s += std::pow(v, -th);
    return std::pow(s - static_cast<double>(u.size()) + 1.0, -1.0 / th);
}

double gumbel_cdf_closed(std::span<const double> u, double th) {
    double s = 0.0;
    for (double v : u) s += std::pow(-std::log(v), th);
    return std::exp(-std::pow(s, 1.0 / th));
}

double frank_cdf_bivariate(double u, double v, double th) {
    return -std::log(1.0 + std::expm1(-th * u) * std::expm1(-th * v) / std::expm1(-th)) / th;
}

}  // namespace

TEST(Combinatorics, SmallTables) {
    EXPECT_EQ(comb::binomial(5, 2), 10.0);
    EXPECT_EQ(comb::binomial(3, 4), 0.0);
    EXPECT_EQ(comb::falling(4.0, 2), 12.0);
    const auto e = comb::eulerian_row(4);
    ASSERT_EQ(e.size(), 4u);
    EXPECT_EQ(e[0], 1.0);
    EXPECT_EQ(e[1], 11.0);
    EXPECT_EQ(e[2], 11.0);
    EXPECT_EQ(e[3], 1.0);
    // B_{n,k}(1,1,...) are Stirling numbers of the second kind
    std::vector<double> ones(6, 1.0);
    const auto b = comb::partial_bell_table(ones, 6);
    EXPECT_EQ(b[6 * 7 + 3], 90.0);
    EXPECT_EQ(b[5 * 7 + 2], 15.0);
}

TEST(Generators, RejectInvalidParameters) {
    EXPECT_THROW(ArchimedeanGenerator(Family::clayton, 0.0), std::invalid_argument);
    EXPECT_THROW(ArchimedeanGenerator(Family::gumbel, 0.9), std::invalid_argument);
    EXPECT_THROW(ArchimedeanGenerator(Family::frank, 0.0), std::invalid_argument);
    EXPECT_THROW(family_from_string("joe"), std::invalid_argument);
    EXPECT_EQ(family_from_string("gumbel"), Family::gumbel);
}

TEST(Generators, InverseRoundTrip) {
    for (auto [f, th] : {std::pair{Family::clayton, 1.0}, {Family::gumbel, 1.5}, {Family::frank, 2.0},
                         {Family::frank, -3.0}, {Family::clayton, 0.16}}) {
        const ArchimedeanGenerator g(f, th);
        for (double u : {1e-6, 0.1, 0.5, 0.9, 0.999}) EXPECT_NEAR(g.psi(g.psi_inv(u)), u, 1e-12 * (1 + u));
        EXPECT_EQ(g.psi(0.0), 1.0);
    }
}

TEST(Generators, InverseDerivativeMatchesFiniteDifference) {
    for (auto [f, th] : {std::pair{Family::clayton, 1.0}, {Family::gumbel, 1.5}, {Family::frank, 2.0}}) {
        const ArchimedeanGenerator g(f, th);
        for (double u : {0.1, 0.5, 0.9}) {
            const double h = 1e-6;
            const double fd = (g.psi_inv(u + h) - g.psi_inv(u - h)) / (2 * h);
            EXPECT_NEAR(g.psi_inv_prime(u) / fd, 1.0, 1e-6);
        }
    }
}

TEST(Generators, DerivativesMatchFiniteDifferencesOfLowerOrder) {
    for (auto [f, th] : {std::pair{Family::clayton, 0.7}, {Family::gumbel, 1.25}, {Family::gumbel, 3.0},
                         {Family::frank, 2.0}, {Family::frank, -2.0}}) {
        const ArchimedeanGenerator g(f, th);
        for (unsigned n = 1; n <= 8; ++n)
            for (double t : {0.05, 0.7, 3.0}) {
                const double h = 1e-5 * t;
                const double fd = (g.psi_deriv(n - 1, t + h) - g.psi_deriv(n - 1, t - h)) / (2 * h);
                EXPECT_NEAR(g.psi_deriv(n, t) / fd, 1.0, 1e-5) << to_string(f) << " n=" << n << " t=" << t;
            }
    }
}

TEST(Generators, GumbelFirstDerivativeClosedForm) {
    const double th = 1.5;
    const ArchimedeanGenerator g(Family::gumbel, th);
    for (double t : {0.01, 0.5, 4.0}) {
        const double a = 1.0 / th;
        const double expect = -a * std::pow(t, a - 1) * std::exp(-std::pow(t, a));
        EXPECT_NEAR(g.psi_deriv(1, t) / expect, 1.0, 1e-13);
    }
}

TEST(Copula, FlatCdfMatchesClosedForms) {
    const std::vector<double> u{0.3, 0.7, 0.55, 0.91};
    EXPECT_NEAR(CopulaModel::flat(Family::clayton, 1.3, 4).cdf(u), clayton_cdf_closed(u, 1.3), 1e-14);
    EXPECT_NEAR(CopulaModel::flat(Family::gumbel, 1.8, 4).cdf(u), gumbel_cdf_closed(u, 1.8), 1e-14);
    const std::vector<double> v{0.3, 0.7};
    for (double th : {2.0, -4.0})
        EXPECT_NEAR(CopulaModel::flat(Family::frank, th, 2).cdf(v), frank_cdf_bivariate(0.3, 0.7, th), 1e-14);
}

TEST(Copula, CdfBoundaryConditions) {
    const auto c = CopulaModel::flat(Family::gumbel, 2.0, 3);
    EXPECT_EQ(c.cdf(std::vector<double>{0.0, 0.5, 0.5}), 0.0);
    EXPECT_NEAR(c.cdf(std::vector<double>{1.0, 0.4, 1.0}), 0.4, 1e-15);
    const auto n = business_unit_clayton();
    std::vector<double> u(7, 1.0);
    u[4] = 0.37;
    EXPECT_NEAR(n.cdf(u), 0.37, 1e-14);
}

TEST(Copula, NestedWithEqualParametersReducesToFlat) {
    for (auto [f, th] : {std::pair{Family::clayton, 0.9}, {Family::gumbel, 1.7}}) {
        const auto nested = nested3(f, th, th);
        const auto flat = CopulaModel::flat(f, th, 3);
        const std::vector<double> u{0.2, 0.6, 0.85};
        EXPECT_NEAR(nested.cdf(u), flat.cdf(u), 1e-14);
        EXPECT_NEAR(nested.log_density(u), flat.log_density(u), 1e-11);
    }
}

TEST(Copula, RejectsInvalidStructures) {
    CopulaNode bad_order{ArchimedeanGenerator(Family::clayton, 2.0), {0},
                         {CopulaNode{ArchimedeanGenerator(Family::clayton, 1.0), {1, 2}, {}}}};
    EXPECT_THROW(CopulaModel::nested(bad_order), std::invalid_argument);
    CopulaNode mixed{ArchimedeanGenerator(Family::clayton, 1.0), {0},
                     {CopulaNode{ArchimedeanGenerator(Family::gumbel, 2.0), {1, 2}, {}}}};
    EXPECT_THROW(CopulaModel::nested(mixed), std::invalid_argument);
    CopulaNode dup{ArchimedeanGenerator(Family::clayton, 1.0), {0, 0}, {}};
    EXPECT_THROW(CopulaModel::nested(dup), std::invalid_argument);
    EXPECT_THROW(CopulaModel::flat(Family::frank, -1.0, 3), std::invalid_argument);
    EXPECT_THROW(CopulaModel::flat(Family::clayton, 1.0, 0), std::invalid_argument);
}

// Log-density against mixed central differences of the cdf (relative 1e-4).
struct DensityCase {
    const char* name;
    CopulaModel model;
    double h;
};

TEST(CopulaOracle, LogDensityMatchesFiniteDifferences) {
    const std::vector<DensityCase> cases{
        {"clayton2", CopulaModel::flat(Family::clayton, 1.0, 2), 1e-4},
        {"gumbel2", CopulaModel::flat(Family::gumbel, 1.5, 2), 1e-4},
        {"frank2", CopulaModel::flat(Family::frank, 2.0, 2), 1e-4},
        {"frank2neg", CopulaModel::flat(Family::frank, -3.0, 2), 1e-4},
        {"clayton3", CopulaModel::flat(Family::clayton, 2.12, 3), 1e-3},
        {"gumbel3", CopulaModel::flat(Family::gumbel, 1.25, 3), 1e-3},
        {"frank3", CopulaModel::flat(Family::frank, 5.0, 3), 1e-3},
        {"clayton_nested3", nested3(Family::clayton, 0.5, 0.75), 1e-3},
        {"clayton_nested3_bu", nested3(Family::clayton, 0.5, 1.0), 1e-3},
        {"gumbel_nested3", nested3(Family::gumbel, 1.2, 2.5), 1e-3},
    };
    const std::vector<std::vector<double>> probes{
        {0.3, 0.6, 0.45}, {0.8, 0.15, 0.7}, {0.52, 0.5, 0.9}, {0.1, 0.12, 0.2}, {0.85, 0.9, 0.75}};
    for (const auto& c : cases) {
        for (const auto& p : probes) {
            std::span<const double> u(p.data(), c.model.dim());
            const double fd = density_finite_difference(c.model, u, c.h);
            const double an = c.model.density(u);
            EXPECT_NEAR(an / fd, 1.0, 1e-4) << c.name << " at " << u[0] << "," << u[1];
        }
    }
}

TEST(CopulaOracle, FiniteDifferenceRejectsStencilOutsideCube) {
    const auto c = CopulaModel::flat(Family::clayton, 1.0, 2);
    EXPECT_THROW(density_finite_difference(c, std::vector<double>{1e-5, 0.5}, 1e-4), std::domain_error);
}

namespace {

struct SamplerCase {
    const char* name;
    CopulaModel model;
};

std::vector<SamplerCase> sampler_cases() {
    return {
        {"clayton5", CopulaModel::flat(Family::clayton, 1.0, 5)},
        {"clayton5_weak", CopulaModel::flat(Family::clayton, 0.16, 5)},
        {"gumbel3", CopulaModel::flat(Family::gumbel, 1.25, 3)},
        {"gumbel2_strong", CopulaModel::flat(Family::gumbel, 4.0, 2)},
        {"frank2", CopulaModel::flat(Family::frank, 2.0, 2)},
        {"frank2neg", CopulaModel::flat(Family::frank, -3.0, 2)},
        {"frank4", CopulaModel::flat(Family::frank, 6.0, 4)},
        {"clayton_bu7", business_unit_clayton()},
        {"gumbel_nested3", nested3(Family::gumbel, 1.2, 2.5)},
    };
}

}  // namespace

// P[U <= p] estimated from n = 10^6 draws agrees with C(p) within 4 sigma.
TEST(CopulaOracle, SamplerMatchesCdfAtProbePoints) {
    constexpr std::size_t n = 1'000'000;
    for (const auto& c : sampler_cases()) {
        const std::size_t d = c.model.dim();
        std::vector<std::vector<double>> probes;
        Rng probe_rng(derive_seed(11, {d}));
        for (int k = 0; k < 10; ++k) {
            std::vector<double> p(d);
            for (auto& v : p) v = 0.3 + 0.65 * uniform01(probe_rng);
            probes.push_back(p);
        }
        std::vector<std::size_t> hits(probes.size(), 0);
        Rng rng(derive_seed(2024, {d, static_cast<std::uint64_t>(c.model.root().generator.theta() * 1000)}));
        std::vector<double> u(d);
        for (std::size_t i = 0; i < n; ++i) {
            c.model.sample(rng, u);
            for (std::size_t k = 0; k < probes.size(); ++k) {
                bool in = true;
                for (std::size_t j = 0; j < d && in; ++j) in = u[j] <= probes[k][j];
                hits[k] += in;
            }
        }
        for (std::size_t k = 0; k < probes.size(); ++k) {
            const double pc = c.model.cdf(probes[k]);
            const double sd = std::sqrt(pc * (1 - pc) / n);
            EXPECT_NEAR(static_cast<double>(hits[k]) / n, pc, 4 * sd) << c.name << " probe " << k;
        }
    }
}

TEST(CopulaOracle, SamplesLieInOpenCube) {
    for (const auto& c : sampler_cases()) {
        Rng rng(5);
        for (int i = 0; i < 20000; ++i)
            for (double v : c.model.sample(rng)) {
                ASSERT_GT(v, 0.0) << c.name;
                ASSERT_LE(v, 1.0) << c.name;
            }
    }
}

// Normalization: with proposal q = (1 + c) / 2 (half uniform, half copula
// draws) the weight c / q is bounded by 2, and E_q[c / q] = integral of c = 1.
// A mis-normalized density shifts the mean; checked at 3 sigma, n = 10^6, d <= 5.
TEST(CopulaOracle, DensityIntegratesToOne) {
    const std::vector<SamplerCase> cases{
        {"clayton2", CopulaModel::flat(Family::clayton, 1.0, 2)},
        {"clayton5", CopulaModel::flat(Family::clayton, 1.0, 5)},
        {"clayton5_strong", CopulaModel::flat(Family::clayton, 2.12, 5)},
        {"gumbel3", CopulaModel::flat(Family::gumbel, 1.25, 3)},
        {"gumbel5", CopulaModel::flat(Family::gumbel, 1.25, 5)},
        {"frank2neg", CopulaModel::flat(Family::frank, -3.0, 2)},
        {"frank4", CopulaModel::flat(Family::frank, 3.0, 4)},
        {"clayton_nested3", nested3(Family::clayton, 0.5, 0.75)},
        {"gumbel_nested3", nested3(Family::gumbel, 1.2, 2.0)},
    };
    constexpr std::size_t n = 1'000'000;
    for (const auto& c : cases) {
        Rng rng(derive_seed(99, {c.model.dim()}));
        std::vector<double> u(c.model.dim());
        double s = 0.0;
        double s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i % 2 == 0) {
                for (auto& v : u) v = uniform01(rng);
            } else {
                c.model.sample(rng, u);
            }
            const double dens = c.model.density(u);
            const double x = std::isinf(dens) ? 2.0 : 2.0 * dens / (1.0 + dens);
            s += x;
            s2 += x * x;
        }
        const double mean = s / n;
        const double sd = std::sqrt((s2 / n - mean * mean) / n);
        EXPECT_NEAR(mean, 1.0, 3 * sd) << c.name;
    }
}

// The analytic density of the seven-cell model integrates, over a box, to the
// box probability obtained from the cdf by inclusion-exclusion.
TEST(CopulaOracle, NestedDensityBoxMassMatchesCdf) {
    const auto model = business_unit_clayton();
    const double lo = 0.35;
    const double hi = 0.9;
    double box = 0.0;
    std::vector<double> corner(7);
    for (unsigned mask = 0; mask < 128; ++mask) {
        int sign = 1;
        for (unsigned i = 0; i < 7; ++i) {
            const bool up = (mask >> i) & 1U;
            corner[i] = up ? hi : lo;
            if (!up) sign = -sign;
        }
        box += sign * model.cdf(corner);
    }
    constexpr std::size_t n = 1'000'000;
    Rng rng(321);
    std::vector<double> u(7);
    double s = 0.0;
    double s2 = 0.0;
    const double vol = std::pow(hi - lo, 7);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : u) v = lo + (hi - lo) * uniform01(rng);
        const double x = model.density(u) * vol;
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double sd = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_GT(box, 0.0);
    EXPECT_NEAR(mean, box, 3 * sd);
}

TEST(Copula, SamplingIsDeterministicGivenSeed) {
    const auto model = business_unit_clayton();
    Rng a(77);
    Rng b(77);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(model.sample(a), model.sample(b));
}

TEST(TailDependence, ClaytonLowerClosedForm) {
    // thetas calibrated to lower tail dependence 0.25, 0.5, 0.75, 0.9 at d = 5
    const std::vector<std::pair<double, double>> anchors{{0.16, 0.25}, {0.33, 0.5}, {0.78, 0.75}, {2.12, 0.9}};
    for (auto [th, lam] : anchors) EXPECT_NEAR(tail_dependence_lower(Family::clayton, th, 5), lam, 0.01);
    EXPECT_NEAR(tail_dependence_lower(Family::clayton, 2.12, 5), std::pow(0.8, 1 / 2.12), 1e-15);
    EXPECT_EQ(tail_dependence_lower(Family::gumbel, 2.0, 3), 0.0);
    EXPECT_EQ(tail_dependence_upper(Family::clayton, 2.0, 3), 0.0);
}

TEST(TailDependence, GumbelUpperBivariate) {
    for (double th : {1.25, 2.0, 5.0})
        EXPECT_NEAR(tail_dependence_upper(Family::gumbel, th, 2), 2 - std::pow(2.0, 1 / th), 1e-14);
}

// Independent oracle: the conditional probability from the copula itself near
// the corner.
TEST(TailDependence, MatchesCopulaLimits) {
    for (unsigned d : {2u, 3u, 4u}) {
        for (double th : {0.5, 1.0, 2.12}) {
            const auto cd = CopulaModel::flat(Family::clayton, th, d);
            const auto cd1 = CopulaModel::flat(Family::clayton, th, d - 1);
            const double u = 1e-9;
            const double ratio = cd.cdf(std::vector<double>(d, u)) / cd1.cdf(std::vector<double>(d - 1, u));
            EXPECT_NEAR(ratio, tail_dependence_lower(Family::clayton, th, d), 1e-3);
        }
        for (double th : {1.25, 2.0}) {
            // survival of the diagonal by inclusion-exclusion
            auto joint_survival = [&](unsigned k, double u) {
                double s = 0.0;
                for (unsigned j = 0; j <= k; ++j) {
                    const double cj = j == 0 ? 1.0
                                   : j == 1 ? u
                                            : CopulaModel::flat(Family::gumbel, th, j).cdf(std::vector<double>(j, u));
                    s += comb::binomial(k, j) * ((j % 2) ? -1.0 : 1.0) * cj;
                }
                return s;
            };
            const double u = 1.0 - 1e-5;
            const double ratio = joint_survival(d, u) / joint_survival(d - 1, u);
            EXPECT_NEAR(ratio, tail_dependence_upper(Family::gumbel, th, d), 2e-3) << d << " " << th;
        }
    }
}

TEST(TailDependence, GumbelDimensionSweepValues) {
    // sum_{i=1}^d C(d,i)(-1)^i i^(1/theta) / sum_{i=1}^{d-1} C(d-1,i)(-1)^i i^(1/theta), theta = 1.25
    const std::vector<double> expect{0.2589, 0.7143, 0.8374, 0.8909, 0.9198, 0.9376};
    for (unsigned d = 2; d <= 7; ++d)
        EXPECT_NEAR(tail_dependence_upper(Family::gumbel, 1.25, d), expect[d - 2], 1e-4) << d;
}

TEST(TailDependence, InverseRoundTrip) {
    for (double lam : {0.25, 0.5, 0.75, 0.9}) {
        const double th = inverse_tail_dependence(Family::clayton, Tail::lower, lam, 5);
        EXPECT_NEAR(tail_dependence_lower(Family::clayton, th, 5), lam, 1e-10);
        const double tg = inverse_tail_dependence(Family::gumbel, Tail::upper, lam, 2);
        EXPECT_NEAR(tail_dependence_upper(Family::gumbel, tg, 2), lam, 1e-10);
    }
    for (double lam : {0.75, 0.9}) {
        const double tg = inverse_tail_dependence(Family::gumbel, Tail::upper, lam, 3);
        EXPECT_NEAR(tail_dependence_upper(Family::gumbel, tg, 3), lam, 1e-10);
    }
    // d = 3: as theta -> 1+ the coefficient tends to (6 ln 2 - 3 ln 3) / (2 ln 2) ~ 0.6226
    EXPECT_NEAR(tail_dependence_upper(Family::gumbel, 1.0 + 1e-9, 3),
                (6 * std::log(2.0) - 3 * std::log(3.0)) / (2 * std::log(2.0)), 1e-6);
    EXPECT_THROW(inverse_tail_dependence(Family::gumbel, Tail::upper, 0.5, 3), std::domain_error);
    EXPECT_THROW(inverse_tail_dependence(Family::clayton, Tail::upper, 0.5, 3), std::domain_error);
    EXPECT_THROW(inverse_tail_dependence(Family::clayton, Tail::lower, 1.2, 3), std::domain_error);
    EXPECT_THROW(tail_dependence_lower(Family::clayton, 1.0, 1), std::invalid_argument);
}

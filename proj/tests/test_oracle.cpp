#include "reference.hpp"

#include "sslab/fd.hpp"
#include "sslab/oracle.hpp"

#include <doctest.h>

#include <random>

using namespace sslab;

namespace {

const ContextPoint kW = ContextPoint::make({1.0, 2.0}, 10.0);
const GoodIndex g1(1), g2(2);

std::shared_ptr<const DemandSystem> copula_cd3(double rho) {
    ShareLaw law;
    law.rho = rho;
    return make_cd3(law);
}

} // namespace

TEST_CASE("marginal cdf and quantile of a uniform share") {
    const PopulationOracle o(make_cd3());
    CHECK(o.marginal_cdf(kW, g1, 3.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(o.marginal_cdf(kW, g1, 2.0) == doctest::Approx(0.0));
    CHECK(o.marginal_cdf(kW, g1, 4.0) == doctest::Approx(1.0));
    CHECK(o.marginal_cdf(kW, g1, 3.5) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(o.marginal_quantile(kW, g1, 0.5) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(o.marginal_quantile(kW, g1, 0.25) == doctest::Approx(2.5).epsilon(1e-12));
    for (double level : {0.01, 0.3, 0.77, 0.99})
        CHECK(std::abs(o.marginal_cdf(kW, g1, o.marginal_quantile(kW, g1, level)) - level) < 1e-9);
    CHECK_THROWS_AS(o.marginal_quantile(kW, g1, 1.0), ArgumentError);
    CHECK_THROWS_AS(o.marginal_quantile(kW, g1, 0.0), ArgumentError);
}

TEST_CASE("independent shares: conditional objects equal marginal ones") {
    const PopulationOracle o(make_cd3());
    for (double yj : {1.6, 2.0, 2.4}) {
        for (double yi : {2.2, 3.0, 3.9})
            CHECK(o.conditional_cdf(kW, g1, g2, yj, yi) ==
                  doctest::Approx(o.marginal_cdf(kW, g1, yi)).epsilon(1e-12));
        for (double level : {0.1, 0.5, 0.9})
            CHECK(o.conditional_quantile(kW, g1, g2, yj, level) ==
                  doctest::Approx(o.marginal_quantile(kW, g1, level)).epsilon(1e-12));
    }
    // Free of the conditioning context and value under independence.
    const ContextPoint other = ContextPoint::make({1.1, 1.8}, 11.0);
    CHECK(o.two_context_conditional_cdf(kW, other, g1, g2, 2.3, 3.2) ==
          doctest::Approx(o.marginal_cdf(kW, g1, 3.2)).epsilon(1e-12));
    CHECK(o.conditional_density(kW, g1, g2, 2.0, 3.0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("conditional cdf is monotone and density integrates to one") {
    const PopulationOracle o(copula_cd3(0.5));
    double prev = -1.0;
    for (int k = 0; k < 100; ++k) {
        const double y = 2.0 + 2.0 * k / 99.0;
        const double v = o.conditional_cdf(kW, g1, g2, 2.2, y);
        CHECK(v >= prev);
        prev = v;
    }
    const int m = 4000;
    double integral = 0.0;
    for (int k = 0; k < m; ++k) {
        const double y = 2.0 + 2.0 * (k + 0.5) / m;
        try {
            integral += o.conditional_density(kW, g1, g2, 2.2, y) * 2.0 / m;
        } catch (const DegeneracyError&) {
        }
    }
    CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("two-context cdf with equal contexts is the observable one") {
    const PopulationOracle o(copula_cd3(0.5));
    for (double yi : {2.4, 3.0, 3.6})
        CHECK(o.two_context_conditional_cdf(kW, kW, g1, g2, 2.2, yi) ==
              doctest::Approx(o.conditional_cdf(kW, g1, g2, 2.2, yi)).epsilon(1e-12));
}

TEST_CASE("copula conditional objects against a Monte Carlo reference") {
    const PopulationOracle o(copula_cd3(0.5));
    ref::Copula c;
    c.rho = 0.5;
    // y_2 = 2.2 pins a_2 = 0.44, off the median where dependence shows.
    const double a2 = 0.44;
    const double mc = c.cond_cdf_a1(0.3, a2, 1'000'000, 17);
    CHECK(std::abs(o.two_context_conditional_cdf(kW, kW, g1, g2, 2.2, 3.0) - mc) < 2e-3);
    CHECK(std::abs(o.conditional_cdf(kW, g1, g2, 2.2, 3.0) - o.marginal_cdf(kW, g1, 3.0)) > 0.01);

    const double q = c.cond_quantile_a1(0.5, a2, 1'000'000, 19) * 10.0; // Y_1 = a_1 x / p_1
    CHECK(std::abs(o.conditional_quantile(kW, g1, g2, 2.2, 0.5) - q) < 2e-3);

    // Histogram density of a_1 | a_2, mapped to Y_1 = 10 a_1.
    std::mt19937_64 gen(23);
    std::normal_distribution<double> nd;
    const double z2 = c.latent2(a2);
    const double t = 0.29, half = 0.002;
    const int draws = 4'000'000;
    int hits = 0;
    for (int k = 0; k < draws; ++k) {
        const double a1 = c.share1(0.5 * z2 + std::sqrt(0.75) * nd(gen));
        hits += std::abs(a1 - t) < half ? 1 : 0;
    }
    const double dens = hits / (draws * 2.0 * half) / 10.0;
    CHECK(std::abs(o.conditional_density(kW, g1, g2, 2.2, 10.0 * t) - dens) < 5e-3);

    for (double level : {0.2, 0.5, 0.8}) {
        const double y = o.conditional_quantile(kW, g1, g2, 2.2, level);
        CHECK(std::abs(o.conditional_cdf(kW, g1, g2, 2.2, y) - level) < 1e-9);
    }
}

TEST_CASE("Monte Carlo integration agrees with quadrature") {
    OracleSettings mc;
    mc.integration = Integration::MonteCarlo;
    mc.draws = 400'000;
    const PopulationOracle quad(copula_cd3(0.5));
    const PopulationOracle sim(copula_cd3(0.5), mc);
    CHECK(std::abs(sim.marginal_cdf(kW, g1, 2.7) - quad.marginal_cdf(kW, g1, 2.7)) < 5e-3);
    CHECK(std::abs(sim.conditional_cdf(kW, g1, g2, 2.2, 3.0) -
                   quad.conditional_cdf(kW, g1, g2, 2.2, 3.0)) < 5e-3);
    // Common random numbers: repeated queries are identical.
    CHECK(sim.marginal_cdf(kW, g1, 2.7) == sim.marginal_cdf(kW, g1, 2.7));
}

TEST_CASE("conditional expectation of structural derivatives at a pinned point") {
    const PopulationOracle o(make_cd3());
    CHECK(o.conditional_expectation_partial(kW, 1, g1, g2, 3.0, 2.0) == doctest::Approx(-3.0));
    CHECK(o.conditional_expectation_partial(kW, 2, g1, g2, 3.0, 2.0) == doctest::Approx(0.0));
    CHECK(o.conditional_expectation_partial(kW, 3, g1, g2, 3.0, 2.0) == doctest::Approx(0.3));
    CHECK_THROWS_AS(o.conditional_expectation_partial(kW, 4, g1, g2, 3.0, 2.0), ArgumentError);
    // Outside the image the pinned share leaves the support.
    CHECK_THROWS_AS(o.conditional_expectation_partial(kW, 1, g1, g2, 5.0, 2.0), DomainError);
}

TEST_CASE("finite differences") {
    FdScheme plain{1e-3, false, false};
    CHECK(fd_partial([](double t) { return t * t; }, 3.0, plain) == doctest::Approx(6.0).epsilon(1e-9));
    FdScheme rich{1e-2, true, false};
    CHECK(std::abs(fd_partial([](double t) { return std::sin(t); }, 0.0, rich) - 1.0) < 1e-10);
    CHECK(fd_partial([](double) { return 4.2; }, 1.0, plain) == 0.0);
    CHECK_THROWS_AS(fd_partial([](double t) { return t; }, 1.0, FdScheme{0.0, false, false}),
                    ArgumentError);
}

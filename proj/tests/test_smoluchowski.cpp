#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "perdiff/errors.hpp"
#include "perdiff/smoluchowski.hpp"

using namespace perdiff;
constexpr double pi = std::numbers::pi;

TEST_CASE("Smoluchowski diffusivity") {
    CHECK(dbar(PeriodicPotential::zero(), 1.0).value == 1.0);
    CHECK(dbar(PeriodicPotential::zero(), 2.0).value == 0.5);
    const double i0 = oracle::bessel_i(0, 1.0);
    const auto d = dbar(PeriodicPotential::pendulum(), 1.0);
    CHECK(d.value == doctest::Approx(1.0 / (i0 * i0)).epsilon(1e-12));
    CHECK(d.value == doctest::Approx(0.62387).epsilon(1e-5));
    CHECK(d.method == "smoluchowski-formula");
    const PeriodicPotential V({0.8, 0.25}, {-0.3});
    for (double beta : {0.3, 1.0, 4.0}) {
        const double base = dbar(V, beta).value;
        CHECK(base <= 1.0 / beta);
        CHECK(dbar(V.translated(0.41), beta).value == doctest::Approx(base).epsilon(1e-12));
        CHECK(dbar(V.shifted(3.0), beta).value == doctest::Approx(base).epsilon(1e-12));
    }
    CHECK_THROWS_AS(dbar(V, 0.0), DomainError);
}

TEST_CASE("corrector of the one-dimensional cell problem") {
    auto c = corrector_chi(PeriodicPotential::zero(), 1.0, 32);
    for (double x : c.chi) CHECK(std::abs(x) < 1e-14);

    c = corrector_chi(PeriodicPotential::pendulum(), 1.0, 64);
    CHECK(c.one_plus_dchi[0] == doctest::Approx(std::exp(1.0) / oracle::bessel_i(0, 1.0)).epsilon(1e-12));
    CHECK(c.one_plus_dchi[0] == doctest::Approx(2.1470).epsilon(1e-4));
    CHECK(c.identity_error < 1e-8);

    // mean zero, and the finite-difference derivative reproduces 1 + chi' - 1
    double mean = 0.0, dmean = 0.0;
    const int n = static_cast<int>(c.chi.size());
    for (int j = 0; j < n; ++j) {
        mean += c.chi[j] / n;
        dmean += (c.one_plus_dchi[j] - 1.0) / n;
    }
    CHECK(std::abs(mean) < 1e-13);
    CHECK(std::abs(dmean) < 1e-12);

    const auto fine = corrector_chi(PeriodicPotential::pendulum(), 1.0, 4096);
    for (int j : {100, 1000, 2500}) {
        const double h = 1.0 / 4096;
        const double fd = (fine.chi[j + 1] - fine.chi[j - 1]) / (2 * h);
        CHECK(fd == doctest::Approx(fine.one_plus_dchi[j] - 1.0).epsilon(1e-5));
    }
    CHECK_THROWS_AS(corrector_chi(PeriodicPotential::pendulum(), 1.0, 8), DomainError);
}

TEST_CASE("large friction expansion") {
    for (double gamma : {0.5, 3.0, 40.0})
        CHECK(dgamma_large_expansion(PeriodicPotential::zero(), 1.0, gamma) ==
              doctest::Approx(1.0 / gamma).epsilon(1e-14));

    const auto t = dgamma_large_expansion_terms(PeriodicPotential::pendulum(), 1.0, 10.0);
    CHECK(t.leading == doctest::Approx(0.062386).epsilon(2e-5));
    CHECK(t.correction == doctest::Approx(0.010994).epsilon(1e-4));
    CHECK(t.value() == doctest::Approx(0.051392).epsilon(1e-4));

    const auto V = PeriodicPotential::pendulum();
    const double i0 = oracle::bessel_i(0, 1.0), i1 = oracle::bessel_i(1, 1.0);
    for (double gamma : {2.0, 10.0, 100.0}) {
        const double gap = dgamma_large_expansion(V, 1.0, gamma) - dbar(V, 1.0).value / gamma;
        CHECK(gap < 0.0);
        CHECK(-gap == doctest::Approx(4 * pi * pi * i1 / (std::pow(gamma, 3) * i0 * i0 * i0)).epsilon(1e-10));
    }
    CHECK(1000.0 * dgamma_large_expansion(V, 1.0, 1000.0) == doctest::Approx(dbar(V, 1.0).value).epsilon(1e-4));
}

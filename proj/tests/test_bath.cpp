#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <dqme/bath.hpp>

using namespace dqme;

namespace
{

const SpectralDensity unit_bo = SpectralDensity::brownian(1.0, 1.0, 1.0);

}

TEST_CASE("Brownian oscillator spectral density values")
{
    CHECK(evaluate_spectral_density(unit_bo, 0.0) == 0.0);
    CHECK(evaluate_spectral_density(unit_bo, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
    const auto half = SpectralDensity::brownian(0.5, 1.0, 1.0);
    CHECK(evaluate_spectral_density(half, -1.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK_THROWS_AS(evaluate_spectral_density(unit_bo, std::nan("")), InputError);
    CHECK_THROWS_AS(SpectralDensity::brownian(-1.0, 1.0, 1.0), InputError);
}

TEST_CASE("spectral densities are odd and positive on the positive axis")
{
    const SpectralDensity kinds[] = {unit_bo, SpectralDensity::brownian(0.3, 2.0, 0.7),
                                     SpectralDensity::drude(0.4, 1.5)};
    for (const auto& J : kinds)
    {
        for (Real w = 0.01; w < 50.0; w *= 1.37)
        {
            const Real jp = evaluate_spectral_density(J, w);
            CHECK(jp > 0.0);
            CHECK(evaluate_spectral_density(J, -w) == -jp);
        }
    }
}

TEST_CASE("FDT correlation matches high-precision reference values")
{
    // Reference from an independent 30-digit oscillatory quadrature.
    const Real times[] = {0.0, 1.0, 2.0};
    const Complex ref[] = {{2.1476413900875088, 0.0},
                           {1.3418416715817821, -0.53350719511469298},
                           {0.25751874479433621, -0.41927962966633185}};
    const auto c = fdt_correlation(unit_bo, 1.0, times);
    for (int i = 0; i < 3; ++i)
    {
        CHECK(std::abs(c[static_cast<std::size_t>(i)].value - ref[i]) < 1e-9);
    }
    CHECK(c[0].value.real() > 0.0);
    CHECK(std::abs(c[0].value.imag()) < 1e-14);

    // two resolutions agree
    CorrelationQuadratureOptions loose;
    loose.abs_tol = 1e-10;
    loose.rel_tol = 1e-9;
    const auto coarse = fdt_correlation(unit_bo, 1.0, times, loose);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(coarse[static_cast<std::size_t>(i)].value - c[static_cast<std::size_t>(i)].value) < 1e-8);
}

TEST_CASE("FDT correlation reports non-convergence")
{
    // C(0) diverges logarithmically for a Drude bath
    CHECK_THROWS_AS(fdt_correlation(SpectralDensity::drude(1.0, 1.0), 1.0, 0.0), NumericalError);
    CHECK_THROWS_AS(fdt_correlation(unit_bo, -1.0, 0.0), InputError);
}

TEST_CASE("Brownian oscillator decomposition")
{
    const auto set = decompose_correlation(unit_bo, 1.0, 3);
    REQUIRE(set.size() == 5);
    CHECK(std::abs(set[0].gamma - Complex(0.5, -std::sqrt(0.75))) < 1e-14);
    CHECK(std::abs(set[1].gamma - Complex(0.5, std::sqrt(0.75))) < 1e-14);
    for (int n = 1; n <= 3; ++n)
    {
        CHECK(std::abs(set[1 + n].gamma - Complex(2.0 * std::numbers::pi * n, 0.0)) < 1e-12);
        CHECK(set[1 + n].eta.imag() == 0.0);
    }
    CHECK(set.bar_map() == std::vector<int>{1, 0, 2, 3, 4});

    const auto zero = decompose_correlation(SpectralDensity::brownian(0.0, 1.0, 1.0), 1.0, 3);
    for (const auto& m : zero.modes)
        CHECK(m.eta == Complex(0.0));

    CHECK_THROWS_AS(decompose_correlation(SpectralDensity::brownian(1.0, 1.0, 2.0), 1.0, 3), InputError);
}

TEST_CASE("reconstruction fidelity and its failure mode")
{
    const auto set    = decompose_correlation(unit_bo, 1.0, 20);
    const auto report = reconstruction_error(set, unit_bo, 5.0, 251);
    CHECK(report.max_relative_error <= 1e-3);

    DecompositionOptions strict;
    strict.tolerance = 1e-7;
    CHECK_THROWS_AS(decompose_correlation(unit_bo, 1.0, 0, strict), NumericalError);

    for (Real t = 0.0; t < 6.0; t += 0.37)
        CHECK(std::abs(set.reversed_correlation(t) - std::conj(set.correlation(t))) < 1e-13);
}

TEST_CASE("bath variance")
{
    const auto set = decompose_correlation(unit_bo, 1.0, 20);
    const Real c0  = fdt_correlation(unit_bo, 1.0, 0.0).real();
    // Matsubara tail beyond n = 20 contributes ~ sum 4 lambda w0^2 g / (beta nu^3)
    CHECK(std::abs(bath_variance(set) - c0) < 2e-5);
    const auto many = decompose_correlation(unit_bo, 1.0, 400);
    CHECK(std::abs(bath_variance(many) - c0) < 1e-6);

    const auto zero = decompose_correlation(SpectralDensity::brownian(0.0, 1.0, 1.0), 1.0, 2);
    CHECK(bath_variance(zero) == 0.0);

    // Drude: the pole carries Im C(0+) = -lambda c, which is not part of <F^2>_B
    const auto drude = decompose_correlation(SpectralDensity::drude(0.3, 2.0), 0.5, 3);
    Complex eta_sum{};
    for (const auto& m : drude.modes)
        eta_sum += m.eta;
    CHECK(eta_sum.imag() == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(bath_variance(drude) == doctest::Approx(eta_sum.real()).epsilon(1e-14));
}

TEST_CASE("pairing")
{
    const std::vector<Complex> g = {{0.5, -0.866}, {0.5, 0.866}, {6.283, 0.0}};
    CHECK(pair_indices(g) == std::vector<int>{1, 0, 2});
    const std::vector<Complex> real = {{1.0, 0.0}, {2.0, 0.0}};
    CHECK(pair_indices(real) == std::vector<int>{0, 1});
    const std::vector<Complex> lonely = {{1.0, 1.0}};
    CHECK_THROWS_WITH_AS(pair_indices(lonely), doctest::Contains("missing conjugate partner"), NumericalError);
    const std::vector<Complex> twice = {{1.0, 1.0}, {1.0, -1.0}, {1.0, -1.0}};
    CHECK_THROWS_WITH_AS(pair_indices(twice), doctest::Contains("ambiguous"), NumericalError);
}

TEST_CASE("dissipaton coefficients")
{
    DissipatonModeSet single;
    single.modes.push_back({4.0, 1.0, 0});
    dissipaton_coefficients(single);
    CHECK(single[0].zeta == Complex(2.0));
    CHECK(single[0].xi == Complex(0.0));

    DissipatonModeSet bad;
    bad.modes.push_back({Complex(0.0, 1.0), 1.0, 0});
    CHECK_THROWS_AS(dissipaton_coefficients(bad), NumericalError);

    std::mt19937 rng(7);
    std::uniform_real_distribution<Real> u(0.1, 3.0);
    for (int trial = 0; trial < 25; ++trial)
    {
        const Real g  = u(rng);
        const Real w0 = 0.5 * g + u(rng);
        const auto J  = SpectralDensity::brownian(u(rng), w0, g);
        DecompositionOptions opt;
        opt.check_reconstruction = false;
        const auto set = decompose_correlation(J, u(rng), 4, opt);
        for (Index k = 0; k < set.size(); ++k)
        {
            const auto& m = set[k];
            const auto& p = set[m.bar];
            CHECK(m.gamma.real() > 0.0);
            CHECK(set[m.bar].bar == k);
            CHECK(std::abs(p.gamma - std::conj(m.gamma)) < 1e-12 * std::abs(m.gamma));
            CHECK(std::abs(m.zeta * m.zeta + I * m.zeta * m.xi - m.eta) < 1e-12 * std::max(1.0, std::abs(m.eta)));
            if (m.bar != k)
            {
                CHECK(std::abs(p.zeta - std::conj(m.zeta)) < 1e-12);
                CHECK(std::abs(p.xi - std::conj(m.xi)) < 1e-12);
            }
            else
            {
                // self-paired: zeta^2 = Re eta, which may be negative
                CHECK(std::abs(m.zeta * m.zeta - m.eta.real()) < 1e-12 * std::max(1.0, std::abs(m.eta)));
            }
        }
        CHECK_NOTHROW(bath_variance(set));
    }
}

TEST_CASE("Drude decomposition")
{
    const auto J   = SpectralDensity::drude(0.5, 2.0);
    const Real beta = 0.7;
    const auto set = decompose_correlation(J, beta, 2);
    REQUIRE(set.size() == 3);
    CHECK(set[0].gamma == Complex(2.0));
    const Complex eta0 = 0.5 * 2.0 * Complex(1.0 / std::tan(beta), -1.0);
    CHECK(std::abs(set[0].eta - eta0) < 1e-13);
    for (int n = 1; n <= 2; ++n)
    {
        const Real nu = 2.0 * std::numbers::pi * n / beta;
        CHECK(std::abs(set[n].eta.real() - 4.0 * 0.5 * 2.0 / beta * nu / (nu * nu - 4.0)) < 1e-13);
    }
    // exact against quadrature for t > 0 with many terms
    const auto many = decompose_correlation(J, beta, 2000);
    for (Real t : {0.3, 1.0, 2.5})
        CHECK(std::abs(many.correlation(t) - fdt_correlation(J, beta, t)) < 1e-7);
}

TEST_CASE("mode set JSON round trip")
{
    const auto set  = decompose_correlation(unit_bo, 1.0, 3);
    const auto back = mode_set_from_json(mode_set_to_json(set));
    REQUIRE(back.size() == set.size());
    CHECK(back.beta == set.beta);
    for (Index k = 0; k < set.size(); ++k)
    {
        CHECK(back[k].eta == set[k].eta);
        CHECK(back[k].gamma == set[k].gamma);
        CHECK(back[k].bar == set[k].bar);
        CHECK(back[k].zeta == set[k].zeta);
    }
    CHECK_THROWS_AS(mode_set_from_json("{\"beta\": 1}"), InputError);
}

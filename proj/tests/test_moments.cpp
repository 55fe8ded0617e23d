#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include <dqme/moments.hpp>
#include <dqme/propagator.hpp>

using namespace dqme;

namespace
{

Matrix pauli_x()
{
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}
Matrix pauli_z()
{
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

DissipatonModeSet bo_modes(Real lambda, Real beta, int n_mats)
{
    DecompositionOptions opt;
    opt.check_reconstruction = false;
    return decompose_correlation(SpectralDensity::brownian(lambda, 1.0, 1.0), beta, n_mats, opt);
}

// A spin-boson store propagated for a while, so every tier is populated.
DDOStore propagated(const DissipatonModeSet& modes, int L, Real t_end)
{
    SystemModel model{0.3 * pauli_z() + 0.4 * pauli_x(), pauli_z()};
    Matrix rho    = Matrix::Zero(2, 2);
    rho(0, 0)     = 1.0;
    auto store    = initial_state(rho, static_cast<int>(modes.size()), L);
    PropagationOptions opt;
    opt.dt    = 0.005;
    opt.t_end = t_end;
    propagate(store, model, modes, opt);
    return store;
}

// Moment-to-cumulant map by the exponential formula over set partitions.
Real cumulant_by_partitions(const std::vector<Real>& mu, int n)
{
    Real total = 0.0;
    std::vector<int> block(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int blocks) {
        if (i == n)
        {
            std::vector<int> size(static_cast<std::size_t>(blocks), 0);
            for (int b : block)
                ++size[static_cast<std::size_t>(b)];
            Real term = 1.0;
            for (int s : size)
                term *= mu[static_cast<std::size_t>(s - 1)];
            Real f = 1.0;
            for (int j = 2; j < blocks; ++j)
                f *= j;
            total += ((blocks - 1) % 2 ? -1.0 : 1.0) * f * term;
            return;
        }
        for (int b = 0; b <= blocks; ++b)
        {
            block[static_cast<std::size_t>(i)] = b;
            rec(i + 1, std::max(blocks, b + 1));
        }
    };
    rec(0, 0);
    return total;
}

} // namespace

TEST_CASE("irreducible and hybrid moments at a factorized start")
{
    auto modes = bo_modes(1.0, 1.0, 2);
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0)  = 1.0;
    auto store = initial_state(rho, 4, 4);
    CHECK(irreducible_moment(store, 0) == Complex(1.0));
    for (int n = 1; n <= 4; ++n)
        CHECK(irreducible_moment(store, n) == Complex(0.0));
    const Real var = bath_variance(modes);
    CHECK(hybrid_moment(store, modes, 1) == 0.0);
    CHECK(hybrid_moment(store, modes, 2) == doctest::Approx(var).epsilon(1e-14));
    CHECK(hybrid_moment(store, modes, 3) == 0.0);
    CHECK(hybrid_moment(store, modes, 4) == doctest::Approx(3.0 * var * var).epsilon(1e-14));
    CHECK_THROWS_WITH_AS(hybrid_moment(store, modes, 5), doctest::Contains("insufficient truncation"), InputError);

    const auto rec = moment_record(store, modes, 4);
    REQUIRE(rec.skewness);
    CHECK(std::abs(*rec.skewness) <= 1e-8);
    CHECK(std::abs(*rec.kurtosis) <= 1e-8);
}

TEST_CASE("Drude variance excludes the imaginary part of C(0+)")
{
    const auto modes = decompose_correlation(SpectralDensity::drude(0.2, 1.0), 0.5, 0);
    Complex eta_sum{};
    for (const auto& m : modes.modes)
        eta_sum += m.eta;
    CHECK(eta_sum.imag() == doctest::Approx(-0.2).epsilon(1e-12));
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0)  = 1.0;
    const auto store = initial_state(rho, 1, 4);
    CHECK(hybrid_moment(store, modes, 2) == doctest::Approx(eta_sum.real()).epsilon(1e-14));
    CHECK(hybrid_moment(store, modes, 4) == doctest::Approx(3.0 * eta_sum.real() * eta_sum.real()).epsilon(1e-14));
    const auto rec = moment_record(store, modes, 4);
    CHECK(std::abs(*rec.kurtosis) <= 1e-12);
}

TEST_CASE("low-order moments written out")
{
    auto modes      = bo_modes(0.5, 1.0, 1);
    auto store      = propagated(modes, 4, 1.5);
    const auto& idx = store.index();
    Complex first{};
    for (int k = 0; k < 3; ++k)
        first += store.at(*raise(MultiIndex(3), k, 4)).trace();
    CHECK(std::abs(irreducible_moment(store, 1) - first) < 1e-14);

    Complex second = bath_variance(modes);
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
        {
            MultiIndex n(3);
            ++n[k];
            ++n[j];
            second += store.at(n).trace();
        }
    CHECK(std::abs(hybrid_moment_complex(store, modes, 2) - second) < 1e-13);
    (void)idx;
}

TEST_CASE("x-moments: special cases")
{
    auto modes = bo_modes(0.5, 1.0, 1);
    auto store = propagated(modes, 4, 1.5);
    CHECK(std::abs(x_moment(store, modes, MultiIndex(3)) - 1.0) < 1e-14);
    for (int k = 0; k < 3; ++k)
    {
        MultiIndex e(3);
        e[k] = 1;
        CHECK(std::abs(x_moment(store, modes, e) - store.at(e).trace() / modes[k].zeta) < 1e-14);
        e[k] = 2;
        CHECK(std::abs(x_moment(store, modes, e) - (store.at(e).trace() / (modes[k].zeta * modes[k].zeta) + 1.0)) <
              1e-13);
    }

    Matrix rho = Matrix::Zero(2, 2);
    rho(1, 1)  = 1.0;
    auto start = initial_state(rho, 3, 4);
    for (int k = 0; k < 3; ++k)
    {
        MultiIndex e(3);
        e[k] = 2;
        CHECK(std::abs(x_moment(start, modes, e) - 1.0) < 1e-15);
    }
    const auto table = x_moment_table(store, modes);
    CHECK(std::abs(table(MultiIndex{1, 1, 0}) - x_moment(store, modes, MultiIndex{1, 1, 0})) < 1e-14);
}

TEST_CASE("x-moments of a conjugate pair are complex conjugates")
{
    // BO poles only: zeta_bar = conj(zeta) holds for every mode.
    auto modes = bo_modes(0.8, 1.0, 0);
    auto store = propagated(modes, 5, 2.0);
    const auto table = x_moment_table(store, modes);
    const auto bar   = modes.bar_map();
    for (Index i = 0; i < store.size(); ++i)
    {
        const auto n = store.index().multi_index(i);
        CHECK(std::abs(table(conjugate_index(n, bar)) - std::conj(table(n))) < 1e-12);
    }
}

TEST_CASE("dual routes to the hybrid moments agree")
{
    auto modes = bo_modes(0.5, 1.0, 2);
    auto store = propagated(modes, 4, 2.0);
    const auto table = x_moment_table(store, modes, 4);
    for (int n = 1; n <= 4; ++n)
    {
        const Real a = hybrid_moment(store, modes, n);
        const Real b = hybrid_moment_via_x(table, modes, n);
        CHECK(std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(a)));
    }
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0)  = 1.0;
    auto start = initial_state(rho, 4, 4);
    CHECK(std::abs(hybrid_moment_via_x(x_moment_table(start, modes), modes, 3)) < 1e-14);
}

TEST_CASE("coefficient maps are mutually inverse")
{
    for (Complex zeta : {Complex(1.3, 0.0), Complex(0.8, -0.45), Complex(0.0, 0.37)})
    {
        const Matrix c    = x_coefficient_matrix(6, zeta);
        const Matrix cbar = ddo_coefficient_matrix(6, zeta);
        CHECK((cbar * c - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((c * cbar - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff() <= 1e-10);
    }

    auto modes = bo_modes(0.5, 1.0, 0);
    auto index = std::make_shared<const HierarchyIndex>(2, 3);
    DDOStore store(index, 2);
    std::mt19937 rng(21);
    std::normal_distribution<Real> g;
    for (Index e = 0; e < store.data().size(); ++e)
        store.data()[e] = Complex(g(rng), g(rng));
    const auto x    = x_operators(store, modes);
    const auto back = ddos_from_x_operators(x, modes);
    CHECK((back.data() - store.data()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((ddo_from_x_moments(x, modes, MultiIndex{0, 0}) - Matrix(x[0])).norm() == 0.0);
    CHECK((ddo_from_x_moments(x, modes, MultiIndex{1, 0}) - modes[0].zeta * Matrix(x[1])).norm() < 1e-14);
    CHECK_THROWS_AS(ddo_from_x_moments(x, modes, MultiIndex{2, 2}), InputError);
}

TEST_CASE("cumulants")
{
    const Real s2 = 0.7;
    auto gauss    = cumulants({0.0, s2, 0.0, 3.0 * s2 * s2});
    CHECK(gauss[2] == 0.0);
    CHECK(std::abs(gauss[3]) < 1e-15);

    const std::vector<Real> mu = {1.0, 2.0, 5.0, 16.0};
    const auto k               = cumulants(mu);
    for (int n = 1; n <= 4; ++n)
        CHECK(k[static_cast<std::size_t>(n - 1)] == doctest::Approx(cumulant_by_partitions(mu, n)).epsilon(1e-14));
    CHECK(k[1] == 1.0);

    std::mt19937 rng(2);
    std::uniform_real_distribution<Real> u(-2.0, 2.0);
    std::vector<Real> r(6);
    for (auto& v : r)
        v = u(rng);
    const auto kr = cumulants(r);
    for (int n = 1; n <= 6; ++n)
        CHECK(kr[static_cast<std::size_t>(n - 1)] ==
              doctest::Approx(cumulant_by_partitions(r, n)).epsilon(1e-12).scale(1.0));

    const auto flat = moment_record_from_raw({1.0, 1.0, 1.0, 1.0});
    CHECK_FALSE(flat.sigma.has_value());
    CHECK_FALSE(flat.skewness.has_value());
}

TEST_CASE("imaginary residues are rejected")
{
    auto modes = bo_modes(0.5, 1.0, 1);
    auto store = propagated(modes, 3, 1.0);
    CHECK(std::abs(hybrid_moment_complex(store, modes, 2).imag()) <= 1e-8);
    store[store.index().position(MultiIndex{1, 1, 0})](0, 0) += Complex(0.0, 1e-3);
    CHECK_THROWS_AS(hybrid_moment(store, modes, 2), NumericalError);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

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

SystemModel spin_boson(Real eps, Real v)
{
    return {0.5 * eps * pauli_z() + v * pauli_x(), pauli_z()};
}

Matrix pure(int i)
{
    Matrix m = Matrix::Zero(2, 2);
    m(i, i)  = 1.0;
    return m;
}

DissipatonModeSet bo_modes(Real lambda, Real beta, int n_mats)
{
    DecompositionOptions opt;
    opt.check_reconstruction = false;
    return decompose_correlation(SpectralDensity::brownian(lambda, 1.0, 1.0), beta, n_mats, opt);
}

} // namespace

TEST_CASE("decoupled system evolves by the commutator only")
{
    auto modes = bo_modes(0.0, 1.0, 1);
    auto model = spin_boson(0.6, 0.4);
    Matrix rho(2, 2);
    rho << 0.6, Complex(0.1, 0.2), Complex(0.1, -0.2), 0.4;
    auto store = initial_state(rho, 3, 2);
    auto d     = deom_rhs(store, model, modes);
    const Matrix expect = -I * (model.H * rho - rho * model.H);
    CHECK((Matrix(d[0]) - expect).norm() < 1e-15);
    for (Index i = 1; i < d.size(); ++i)
        CHECK(d[i].norm() == 0.0);
}

TEST_CASE("scalar single-mode hierarchy against its closed form")
{
    // dim 1, K = 1, L = 1: rho_0 is constant and
    // rho_1(t) = -i q (eta - conj eta) / gamma * (1 - exp(-gamma t)).
    DissipatonModeSet modes;
    modes.beta = 1.0;
    modes.modes.push_back({Complex(0.7, -0.3), Complex(1.3, 0.0), 0});
    dissipaton_coefficients(modes);
    const Real q = 0.8;
    SystemModel model{Matrix::Zero(1, 1), Matrix::Constant(1, 1, q)};

    auto store = initial_state(Matrix::Ones(1, 1), 1, 1);
    auto d     = deom_rhs(store, model, modes);
    CHECK(std::abs(d[0](0, 0)) == 0.0);
    CHECK(std::abs(d[1](0, 0) - (-I * q * (modes[0].eta - std::conj(modes[0].eta)))) < 1e-15);

    PropagationOptions opt;
    opt.dt              = 1e-3;
    opt.t_end           = 2.0;
    opt.sample_interval = 0.5;
    propagate(store, model, modes, opt);
    const Complex g     = modes[0].gamma;
    const Complex exact = -I * q * (modes[0].eta - std::conj(modes[0].eta)) / g * (1.0 - std::exp(-g * 2.0));
    CHECK(std::abs(store[0](0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(store[1](0, 0) - exact) < 1e-12);
}

TEST_CASE("trace of the tier-zero derivative vanishes")
{
    auto modes = bo_modes(0.5, 1.0, 2);
    auto model = spin_boson(0.6, 0.4);
    auto index = std::make_shared<const HierarchyIndex>(4, 3);
    DDOStore store(index, 2);
    std::mt19937 rng(5);
    std::normal_distribution<Real> g;
    for (Index e = 0; e < store.data().size(); ++e)
        store.data()[e] = Complex(g(rng), g(rng));
    auto d = deom_rhs(store, model, modes);
    CHECK(std::abs(d[0].trace()) < 1e-13);

    auto short_modes = bo_modes(0.5, 1.0, 1);
    CHECK_THROWS_AS(deom_rhs(store, model, short_modes), InputError);
}

TEST_CASE("closed two-level system")
{
    const Real eps = 0.9;
    SystemModel model{0.5 * eps * pauli_z(), pauli_z()};
    auto modes = bo_modes(0.0, 1.0, 0);
    Matrix rho(2, 2);
    rho << 0.5, 0.5, 0.5, 0.5;
    auto store = initial_state(rho, 2, 2);
    PropagationOptions opt;
    opt.dt              = 2e-3; // local error ~ (eps dt)^5 / 120
    opt.t_end           = 5.0;
    opt.sample_interval = 0.25;
    propagate(store, model, modes, opt, [&](Real t, const DDOStore& s) {
        CHECK(std::abs(s[0](0, 1) - 0.5 * std::exp(-I * eps * t)) < 1e-9);
    });
}

TEST_CASE("RK4 converges at fourth order")
{
    auto modes = bo_modes(0.5, 1.0, 1);
    auto model = spin_boson(0.6, 0.4);
    auto run   = [&](Real dt) {
        auto s = initial_state(pure(0), 3, 3);
        PropagationOptions opt;
        opt.dt    = dt;
        opt.t_end = 2.0;
        propagate(s, model, modes, opt);
        return Matrix(s[0]);
    };
    const Matrix a = run(0.04), b = run(0.02), c = run(0.01);
    const Real ratio = (a - b).norm() / (b - c).norm();
    CHECK(ratio == doctest::Approx(16.0).epsilon(0.1));

    auto s = initial_state(pure(0), 3, 3);
    PropagationOptions adaptive;
    adaptive.integrator      = Integrator::RK45;
    adaptive.t_end           = 2.0;
    adaptive.sample_interval = 0.5;
    propagate(s, model, modes, adaptive);
    CHECK((Matrix(s[0]) - c).norm() < 1e-8);
}

TEST_CASE("conservation and Hermiticity pairing")
{
    auto modes = bo_modes(1.0, 1.0, 3);
    auto model = spin_boson(0.6, 0.4);
    auto store = initial_state(pure(0), 5, 4);
    PropagationOptions opt;
    opt.t_end           = 10.0;
    opt.sample_interval = 0.5;
    auto traj           = propagate(store, model, modes, opt);
    CHECK(traj.times.size() == 21);
    CHECK(traj.max_trace_error <= 1e-10);
    CHECK(traj.max_hermiticity_defect <= 1e-9);
    CHECK(store.hermiticity_defect(modes.bar_map()) <= 1e-9);
}

TEST_CASE("Hermiticity pairing is exact in floating point")
{
    // deep tiers reach large DDO norms, so only an exactly mirrored kernel
    // keeps the absolute defect below 1e-9
    for (int d : {2, 5})
    {
        auto modes = bo_modes(1.0, 0.5, 2);
        Matrix H   = Matrix::Zero(d, d);
        Matrix Q   = Matrix::Zero(d, d);
        for (int i = 0; i < d; ++i)
        {
            H(i, i) = 0.3 * i;
            Q(i, i) = 1.0 - 2.0 * i / (d - 1.0);
            if (i + 1 < d)
            {
                H(i, i + 1) = Complex(0.4, 0.1 * i);
                H(i + 1, i) = std::conj(H(i, i + 1));
            }
        }
        H(0, d - 1) = Complex(0.0, 0.2);
        H(d - 1, 0) = Complex(0.0, -0.2);
        Matrix rho  = Matrix::Zero(d, d);
        rho(0, 0)   = 1.0;
        auto store  = initial_state(rho, 4, 12);
        PropagationOptions opt;
        opt.dt              = 0.01;
        opt.t_end           = 3.0;
        opt.sample_interval = 0.5;
        auto traj           = propagate(store, SystemModel{H, Q}, modes, opt);
        CHECK(store.max_norm().first > 10.0);
        CHECK(traj.max_hermiticity_defect == 0.0);
    }
}

TEST_CASE("propagation is linear")
{
    auto modes = bo_modes(0.4, 1.0, 2);
    auto model = spin_boson(0.6, 0.4);
    auto index = std::make_shared<const HierarchyIndex>(4, 3);
    std::mt19937 rng(9);
    std::normal_distribution<Real> g;
    auto random_store = [&] {
        DDOStore s(index, 2);
        for (Index e = 0; e < s.data().size(); ++e)
            s.data()[e] = Complex(g(rng), g(rng)) * 0.1;
        return s;
    };
    auto s1 = random_store(), s2 = random_store();
    const Complex a(0.3, -1.2), b(-0.7, 0.4);
    DDOStore mix = s1;
    mix *= a;
    DDOStore t2 = s2;
    t2 *= b;
    mix += t2;

    PropagationOptions opt;
    opt.dt    = 0.01;
    opt.t_end = 1.0;
    propagate(s1, model, modes, opt);
    propagate(s2, model, modes, opt);
    propagate(mix, model, modes, opt);
    s1 *= a;
    s2 *= b;
    s1 += s2;
    CHECK((mix.data() - s1.data()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("initial state validation")
{
    auto ok = initial_state(pure(0), 2, 2);
    Index nonzero = 0;
    for (Index i = 0; i < ok.size(); ++i)
        nonzero += ok[i].norm() > 0.0;
    CHECK(nonzero == 1);

    Matrix thin = 0.9 * pure(0);
    CHECK_THROWS_AS(initial_state(thin, 2, 2), InputError);
    Matrix neg(2, 2);
    neg << 1.001, 0, 0, -0.001;
    CHECK_THROWS_AS(initial_state(neg, 2, 2), InputError);
    Matrix skew(2, 2);
    skew << 0.5, 0.1, 0.2, 0.5;
    CHECK_THROWS_AS(initial_state(skew, 2, 2), InputError);
}

TEST_CASE("divergence is diagnosed with the offending index")
{
    DissipatonModeSet modes;
    modes.modes.push_back({1.0, Complex(-20.0, 0.0), 0});
    dissipaton_coefficients(modes);
    SystemModel model{Matrix::Zero(1, 1), Matrix::Ones(1, 1)};
    auto store = initial_state(Matrix::Ones(1, 1), 1, 3);
    store[3](0, 0) = 1.0;
    PropagationOptions opt;
    opt.dt    = 0.01;
    opt.t_end = 5.0;
    CHECK_THROWS_WITH_AS(propagate(store, model, modes, opt), doctest::Contains("DDO (3)"), NumericalError);
}

TEST_CASE("steady state of a weakly damped spin-boson system")
{
    const Real beta = 0.1;
    auto modes      = bo_modes(0.01, beta, 2);
    auto model      = spin_boson(0.6, 0.4);
    auto index      = std::make_shared<const HierarchyIndex>(4, 3);
    DeomGenerator gen(model, modes, index);

    SteadyStateOptions opt;
    opt.tolerance = 1e-9;
    opt.t_max     = 2000.0;
    opt.dt        = 2e-3;
    opt.initial   = pure(0);
    auto a        = steady_state(gen, opt);
    REQUIRE(a.converged);
    CHECK(a.residual <= 1e-9);

    const Matrix gibbs = (-beta * model.H).exp() / (-beta * model.H).exp().trace();
    Eigen::SelfAdjointEigenSolver<Matrix> diff(Matrix(a.store[0]) - gibbs);
    CHECK(0.5 * diff.eigenvalues().cwiseAbs().sum() <= 5e-2);

    opt.initial = pure(1);
    auto b      = steady_state(gen, opt);
    REQUIRE(b.converged);
    CHECK((Matrix(a.store[0]) - Matrix(b.store[0])).cwiseAbs().maxCoeff() <= 1e-6);
}

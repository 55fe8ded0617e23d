#include <dqme/propagator.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace dqme
{

void SystemModel::validate(Real tolerance) const
{
    if (H.rows() == 0 || H.rows() != H.cols())
        throw InputError("system model: H must be a non-empty square matrix");
    if (Q.rows() != H.rows() || Q.cols() != H.cols())
        throw InputError("system model: Q must have the same shape as H");
    if (!H.allFinite() || !Q.allFinite())
        throw InputError("system model: non-finite matrix entries");
    if ((H - H.adjoint()).cwiseAbs().maxCoeff() > tolerance)
        throw InputError("system model: H is not Hermitian");
    if ((Q - Q.adjoint()).cwiseAbs().maxCoeff() > tolerance)
        throw InputError("system model: Q is not Hermitian");
}

//------------------------------------------------------------------------------
// Generator
//------------------------------------------------------------------------------

DeomGenerator::DeomGenerator(SystemModel model, DissipatonModeSet modes,
                             std::shared_ptr<const HierarchyIndex> index)
    : m_model(std::move(model)), m_modes(std::move(modes)), m_index(std::move(index))
{
    m_model.validate();
    if (!m_index)
        throw InputError("DeomGenerator: missing hierarchy");
    if (m_modes.size() != m_index->modes())
    {
        std::ostringstream msg;
        msg << "DeomGenerator: hierarchy has K = " << m_index->modes() << " modes but the mode set has "
            << m_modes.size();
        throw InputError(msg.str());
    }
    const int K = m_index->modes();
    for (int k = 0; k < K; ++k)
    {
        const auto& m = m_modes[k];
        if (m.bar < 0 || m.bar >= K)
            throw InputError("DeomGenerator: modes are not paired");
        m_eta_left.push_back(m.eta);
        m_eta_right.push_back(std::conj(m_modes[m.bar].eta));
        if (m.bar == k)
            m_pairs.emplace_back(k, -1);
        else if (m.bar > k)
            m_pairs.emplace_back(k, m.bar);
    }
    m_decay.resize(static_cast<std::size_t>(m_index->size()));
    for (Index i = 0; i < m_index->size(); ++i)
    {
        auto term = [&](int k) { return static_cast<Real>(m_index->occupation(i, k)) * m_modes[k].gamma; };
        Complex g{};
        for (const auto& [a, b] : m_pairs)
            g += b < 0 ? term(a) : term(a) + term(b);
        m_decay[static_cast<std::size_t>(i)] = g;
    }
}

Real DeomGenerator::default_time_step() const
{
    Real dt = 0.0;
    auto consider = [&dt](Real rate) {
        if (rate > 0.0)
            dt = dt == 0.0 ? 0.02 / rate : std::min(dt, 0.02 / rate);
    };
    consider(m_modes.max_decay_rate());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m_model.H, Eigen::EigenvaluesOnly);
    consider(eig.eigenvalues().cwiseAbs().maxCoeff());
    return dt == 0.0 ? 0.01 : dt;
}

template <int D>
void DeomGenerator::apply_fixed(const Complex* in, Complex* out) const
{
    using Mat      = Eigen::Matrix<Complex, D, D>;
    using ConstMap = Eigen::Map<const Mat>;
    using OutMap   = Eigen::Map<Mat>;

    const Index d     = dim();
    const Index block = d * d;
    const Mat H       = m_model.H;
    const Mat Q       = m_model.Q;
    Mat up(d, d), left(d, d), right(d, d);
    Mat pair_up(d, d), pair_left(d, d), pair_right(d, d);
    Mat a(d, d), b(d, d), c(d, d), e(d, d);

    // Adds mode k's raising and lowering terms of DDO i.
    auto accumulate = [&](Index i, int k, Mat& u, Mat& l, Mat& r) {
        const Index up_at = m_index->raise(i, k);
        if (up_at >= 0)
            u += ConstMap(in + up_at * block, d, d);
        const Index low_at = m_index->lower(i, k);
        if (low_at >= 0)
        {
            const Real n = static_cast<Real>(m_index->occupation(i, k));
            ConstMap low(in + low_at * block, d, d);
            l += (n * m_eta_left[static_cast<std::size_t>(k)]) * low;
            r += (n * m_eta_right[static_cast<std::size_t>(k)]) * low;
        }
    };

    for (Index i = 0; i < m_index->size(); ++i)
    {
        ConstMap rho(in + i * block, d, d);
        up.setZero();
        left.setZero();
        right.setZero();
        for (const auto& [ka, kb] : m_pairs)
        {
            if (kb < 0)
            {
                accumulate(i, ka, up, left, right);
                continue;
            }
            pair_up.setZero();
            pair_left.setZero();
            pair_right.setZero();
            accumulate(i, ka, pair_up, pair_left, pair_right);
            accumulate(i, kb, pair_up, pair_left, pair_right);
            up += pair_up;
            left += pair_left;
            right += pair_right;
        }
        left += up;
        right += up;
        a.noalias() = H * rho;
        b.noalias() = rho * H;
        c.noalias() = Q * left;
        e.noalias() = right * Q;
        OutMap o(out + i * block, d, d);
        o = (a - b) + (c - e);
        o *= -I;
        o -= m_decay[static_cast<std::size_t>(i)] * rho;
    }
}

void DeomGenerator::apply(const Vector& in, Vector& out) const
{
    if (in.size() != state_size())
        throw InputError("DeomGenerator: state vector has the wrong length");
    out.resize(in.size());
    switch (dim())
    {
    case 1: apply_fixed<1>(in.data(), out.data()); break;
    case 2: apply_fixed<2>(in.data(), out.data()); break;
    case 3: apply_fixed<3>(in.data(), out.data()); break;
    case 4: apply_fixed<4>(in.data(), out.data()); break;
    default: apply_fixed<Eigen::Dynamic>(in.data(), out.data()); break;
    }
}

DDOStore deom_rhs(const DDOStore& store, const SystemModel& model, const DissipatonModeSet& modes)
{
    if (store.modes() != modes.size())
        throw InputError("deom_rhs: store and mode set disagree on the number of modes");
    if (store.dim() != model.dim())
        throw InputError("deom_rhs: store and system model disagree on the dimension");
    DeomGenerator gen(model, modes, store.index_ptr());
    DDOStore out(store.index_ptr(), store.dim());
    gen.apply(store.data(), out.data());
    return out;
}

//------------------------------------------------------------------------------
// Initial state
//------------------------------------------------------------------------------

DDOStore initial_state(const Matrix& rho_s, std::shared_ptr<const HierarchyIndex> index)
{
    constexpr Real tol = 1e-10;
    if (rho_s.rows() == 0 || rho_s.rows() != rho_s.cols() || !rho_s.allFinite())
        throw InputError("initial state: rho_S must be a finite square matrix");
    if ((rho_s - rho_s.adjoint()).cwiseAbs().maxCoeff() > tol)
        throw InputError("initial state: rho_S is not Hermitian");
    const Complex tr = rho_s.trace();
    if (std::abs(tr - 1.0) > tol)
    {
        std::ostringstream msg;
        msg << "initial state: trace of rho_S is " << tr.real() << ", expected 1";
        throw InputError(msg.str());
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(rho_s, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -tol)
    {
        std::ostringstream msg;
        msg << "initial state: rho_S has negative eigenvalue " << eig.eigenvalues().minCoeff();
        throw InputError(msg.str());
    }
    DDOStore store(std::move(index), rho_s.rows());
    store[0] = rho_s;
    return store;
}

DDOStore initial_state(const Matrix& rho_s, int modes, int max_tier)
{
    return initial_state(rho_s, std::make_shared<const HierarchyIndex>(modes, max_tier));
}

Integrator integrator_from_string(const std::string& name)
{
    if (name == "RK4" || name == "rk4")
        return Integrator::RK4;
    if (name == "RK45" || name == "rk45")
        return Integrator::RK45;
    throw InputError("unknown integrator '" + name + "' (expected RK4 or RK45)");
}

std::string to_string(Integrator scheme) { return scheme == Integrator::RK4 ? "RK4" : "RK45"; }

//------------------------------------------------------------------------------
// Time stepping
//------------------------------------------------------------------------------

namespace
{

class Rk4
{
public:
    explicit Rk4(const DeomGenerator& g) : m_gen(g) {}

    void step(Vector& y, Real dt)
    {
        m_gen.apply(y, m_k);
        m_acc = y + (dt / 6.0) * m_k;
        m_tmp = y + (0.5 * dt) * m_k;
        m_gen.apply(m_tmp, m_k);
        m_acc += (dt / 3.0) * m_k;
        m_tmp = y + (0.5 * dt) * m_k;
        m_gen.apply(m_tmp, m_k);
        m_acc += (dt / 3.0) * m_k;
        m_tmp = y + dt * m_k;
        m_gen.apply(m_tmp, m_k);
        y = m_acc + (dt / 6.0) * m_k;
    }

private:
    const DeomGenerator& m_gen;
    Vector m_k, m_acc, m_tmp;
};

// Dormand-Prince 5(4) with first-same-as-last reuse.
class Dopri5
{
public:
    Dopri5(const DeomGenerator& g, Real rtol, Real atol) : m_gen(g), m_rtol(rtol), m_atol(atol) {}

    // Attempts one step of size dt; returns the error norm (accept when <= 1).
    Real attempt(const Vector& y, Real dt, Vector& y_new)
    {
        static constexpr Real a21 = 1.0 / 5.0;
        static constexpr Real a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
        static constexpr Real a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
        static constexpr Real a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                              a54 = -212.0 / 729.0;
        static constexpr Real a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                              a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
        static constexpr Real b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                              b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
        static constexpr Real e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                              e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

        if (!m_have_k1)
        {
            m_gen.apply(y, m_k1);
            m_have_k1 = true;
        }
        m_tmp = y + dt * a21 * m_k1;
        m_gen.apply(m_tmp, m_k2);
        m_tmp = y + dt * (a31 * m_k1 + a32 * m_k2);
        m_gen.apply(m_tmp, m_k3);
        m_tmp = y + dt * (a41 * m_k1 + a42 * m_k2 + a43 * m_k3);
        m_gen.apply(m_tmp, m_k4);
        m_tmp = y + dt * (a51 * m_k1 + a52 * m_k2 + a53 * m_k3 + a54 * m_k4);
        m_gen.apply(m_tmp, m_k5);
        m_tmp = y + dt * (a61 * m_k1 + a62 * m_k2 + a63 * m_k3 + a64 * m_k4 + a65 * m_k5);
        m_gen.apply(m_tmp, m_k6);
        y_new = y + dt * (b1 * m_k1 + b3 * m_k3 + b4 * m_k4 + b5 * m_k5 + b6 * m_k6);
        m_gen.apply(y_new, m_k7);
        m_tmp = dt * (e1 * m_k1 + e3 * m_k3 + e4 * m_k4 + e5 * m_k5 + e6 * m_k6 + e7 * m_k7);

        Real err = 0.0;
        for (Index i = 0; i < y.size(); ++i)
        {
            const Real scale = m_atol + m_rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err              = std::max(err, std::abs(m_tmp[i]) / scale);
        }
        return std::isfinite(err) ? err : std::numeric_limits<Real>::infinity();
    }

    void accept() { m_k1.swap(m_k7); }

private:
    const DeomGenerator& m_gen;
    Real m_rtol, m_atol;
    bool m_have_k1 = false;
    Vector m_k1, m_k2, m_k3, m_k4, m_k5, m_k6, m_k7, m_tmp;
};

void check_blowup(const DDOStore& state, Real limit, Real time)
{
    const Real biggest = state.data().size() ? state.data().cwiseAbs().maxCoeff() : 0.0;
    if (std::isfinite(biggest) && biggest <= limit)
        return;
    const auto [norm, at] = state.max_norm();
    std::ostringstream msg;
    msg << "propagation diverged at t = " << time << ": DDO " << state.index().multi_index(at)
        << " has norm " << norm << " (limit " << limit << ")";
    throw NumericalError(msg.str());
}

void apply_filter(DDOStore& state, Real threshold)
{
    if (threshold <= 0.0)
        return;
    for (Index i = 1; i < state.size(); ++i)
        if (state[i].norm() < threshold)
            state[i].setZero();
}

} // namespace

Trajectory propagate(DDOStore& state, const DeomGenerator& gen, const PropagationOptions& options,
                     const Observer& observer)
{
    if (state.index_ptr() != gen.index_ptr() && state.index().ordering_hash() != gen.index().ordering_hash())
        throw InputError("propagate: state and generator use different hierarchies");
    if (state.dim() != gen.dim())
        throw InputError("propagate: state and generator disagree on the dimension");
    if (!(options.t_end >= 0.0) || !std::isfinite(options.t_end))
        throw InputError("propagate: t_end must be finite and non-negative");
    if (options.dt < 0.0 || options.sample_interval < 0.0)
        throw InputError("propagate: dt and sample interval must be non-negative");

    const auto conj = gen.index().conjugate_positions(gen.modes().bar_map());
    Trajectory traj;

    auto hermiticity = [&] {
        Real worst = 0.0;
        for (Index i = 0; i < state.size(); ++i)
            worst = std::max(worst, (state[i].adjoint() - state[conj[static_cast<std::size_t>(i)]]).norm());
        return worst;
    };
    auto sample = [&](Real t) {
        traj.times.push_back(t);
        traj.max_trace_error        = std::max(traj.max_trace_error, state.trace_error());
        traj.max_hermiticity_defect = std::max(traj.max_hermiticity_defect, hermiticity());
        if (options.keep_snapshots)
            traj.snapshots.push_back(state);
        if (observer)
            observer(t, state);
    };

    Real dt = options.dt > 0.0 ? options.dt : gen.default_time_step();
    const Real interval = options.sample_interval > 0.0 ? options.sample_interval : dt;
    long n_samples      = std::lround(options.t_end / interval);
    if (std::abs(static_cast<Real>(n_samples) * interval - options.t_end) > 1e-9 * std::max(1.0, options.t_end))
        throw InputError("propagate: t_end must be a multiple of the sample interval");

    sample(0.0);
    if (options.integrator == Integrator::RK4)
    {
        const long sub = options.sample_interval > 0.0
                             ? std::max(1L, static_cast<long>(std::ceil(interval / dt - 1e-9)))
                             : 1L;
        dt      = interval / static_cast<Real>(sub);
        traj.dt = dt;
        Rk4 rk(gen);
        for (long s = 1; s <= n_samples; ++s)
        {
            for (long j = 0; j < sub; ++j)
            {
                rk.step(state.data(), dt);
                ++traj.steps;
                apply_filter(state, options.filter_threshold);
                check_blowup(state, options.blowup_norm, static_cast<Real>(traj.steps) * dt);
            }
            sample(static_cast<Real>(s) * interval);
        }
        return traj;
    }

    Dopri5 rk(gen, options.rk45_rel_tol, options.rk45_abs_tol);
    Vector next;
    Real t = 0.0;
    for (long s = 1; s <= n_samples; ++s)
    {
        const Real target = static_cast<Real>(s) * interval;
        while (t < target)
        {
            const bool last = t + dt >= target * (1.0 - 1e-14);
            const Real h    = last ? target - t : dt;
            const Real err  = rk.attempt(state.data(), h, next);
            if (err <= 1.0)
            {
                state.data().swap(next);
                rk.accept();
                t = last ? target : t + h;
                ++traj.steps;
                traj.dt = h;
                apply_filter(state, options.filter_threshold);
                check_blowup(state, options.blowup_norm, t);
            }
            const Real factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (err <= 1.0 && last)
                dt = std::max(dt, h * factor);
            else
                dt = h * factor;
            if (dt < 1e-14 * std::max(1.0, target))
                throw NumericalError("propagate: RK45 step size underflow");
        }
        sample(target);
    }
    return traj;
}

Trajectory propagate(DDOStore& state, const SystemModel& model, const DissipatonModeSet& modes,
                     const PropagationOptions& options, const Observer& observer)
{
    DeomGenerator gen(model, modes, state.index_ptr());
    return propagate(state, gen, options, observer);
}

SteadyState steady_state(const DeomGenerator& gen, const SteadyStateOptions& options)
{
    const Index d = gen.dim();
    const Matrix start = options.initial.size() ? options.initial : Matrix(Matrix::Identity(d, d) / static_cast<Real>(d));
    SteadyState out{initial_state(start, gen.index_ptr()), 0.0, 0.0, false};

    const Real check = options.check_interval > 0.0 ? options.check_interval : 1.0;
    Real dt          = options.dt > 0.0 ? options.dt : gen.default_time_step();
    const long sub   = std::max(1L, static_cast<long>(std::ceil(check / dt - 1e-9)));
    dt               = check / static_cast<Real>(sub);

    Rk4 rk(gen);
    Vector rate;
    long chunks = 0;
    while (true)
    {
        gen.apply(out.store.data(), rate);
        out.residual = rate.size() ? rate.cwiseAbs().maxCoeff() : 0.0;
        out.time     = static_cast<Real>(chunks) * check;
        if (!std::isfinite(out.residual))
            throw NumericalError("steady_state: non-finite residual");
        if (out.residual <= options.tolerance)
        {
            out.converged = true;
            return out;
        }
        if (out.time >= options.t_max)
            return out;
        for (long j = 0; j < sub; ++j)
            rk.step(out.store.data(), dt);
        ++chunks;
        check_blowup(out.store, 1e12, static_cast<Real>(chunks) * check);
    }
}

} // namespace dqme

#include <dqme/field.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <dqme/moments.hpp>
#include <dqme/quadrature.hpp>

namespace dqme
{

RealVector scaled_hermite_functions(int n_max, Real x)
{
    RealVector psi(std::max(n_max, 0) + 1);
    psi(0) = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    if (n_max >= 1)
        psi(1) = x * psi(0);
    for (int n = 1; n < n_max; ++n)
        psi(n + 1) = (x * psi(n) - psi(n - 1)) / (n + 1);
    return psi;
}

Complex basis_function(int n, Real x, Complex zeta)
{
    if (n < 0)
        throw InputError("basis_function: order must be non-negative");
    const Real psi = scaled_hermite_functions(n, x)(n);
    return n == 0 ? Complex(psi) : psi / std::pow(zeta, n);
}

Real hermite_he(int n, Real x)
{
    if (n == 0)
        return 1.0;
    Real prev = 1.0, cur = x;
    for (int j = 1; j < n; ++j)
    {
        const Real next = x * cur - j * prev;
        prev            = cur;
        cur             = next;
    }
    return cur;
}

RealVector linspace(Real a, Real b, Index n)
{
    if (n < 2 || !(b > a))
        throw InputError("linspace: need at least two points on a non-empty interval");
    return RealVector::LinSpaced(n, a, b);
}

//------------------------------------------------------------------------------
// Reconstruction
//------------------------------------------------------------------------------

namespace
{

struct Contribution
{
    Index position;
    int order[2];
    Complex trace;
    Complex trace_q;
};

void check_dims(const DDOStore& store, const DissipatonModeSet& modes, const std::vector<int>& dims,
                const std::vector<RealVector>& axes)
{
    if (store.modes() != modes.size())
        throw InputError("field: store and mode set disagree on the number of modes");
    if (dims.empty() || dims.size() > 2)
        throw InputError("field: one or two displayed variables are supported");
    if (axes.size() != dims.size())
        throw InputError("field: one grid axis is needed per displayed variable");
    if (dims.size() == 2 && dims[0] == dims[1])
        throw InputError("field: displayed variables must be distinct");
    for (int k : dims)
    {
        if (k < 0 || k >= modes.size())
            throw InputError("field: displayed mode out of range");
        const int partner = modes[k].bar;
        if (std::find(dims.begin(), dims.end(), partner) == dims.end())
        {
            std::ostringstream msg;
            msg << "field: mode " << k << " is complex-paired with mode " << partner
                << ", which is not displayed; the marginal over a split pair is not a real density";
            throw InputError(msg.str());
        }
    }
    for (const auto& a : axes)
        if (a.size() < 2)
            throw InputError("field: grid axes need at least two points");
}

// phi_n(x_i) for n = 0..L; orders with zeta = 0 belong to a decoupled mode
// whose DDOs vanish identically, and are given a zero basis function.
Matrix basis_table(int L, const RealVector& x, Complex zeta)
{
    Matrix b(L + 1, x.size());
    for (Index i = 0; i < x.size(); ++i)
    {
        const RealVector psi = scaled_hermite_functions(L, x(i));
        Complex scale        = 1.0;
        for (int n = 0; n <= L; ++n)
        {
            b(n, i) = zeta == Complex(0.0) && n > 0 ? Complex(0.0) : psi(n) / scale;
            scale *= zeta;
        }
    }
    return b;
}

} // namespace

FieldSlice reconstruct(const DDOStore& store, const DissipatonModeSet& modes, const Matrix& Q,
                       const std::vector<int>& dims, const std::vector<RealVector>& axes, const FieldOptions& options)
{
    check_dims(store, modes, dims, axes);
    if (Q.rows() != store.dim() || Q.cols() != store.dim())
        throw InputError("field: Q has the wrong dimension");
    for (int k : options.currents)
        if (std::find(dims.begin(), dims.end(), k) == dims.end())
            throw InputError("field: currents can only be evaluated for displayed modes");

    const auto& idx = store.index();
    const int K     = idx.modes();
    const int L     = idx.max_tier();

    std::vector<Contribution> parts;
    for (Index i = 0; i < idx.size(); ++i)
    {
        bool inside = true;
        for (int k = 0; k < K && inside; ++k)
            if (std::find(dims.begin(), dims.end(), k) == dims.end() && idx.occupation(i, k) != 0)
                inside = false;
        if (!inside)
            continue;
        Contribution c{i, {idx.occupation(i, dims[0]), dims.size() > 1 ? idx.occupation(i, dims[1]) : 0},
                       store[i].trace(), (Q * store[i]).trace()};
        parts.push_back(c);
    }

    std::vector<Matrix> tables;
    for (std::size_t a = 0; a < dims.size(); ++a)
        tables.push_back(basis_table(L, axes[a], modes[dims[a]].zeta));

    const Index n0     = axes[0].size();
    const Index n1     = dims.size() > 1 ? axes[1].size() : 1;
    const Index points = n0 * n1;
    const bool need_q  = !options.currents.empty();

    FieldSlice slice;
    slice.dims          = dims;
    slice.axes          = axes;
    slice.current_modes = options.currents;
    slice.P             = Vector::Zero(points);
    Vector trace_q      = need_q ? Vector::Zero(points) : Vector();
    if (options.with_operator)
        slice.rho.assign(static_cast<std::size_t>(points), Matrix::Zero(store.dim(), store.dim()));

    for (Index i = 0; i < n0; ++i)
    {
        for (Index j = 0; j < n1; ++j)
        {
            const Index p = i * n1 + j;
            for (const auto& c : parts)
            {
                Complex w = tables[0](c.order[0], i);
                if (dims.size() > 1)
                    w *= tables[1](c.order[1], j);
                if (w == Complex(0.0))
                    continue;
                slice.P(p) += w * c.trace;
                if (need_q)
                    trace_q(p) += w * c.trace_q;
                if (options.with_operator)
                    slice.rho[static_cast<std::size_t>(p)] += w * store[c.position];
            }
        }
    }

    for (int k : options.currents)
        slice.current.push_back(2.0 * modes[k].xi * trace_q);

    const Real peak      = slice.P.cwiseAbs().maxCoeff();
    slice.max_imag_ratio = peak > 0.0 ? slice.P.imag().cwiseAbs().maxCoeff() / peak : 0.0;
    bool provably_real   = true;
    for (int k : dims)
        provably_real = provably_real && std::abs(modes[k].zeta.imag()) <= 1e-14 * std::abs(modes[k].zeta);
    if (provably_real && slice.max_imag_ratio > options.imag_tolerance)
    {
        std::ostringstream msg;
        msg << "reconstruct: P has relative imaginary residue " << slice.max_imag_ratio;
        throw NumericalError(msg.str());
    }
    return slice;
}

Vector probability_current(const DDOStore& store, const DissipatonModeSet& modes, const Matrix& Q,
                           const std::vector<int>& dims, const std::vector<RealVector>& axes, int k)
{
    FieldOptions opt;
    opt.currents = {k};
    return reconstruct(store, modes, Q, dims, axes, opt).current.front();
}

std::vector<Matrix> hermite_projection(const FieldSlice& slice, Complex zeta, int n_max)
{
    if (slice.dims.size() != 1 || slice.rho.empty())
        throw InputError("hermite_projection: needs a one-variable slice with operator samples");
    const RealVector& x = slice.axes[0];
    const Index n       = x.size();
    const Real h        = (x(n - 1) - x(0)) / static_cast<Real>(n - 1);
    const Index d       = slice.rho.front().rows();
    std::vector<Matrix> out;
    for (int order = 0; order <= n_max; ++order)
    {
        Matrix acc          = Matrix::Zero(d, d);
        const Complex scale = std::pow(zeta, order);
        for (Index i = 0; i < n; ++i)
        {
            const Real w = (i == 0 || i == n - 1) ? 0.5 * h : h;
            acc += (w * hermite_he(order, x(i))) * slice.rho[static_cast<std::size_t>(i)];
        }
        out.push_back(scale * acc);
    }
    return out;
}

//------------------------------------------------------------------------------
// Smoluchowski balance
//------------------------------------------------------------------------------

namespace
{

struct Balance
{
    Vector rate;     // sum Gamma P - sum d J
    Vector gamma_p;  // sum Gamma P
    std::vector<bool> interior;
};

Balance balance(const FieldSlice& slice, const DissipatonModeSet& modes)
{
    const auto& dims = slice.dims;
    if (slice.current.size() != dims.size())
        throw InputError("smoluchowski: the slice must carry the current of every displayed mode");
    for (std::size_t a = 0; a < dims.size(); ++a)
        if (slice.current_modes[a] != dims[a])
            throw InputError("smoluchowski: currents must follow the order of the displayed modes");

    const Index n0 = slice.axes[0].size();
    const Index n1 = dims.size() > 1 ? slice.axes[1].size() : 1;
    Balance out{Vector::Zero(n0 * n1), Vector::Zero(n0 * n1), std::vector<bool>(static_cast<std::size_t>(n0 * n1))};

    auto at = [n1](Index i, Index j) { return i * n1 + j; };
    for (Index i = 0; i < n0; ++i)
    {
        for (Index j = 0; j < n1; ++j)
        {
            const bool in0 = i >= 2 && i + 2 < n0;
            const bool in1 = dims.size() < 2 || (j >= 2 && j + 2 < n1);
            if (!(in0 && in1))
                continue;
            out.interior[static_cast<std::size_t>(at(i, j))] = true;
            for (std::size_t a = 0; a < dims.size(); ++a)
            {
                const RealVector& x = slice.axes[a];
                const Real h        = (x(x.size() - 1) - x(0)) / static_cast<Real>(x.size() - 1);
                auto f              = [&](const Vector& v, int s) {
                    return a == 0 ? v(at(i + s, j)) : v(at(i, j + s));
                };
                const Real xc       = a == 0 ? x(i) : x(j);
                const Vector& P     = slice.P;
                const Vector& J     = slice.current[a];
                const Complex d1 = (-f(P, 2) + 8.0 * f(P, 1) - 8.0 * f(P, -1) + f(P, -2)) / (12.0 * h);
                const Complex d2 =
                    (-f(P, 2) + 16.0 * f(P, 1) - 30.0 * f(P, 0) + 16.0 * f(P, -1) - f(P, -2)) / (12.0 * h * h);
                const Complex dj = (-f(J, 2) + 8.0 * f(J, 1) - 8.0 * f(J, -1) + f(J, -2)) / (12.0 * h);
                const Complex g  = modes[dims[a]].gamma * (d2 + xc * d1 + f(P, 0));
                out.gamma_p(at(i, j)) += g;
                out.rate(at(i, j)) += g - dj;
            }
        }
    }
    return out;
}

RealVector every_other(const RealVector& x)
{
    if (x.size() % 2 == 0)
        throw InputError("smoluchowski: grid axes need an odd number of points for the halving estimate");
    RealVector y((x.size() + 1) / 2);
    for (Index i = 0; i < y.size(); ++i)
        y(i) = x(2 * i);
    return y;
}

} // namespace

Vector smoluchowski_rate(const FieldSlice& slice, const DissipatonModeSet& modes)
{
    return balance(slice, modes).rate;
}

SmoluchowskiReport smoluchowski_residual(const DDOStore& store, const DissipatonModeSet& modes, const Matrix& Q,
                                         const std::vector<int>& dims, const std::vector<RealVector>& axes,
                                         Real tolerance)
{
    FieldOptions opt;
    opt.currents = dims;
    const auto fine = balance(reconstruct(store, modes, Q, dims, axes, opt), modes);

    std::vector<RealVector> coarse_axes;
    for (const auto& a : axes)
        coarse_axes.push_back(every_other(a));
    const auto coarse = balance(reconstruct(store, modes, Q, dims, coarse_axes, opt), modes);

    SmoluchowskiReport r;
    Real max_rate = 0.0, max_p = 0.0;
    for (Index p = 0; p < fine.rate.size(); ++p)
    {
        if (!fine.interior[static_cast<std::size_t>(p)])
            continue;
        max_rate = std::max(max_rate, std::abs(fine.rate(p)));
        r.scale  = std::max(r.scale, std::abs(fine.gamma_p(p)));
    }
    const FieldSlice probe = reconstruct(store, modes, Q, dims, axes, {});
    max_p                  = probe.P.cwiseAbs().maxCoeff();

    // A vanishing Gamma P (e.g. an uncoupled Gaussian) is measured against
    // the size of P itself.
    Real gamma_max = 0.0;
    for (int k : dims)
        gamma_max = std::max(gamma_max, std::abs(modes[k].gamma));
    const Real floor = 1e-3 * gamma_max * max_p;
    const Real scale = std::max(r.scale, floor);
    r.scale = scale;
    if (scale == 0.0)
        return r;
    r.residual = max_rate / scale;

    const Index n1f = dims.size() > 1 ? axes[1].size() : 1;
    const Index n1c = dims.size() > 1 ? coarse_axes[1].size() : 1;
    Real diff       = 0.0;
    for (Index i = 0; i < coarse_axes[0].size(); ++i)
    {
        for (Index j = 0; j < n1c; ++j)
        {
            const Index pc = i * n1c + j;
            if (!coarse.interior[static_cast<std::size_t>(pc)])
                continue;
            const Index pf = (2 * i) * n1f + (dims.size() > 1 ? 2 * j : 0);
            diff           = std::max(diff, std::abs(coarse.rate(pc) - fine.rate(pf)));
        }
    }
    // Fourth-order stencils: the fine-grid error is about 1/15 of the difference.
    r.discretization = diff / 15.0 / scale;
    r.conclusive     = r.discretization <= tolerance;
    return r;
}

//------------------------------------------------------------------------------
// Recurrences
//------------------------------------------------------------------------------

namespace
{

Complex trace_with(const Matrix& A, const DDOStore& x, Index i) { return (A * x[i]).trace(); }

} // namespace

std::vector<RecurrenceResidual> equilibrium_recurrence_residual(const DDOStore& store, const DissipatonModeSet& modes,
                                                                const Matrix& Q, int max_tier)
{
    if (max_tier < 1 || max_tier > store.max_tier())
        throw InputError("equilibrium_recurrence_residual: tier must lie in 1..L");
    const auto x    = x_operators(store, modes, max_tier);
    const auto& idx = store.index();
    const int K     = idx.modes();

    std::vector<RecurrenceResidual> out;
    for (Index i = 1; i < idx.tier_begin(max_tier + 1); ++i)
    {
        Complex gamma_n{}, rhs{};
        for (int k = 0; k < K; ++k)
        {
            const int nk = idx.occupation(i, k);
            if (nk == 0)
                continue;
            gamma_n += static_cast<Real>(nk) * modes[k].gamma;
            const Index down = idx.lower(i, k);
            rhs += 2.0 * modes[k].xi * static_cast<Real>(nk) * trace_with(Q, x, down);
            if (nk >= 2)
                rhs += modes[k].gamma * static_cast<Real>(nk * (nk - 1)) * x[idx.lower(down, k)].trace();
        }
        if (gamma_n == Complex(0.0))
            continue;
        const Complex lhs = x[i].trace();
        rhs /= gamma_n;
        out.push_back({idx.multi_index(i), lhs, rhs, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs))});
    }
    return out;
}

std::vector<RecurrenceResidual> closure_relation_residual(const DDOStore& store, const DissipatonModeSet& modes,
                                                          const SystemModel& model, const Matrix& A, int max_tier)
{
    if (max_tier < 0 || max_tier >= store.max_tier())
        throw InputError("closure_relation_residual: tier must lie in 0..L-1");
    if (A.rows() != store.dim() || A.cols() != store.dim())
        throw InputError("closure_relation_residual: operator has the wrong dimension");
    const auto x    = x_operators(store, modes, max_tier + 1);
    const auto& idx = store.index();
    const int K     = idx.modes();
    const Matrix& H = model.H;
    const Matrix& Q = model.Q;
    const Matrix HA = H * A - A * H;
    const Matrix QA = Q * A - A * Q;
    const Matrix AQ = A * Q + Q * A;

    std::vector<RecurrenceResidual> out;
    for (Index i = 0; i < idx.tier_begin(max_tier + 1); ++i)
    {
        Complex lhs = I * trace_with(HA, x, i);
        Complex rhs{};
        for (int k = 0; k < K; ++k)
        {
            const int nk = idx.occupation(i, k);
            lhs += I * modes[k].zeta * trace_with(QA, x, idx.raise(i, k));
            if (nk == 0)
                continue;
            const Index down = idx.lower(i, k);
            lhs += modes[k].xi * static_cast<Real>(nk) * trace_with(AQ, x, down);
            rhs += modes[k].gamma * static_cast<Real>(nk) * trace_with(A, x, i);
            if (nk >= 2)
                rhs -= modes[k].gamma * static_cast<Real>(nk * (nk - 1)) * trace_with(A, x, idx.lower(down, k));
        }
        out.push_back({idx.multi_index(i), lhs, rhs, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs))});
    }
    return out;
}

Real spin_boson_closure_residual(const DDOStore& store, const DissipatonModeSet& modes, const SystemModel& model,
                                 int max_tier)
{
    constexpr Real tol = 1e-12;
    if (model.dim() != 2)
        throw InputError("spin_boson_closure_residual: needs a two-level system");
    const Matrix& H = model.H;
    const Matrix& Q = model.Q;
    const bool h_ok = std::abs(H(0, 0)) <= tol && std::abs(H(1, 1)) <= tol && std::abs(H(0, 1).imag()) <= tol &&
                      std::abs(H(0, 1) - H(1, 0)) <= tol;
    const bool q_ok = std::abs(Q(0, 0) - 1.0) <= tol && std::abs(Q(1, 1) + 1.0) <= tol && std::abs(Q(0, 1)) <= tol &&
                      std::abs(Q(1, 0)) <= tol;
    if (!h_ok || !q_ok)
        throw InputError("spin_boson_closure_residual: model must be H = V sigma_x with Q = sigma_z");

    Matrix sx(2, 2), sy(2, 2), sz(2, 2);
    sx << 0, 1, 1, 0;
    sy << 0, -I, I, 0;
    sz << 1, 0, 0, -1;
    Real worst = 0.0;
    for (const Matrix* A : {&sx, &sy, &sz})
        for (const auto& r : closure_relation_residual(store, modes, model, *A, max_tier))
            worst = std::max(worst, r.residual);
    return worst;
}

} // namespace dqme

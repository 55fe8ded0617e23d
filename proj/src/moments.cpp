#include <dqme/moments.hpp>

#include <cmath>
#include <sstream>
#include <span>
#include <utility>

namespace dqme
{

namespace
{

Real factorial(int n)
{
    Real f = 1.0;
    for (int j = 2; j <= n; ++j)
        f *= j;
    return f;
}

Real binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

Real double_factorial_odd(int m) // (2m - 1)!!, with (-1)!! = 1
{
    Real f = 1.0;
    for (int j = 2 * m - 1; j > 1; j -= 2)
        f *= j;
    return f;
}

void require_tier(const DDOStore& store, int n)
{
    if (n < 0)
        throw InputError("moments: order must be non-negative");
    if (n > store.max_tier())
    {
        std::ostringstream msg;
        msg << "insufficient truncation for requested moment: order " << n << " needs L >= " << n
            << " (store has L = " << store.max_tier() << ")";
        throw InputError(msg.str());
    }
}

Real realify(Complex v, Real tol, const char* what, int n)
{
    if (std::abs(v.imag()) > tol * std::max(1.0, std::abs(v.real())))
    {
        std::ostringstream msg;
        msg << what << ": <F^" << n << "> has imaginary residue " << v.imag() << " above tolerance " << tol;
        throw NumericalError(msg.str());
    }
    return v.real();
}

void check_modes(const DDOStore& store, const DissipatonModeSet& modes)
{
    if (store.modes() != modes.size())
        throw InputError("moments: store and mode set disagree on the number of modes");
}

// Visits every m with 0 <= 2 m_k <= n_k, passing the per-mode m vector.
template <typename F>
void for_each_pair_removal(std::vector<int>& m, std::span<const int> n, std::size_t k, F&& visit)
{
    if (k == n.size())
    {
        visit(std::as_const(m));
        return;
    }
    for (int j = 0; 2 * j <= n[k]; ++j)
    {
        m[k] = j;
        for_each_pair_removal(m, n, k + 1, visit);
    }
    m[k] = 0;
}

} // namespace

Complex irreducible_moment(const DDOStore& store, int n)
{
    require_tier(store, n);
    const auto& idx = store.index();
    Complex sum{};
    for (Index i = idx.tier_begin(n); i < idx.tier_begin(n + 1); ++i)
    {
        Real weight = factorial(n);
        for (int k = 0; k < idx.modes(); ++k)
            weight /= factorial(idx.occupation(i, k));
        sum += weight * store[i].trace();
    }
    return sum;
}

Complex hybrid_moment_complex(const DDOStore& store, const DissipatonModeSet& modes, int n)
{
    check_modes(store, modes);
    require_tier(store, n);
    // sum zeta^2 = Re sum eta: a Drude pole carries Im C(0+) = -lambda c,
    // which is not part of <F^2>_B
    Complex variance{};
    for (const auto& m : modes.modes)
        variance += m.zeta * m.zeta;
    Complex sum{};
    for (int m = 0; 2 * m <= n; ++m)
        sum += binomial(n, 2 * m) * double_factorial_odd(m) * std::pow(variance, m) *
               irreducible_moment(store, n - 2 * m);
    return sum;
}

Real hybrid_moment(const DDOStore& store, const DissipatonModeSet& modes, int n, Real imag_tolerance)
{
    return realify(hybrid_moment_complex(store, modes, n), imag_tolerance, "hybrid_moment", n);
}

Complex x_coefficient(int n, int m, Complex zeta)
{
    return std::pow(zeta, -(n - 2 * m)) * std::pow(2.0, -m) * factorial(n) / (factorial(m) * factorial(n - 2 * m));
}

Complex ddo_coefficient(int n, int m, Complex zeta)
{
    const Real sign = m % 2 ? -1.0 : 1.0;
    return sign * std::pow(zeta, n) * std::pow(2.0, -m) * factorial(n) / (factorial(m) * factorial(n - 2 * m));
}

Matrix x_coefficient_matrix(int n_max, Complex zeta)
{
    Matrix c = Matrix::Zero(n_max + 1, n_max + 1);
    for (int n = 0; n <= n_max; ++n)
        for (int m = 0; 2 * m <= n; ++m)
            c(n, n - 2 * m) = x_coefficient(n, m, zeta);
    return c;
}

Matrix ddo_coefficient_matrix(int n_max, Complex zeta)
{
    Matrix c = Matrix::Zero(n_max + 1, n_max + 1);
    for (int n = 0; n <= n_max; ++n)
        for (int m = 0; 2 * m <= n; ++m)
            c(n, n - 2 * m) = ddo_coefficient(n, m, zeta);
    return c;
}

namespace
{

// Shared driver: out_n = sum_m coef(n_k, m_k) in_{n - 2m}.
template <typename Coef>
void pair_transform(const DDOStore& in, DDOStore& out, int max_tier, Coef&& coef)
{
    const auto& idx = in.index();
    const int K     = idx.modes();
    std::vector<int> n(static_cast<std::size_t>(K)), m(static_cast<std::size_t>(K)),
        target(static_cast<std::size_t>(K));
    const Index end = idx.tier_begin(std::min(max_tier, idx.max_tier()) + 1);
    for (Index i = 0; i < end; ++i)
    {
        for (int k = 0; k < K; ++k)
            n[static_cast<std::size_t>(k)] = idx.occupation(i, k);
        auto dst = out[i];
        dst.setZero();
        for_each_pair_removal(m, n, 0, [&](const std::vector<int>& mm) {
            Complex w = 1.0;
            for (int k = 0; k < K; ++k)
            {
                const auto kk = static_cast<std::size_t>(k);
                target[kk]    = n[kk] - 2 * mm[kk];
                if (n[kk] > 0)
                    w *= coef(k, n[kk], mm[kk]);
            }
            dst += w * in[idx.position(target)];
        });
    }
}

} // namespace

DDOStore x_operators(const DDOStore& store, const DissipatonModeSet& modes, int max_tier)
{
    check_modes(store, modes);
    if (max_tier < 0)
        max_tier = store.max_tier();
    for (int k = 0; k < modes.size(); ++k)
    {
        if (modes[k].zeta == Complex(0.0) && max_tier > 0)
        {
            std::ostringstream msg;
            msg << "x_operators: zeta vanishes for mode " << k << "; x-moments are undefined";
            throw NumericalError(msg.str());
        }
    }
    DDOStore out(store.index_ptr(), store.dim());
    pair_transform(store, out, max_tier,
                   [&](int k, int n, int m) { return x_coefficient(n, m, modes[k].zeta); });
    return out;
}

DDOStore ddos_from_x_operators(const DDOStore& x_ops, const DissipatonModeSet& modes)
{
    check_modes(x_ops, modes);
    DDOStore out(x_ops.index_ptr(), x_ops.dim());
    pair_transform(x_ops, out, x_ops.max_tier(),
                   [&](int k, int n, int m) { return ddo_coefficient(n, m, modes[k].zeta); });
    return out;
}

Matrix ddo_from_x_moments(const DDOStore& x_ops, const DissipatonModeSet& modes, const MultiIndex& index)
{
    check_modes(x_ops, modes);
    const auto& idx = x_ops.index();
    if (index.modes() != idx.modes() || idx.position(index) < 0)
        throw InputError("ddo_from_x_moments: index outside the stored hierarchy (missing X entries)");
    const int K = idx.modes();
    std::vector<int> m(static_cast<std::size_t>(K)), target(static_cast<std::size_t>(K));
    Matrix rho = Matrix::Zero(x_ops.dim(), x_ops.dim());
    for_each_pair_removal(m, index.occupations(), 0, [&](const std::vector<int>& mm) {
        Complex w = 1.0;
        for (int k = 0; k < K; ++k)
        {
            target[static_cast<std::size_t>(k)] = index[k] - 2 * mm[static_cast<std::size_t>(k)];
            if (index[k] > 0)
                w *= ddo_coefficient(index[k], mm[static_cast<std::size_t>(k)], modes[k].zeta);
        }
        rho += w * x_ops[idx.position(target)];
    });
    return rho;
}

Complex x_moment(const DDOStore& store, const DissipatonModeSet& modes, const MultiIndex& index)
{
    check_modes(store, modes);
    const auto& idx = store.index();
    if (index.modes() != idx.modes())
        throw InputError("x_moment: index has the wrong number of modes");
    require_tier(store, index.tier());
    const int K = idx.modes();
    for (int k = 0; k < K; ++k)
        if (index[k] > 0 && modes[k].zeta == Complex(0.0))
            throw NumericalError("x_moment: zeta vanishes for a requested mode");
    std::vector<int> m(static_cast<std::size_t>(K)), target(static_cast<std::size_t>(K));
    Complex sum{};
    for_each_pair_removal(m, index.occupations(), 0, [&](const std::vector<int>& mm) {
        Complex w = 1.0;
        for (int k = 0; k < K; ++k)
        {
            target[static_cast<std::size_t>(k)] = index[k] - 2 * mm[static_cast<std::size_t>(k)];
            if (index[k] > 0)
                w *= x_coefficient(index[k], mm[static_cast<std::size_t>(k)], modes[k].zeta);
        }
        sum += w * store[idx.position(target)].trace();
    });
    return sum;
}

Complex XMomentTable::operator()(const MultiIndex& n) const
{
    if (n.tier() > max_tier)
        throw InputError("XMomentTable: requested tier was not computed");
    return values[static_cast<std::size_t>(index->position(n))];
}

XMomentTable x_moment_table(const DDOStore& store, const DissipatonModeSet& modes, int max_tier)
{
    if (max_tier < 0)
        max_tier = store.max_tier();
    max_tier       = std::min(max_tier, store.max_tier());
    const auto ops = x_operators(store, modes, max_tier);
    XMomentTable table{store.index_ptr(), std::vector<Complex>(static_cast<std::size_t>(store.size())), max_tier};
    for (Index i = 0; i < store.index().tier_begin(max_tier + 1); ++i)
        table.values[static_cast<std::size_t>(i)] = ops[i].trace();
    return table;
}

Complex hybrid_moment_via_x_complex(const XMomentTable& table, const DissipatonModeSet& modes, int n)
{
    if (n > table.max_tier)
        throw InputError("insufficient truncation for requested moment");
    const auto& idx = *table.index;
    Complex sum{};
    for (Index i = idx.tier_begin(n); i < idx.tier_begin(n + 1); ++i)
    {
        Complex w = 1.0;
        for (int k = 0; k < idx.modes(); ++k)
        {
            const int nk = idx.occupation(i, k);
            if (nk > 0)
                w *= std::pow(modes[k].zeta, nk) / factorial(nk);
        }
        sum += w * table.values[static_cast<std::size_t>(i)];
    }
    return factorial(n) * sum;
}

Real hybrid_moment_via_x(const XMomentTable& table, const DissipatonModeSet& modes, int n, Real imag_tolerance)
{
    return realify(hybrid_moment_via_x_complex(table, modes, n), imag_tolerance, "hybrid_moment_via_x", n);
}

std::vector<Real> cumulants(const std::vector<Real>& raw)
{
    const int n_max = static_cast<int>(raw.size());
    std::vector<Real> k(raw.size());
    for (int n = 1; n <= n_max; ++n)
    {
        Real v = raw[static_cast<std::size_t>(n - 1)];
        for (int m = 1; m < n; ++m)
            v -= binomial(n - 1, m) * k[static_cast<std::size_t>(n - m - 1)] * raw[static_cast<std::size_t>(m - 1)];
        k[static_cast<std::size_t>(n - 1)] = v;
    }
    return k;
}

MomentRecord moment_record_from_raw(std::vector<Real> raw, Real time)
{
    MomentRecord r;
    r.time     = time;
    r.raw      = std::move(raw);
    r.cumulant = cumulants(r.raw);
    if (r.cumulant.size() >= 2 && r.cumulant[1] > 0.0)
    {
        const Real s = std::sqrt(r.cumulant[1]);
        r.sigma      = s;
        if (r.cumulant.size() >= 3)
            r.skewness = r.cumulant[2] / (s * s * s);
        if (r.cumulant.size() >= 4)
            r.kurtosis = r.cumulant[3] / (s * s * s * s);
    }
    return r;
}

MomentRecord moment_record(const DDOStore& store, const DissipatonModeSet& modes, int n_max, Real time,
                           Real imag_tolerance)
{
    std::vector<Real> raw;
    for (int n = 1; n <= n_max; ++n)
        raw.push_back(hybrid_moment(store, modes, n, imag_tolerance));
    return moment_record_from_raw(std::move(raw), time);
}

} // namespace dqme

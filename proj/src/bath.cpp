#include <dqme/bath.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include <dqme/quadrature.hpp>

namespace dqme
{

namespace
{

constexpr Real pi = std::numbers::pi_v<Real>;

bool finite_nonneg(Real v) { return std::isfinite(v) && v >= 0.0; }

/// J(z) for complex argument; used for residues and Matsubara amplitudes.
Complex spectral_density_complex(const SpectralDensity& J, Complex z)
{
    switch (J.kind)
    {
    case SpectralKind::BrownianOscillator:
    {
        const Real w02 = J.omega0 * J.omega0;
        const Complex d = (z * z - w02) * (z * z - w02) + z * z * J.friction * J.friction;
        return 2.0 * J.lambda * w02 * J.friction * z / d;
    }
    case SpectralKind::DrudeLorentz:
        return 2.0 * J.lambda * J.cutoff * z / (z * z + J.cutoff * J.cutoff);
    }
    return 0.0;
}

/// omega * coth(beta omega / 2), regular at the origin.
Real omega_coth(Real omega, Real beta, Real small_argument)
{
    const Real x = beta * omega;
    if (std::abs(x) < small_argument)
        return (2.0 / beta) * (1.0 + x * x / 12.0);
    return omega / std::tanh(0.5 * x);
}

std::vector<Real> panel_breakpoints(Real t, Real upper)
{
    std::vector<Real> pts{0.0};
    const Real max_width = t > 0.0 ? 0.5 * pi / t : upper;
    Real w = 0.0;
    while (w < upper)
    {
        const Real width = std::min(std::max(0.25, 0.25 * w), max_width);
        w = std::min(upper, w + width);
        pts.push_back(w);
    }
    return pts;
}

} // namespace

SpectralDensity SpectralDensity::brownian(Real lambda, Real omega0, Real friction)
{
    SpectralDensity J;
    J.kind     = SpectralKind::BrownianOscillator;
    J.lambda   = lambda;
    J.omega0   = omega0;
    J.friction = friction;
    J.validate();
    return J;
}

SpectralDensity SpectralDensity::drude(Real lambda, Real cutoff)
{
    SpectralDensity J;
    J.kind   = SpectralKind::DrudeLorentz;
    J.lambda = lambda;
    J.cutoff = cutoff;
    J.validate();
    return J;
}

void SpectralDensity::validate() const
{
    if (!finite_nonneg(lambda))
        throw InputError("spectral density: lambda must be finite and non-negative");
    if (kind == SpectralKind::BrownianOscillator)
    {
        if (!(std::isfinite(omega0) && omega0 > 0.0) || !(std::isfinite(friction) && friction > 0.0))
            throw InputError("Brownian oscillator: omega0 and friction must be positive");
    }
    else if (!(std::isfinite(cutoff) && cutoff > 0.0))
    {
        throw InputError("Drude-Lorentz: cutoff must be positive");
    }
}

Real SpectralDensity::over_omega(Real omega) const
{
    switch (kind)
    {
    case SpectralKind::BrownianOscillator:
    {
        const Real w2  = omega * omega;
        const Real w02 = omega0 * omega0;
        return 2.0 * lambda * w02 * friction / ((w2 - w02) * (w2 - w02) + w2 * friction * friction);
    }
    case SpectralKind::DrudeLorentz:
        return 2.0 * lambda * cutoff / (omega * omega + cutoff * cutoff);
    }
    return 0.0;
}

Real evaluate_spectral_density(const SpectralDensity& J, Real omega)
{
    if (!std::isfinite(omega))
        throw InputError("spectral density: non-finite frequency");
    return omega * J.over_omega(omega);
}

std::string to_string(SpectralKind kind)
{
    return kind == SpectralKind::BrownianOscillator ? "BrownianOscillator" : "DrudeLorentz";
}

SpectralKind spectral_kind_from_string(const std::string& name)
{
    if (name == "BrownianOscillator")
        return SpectralKind::BrownianOscillator;
    if (name == "DrudeLorentz")
        return SpectralKind::DrudeLorentz;
    throw InputError("unknown spectral density kind '" + name + "'");
}

//------------------------------------------------------------------------------
// Correlation function by quadrature
//------------------------------------------------------------------------------

namespace
{

struct QuadOutcome
{
    Complex value;
    Real error;
    bool converged;
};

QuadOutcome correlation_at(const SpectralDensity& J, Real beta, Real t,
                           const CorrelationQuadratureOptions& opt)
{
    // Above `upper` coth(beta w / 2) == 1 to double precision and the
    // oscillatory tail is summed by integration by parts.
    Real upper = std::max(opt.cutoff, 40.0 / beta);
    if (t > 0.0)
        upper = std::max(upper, opt.cutoff / t);

    auto integrand = [&](Real w) -> Complex {
        const Real j_over_w = J.over_omega(w);
        const Real even     = j_over_w * omega_coth(w, beta, opt.small_argument);
        if (t == 0.0)
            return Complex(even / pi, 0.0);
        const Real odd = j_over_w * w;
        return Complex(even * std::cos(w * t), -odd * std::sin(w * t)) / pi;
    };

    const auto pts = panel_breakpoints(t, upper);
    auto body = integrate_adaptive<Complex>(integrand, std::span<const Real>(pts), opt.abs_tol,
                                            opt.rel_tol, opt.max_panels);

    Complex tail{};
    Real tail_error = 0.0;
    bool tail_ok    = true;
    if (t == 0.0)
    {
        // w = upper / s maps [upper, inf) onto (0, 1].
        auto mapped = [&](Real s) -> Complex {
            const Real w = upper / s;
            return Complex(J.over_omega(w) * omega_coth(w, beta, opt.small_argument) * upper / (s * s) / pi, 0.0);
        };
        auto r     = integrate_adaptive<Complex>(mapped, 0.0, 1.0, opt.abs_tol, opt.rel_tol, 4000);
        tail       = r.value;
        tail_error = r.error;
        tail_ok    = r.converged;
        // w J(w) not decaying means a (log-)divergent tail that GK cannot see.
        const Real w_j = upper * upper * J.over_omega(upper);
        if (4.0 * upper * upper * J.over_omega(2.0 * upper) > 0.5 * w_j)
        {
            tail_ok    = false;
            tail_error = std::numeric_limits<Real>::infinity();
        }
    }
    else
    {
        // int_W^inf g(w) e^{-iwt} dw = e^{-iWt} sum_j g^(j)(W) / (it)^(j+1)
        auto g = [&](Real w) { return w * J.over_omega(w) / pi; };
        const Real h   = 0.05 * upper;
        const Real g0  = g(upper);
        const Real gp  = g(upper + h);
        const Real gm  = g(upper - h);
        const Real d1  = (gp - gm) / (2.0 * h);
        const Real d2  = (gp - 2.0 * g0 + gm) / (h * h);
        const Complex it = I * t;
        const Complex phase = std::exp(-I * upper * t);
        tail       = phase * (g0 / it + d1 / (it * it) + d2 / (it * it * it));
        tail_error = std::abs(d2 / (it * it * it)) * 3.0 / (upper * t);
    }

    return {body.value + tail, body.error + tail_error, body.converged && tail_ok};
}

} // namespace

std::vector<CorrelationSample> fdt_correlation(const SpectralDensity& J, Real beta,
                                               std::span<const Real> times,
                                               const CorrelationQuadratureOptions& options)
{
    J.validate();
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw InputError("fdt_correlation: beta must be positive");

    std::vector<CorrelationSample> out;
    out.reserve(times.size());
    for (Real t : times)
    {
        if (!(t >= 0.0) || !std::isfinite(t))
            throw InputError("fdt_correlation: times must be finite and non-negative");
        auto r = correlation_at(J, beta, t, options);
        if (!r.converged || !std::isfinite(r.value.real()) || !std::isfinite(r.value.imag()))
        {
            std::ostringstream msg;
            msg << "fdt_correlation: quadrature did not converge at t = " << t
                << " (achieved error estimate " << r.error << ")";
            throw NumericalError(msg.str());
        }
        out.push_back({t, r.value, r.error});
    }
    return out;
}

Complex fdt_correlation(const SpectralDensity& J, Real beta, Real time,
                        const CorrelationQuadratureOptions& options)
{
    const Real t[1] = {time};
    return fdt_correlation(J, beta, std::span<const Real>(t), options).front().value;
}

//------------------------------------------------------------------------------
// Exponential decomposition
//------------------------------------------------------------------------------

std::vector<int> DissipatonModeSet::bar_map() const
{
    std::vector<int> bars(modes.size());
    std::transform(modes.begin(), modes.end(), bars.begin(), [](const auto& m) { return m.bar; });
    return bars;
}

Real DissipatonModeSet::max_decay_rate() const
{
    Real r = 0.0;
    for (const auto& m : modes)
        r = std::max(r, m.gamma.real());
    return r;
}

Complex DissipatonModeSet::correlation(Real t) const
{
    Complex c{};
    for (const auto& m : modes)
        c += m.eta * std::exp(-m.gamma * t);
    return c;
}

Complex DissipatonModeSet::reversed_correlation(Real t) const
{
    Complex c{};
    for (const auto& m : modes)
        c += std::conj(modes[static_cast<std::size_t>(m.bar)].eta) * std::exp(-m.gamma * t);
    return c;
}

std::vector<int> pair_indices(std::span<const Complex> gammas, Real tolerance)
{
    const auto n = gammas.size();
    std::vector<int> bar(n, -1);
    for (std::size_t k = 0; k < n; ++k)
    {
        const Complex g = gammas[k];
        const Real tol  = tolerance * std::max(std::abs(g), 1e-300);
        if (std::abs(g.imag()) <= tol)
        {
            bar[k] = static_cast<int>(k);
            continue;
        }
        int found  = -1;
        int hits   = 0;
        for (std::size_t j = 0; j < n; ++j)
        {
            if (std::abs(gammas[j] - std::conj(g)) <= tol)
            {
                found = static_cast<int>(j);
                ++hits;
            }
        }
        if (hits != 1)
        {
            std::ostringstream msg;
            msg << "pair_indices: " << (hits == 0 ? "missing conjugate partner" : "ambiguous pairing")
                << " for exponent " << g.real() << (g.imag() < 0 ? "" : "+") << g.imag() << "i";
            throw NumericalError(msg.str());
        }
        bar[k] = found;
    }
    for (std::size_t k = 0; k < n; ++k)
        if (bar[static_cast<std::size_t>(bar[k])] != static_cast<int>(k))
            throw NumericalError("pair_indices: pairing is not an involution");
    return bar;
}

void dissipaton_coefficients(DissipatonModeSet& set)
{
    Real scale = 0.0;
    for (const auto& m : set.modes)
        scale = std::max(scale, std::abs(m.eta));

    for (auto& m : set.modes)
    {
        if (m.bar < 0 || m.bar >= static_cast<int>(set.modes.size()))
            throw InputError("dissipaton_coefficients: modes are not paired");
        const Complex partner = std::conj(set.modes[static_cast<std::size_t>(m.bar)].eta);
        const Complex sum     = 0.5 * (m.eta + partner);
        const Complex diff    = m.eta - partner;
        if (scale == 0.0 || std::abs(sum) <= 1e-14 * scale)
        {
            if (scale != 0.0 && std::abs(diff) > 1e-14 * scale)
                throw NumericalError("dissipaton_coefficients: zeta vanishes while eta_k != conj(eta_bar); "
                                     "xi is undefined for this mode");
            m.zeta = 0.0;
            m.xi   = 0.0;
            continue;
        }
        m.zeta = std::sqrt(sum);
        m.xi   = diff / (2.0 * I * m.zeta);
    }
}

Real bath_variance(const DissipatonModeSet& set, Real tolerance)
{
    Complex eta_sum{}, zeta_sq{};
    for (const auto& m : set.modes)
    {
        eta_sum += m.eta;
        zeta_sq += m.zeta * m.zeta;
    }
    const Real scale = std::max(1.0, std::abs(eta_sum));
    if (std::abs(zeta_sq.imag()) > tolerance * scale || std::abs(zeta_sq.real() - eta_sum.real()) > tolerance * scale)
        throw NumericalError("bath_variance: sum of zeta^2 differs from Re sum of eta");
    return zeta_sq.real();
}

ReconstructionReport reconstruction_error(const DissipatonModeSet& modes, const SpectralDensity& J,
                                          Real window, int samples,
                                          const CorrelationQuadratureOptions& options)
{
    std::vector<Real> times(static_cast<std::size_t>(std::max(samples, 2)));
    for (std::size_t i = 0; i < times.size(); ++i)
        times[i] = window * static_cast<Real>(i) / static_cast<Real>(times.size() - 1);
    const auto exact = fdt_correlation(J, modes.beta, times, options);

    ReconstructionReport report;
    report.reference_scale = std::abs(exact.front().value);
    if (report.reference_scale == 0.0)
        return report;
    for (const auto& s : exact)
    {
        const Real err = std::abs(modes.correlation(s.time) - s.value) / report.reference_scale;
        if (err > report.max_relative_error)
        {
            report.max_relative_error = err;
            report.worst_time         = s.time;
        }
    }
    return report;
}

DissipatonModeSet decompose_correlation(const SpectralDensity& J, Real beta, int n_matsubara,
                                        const DecompositionOptions& options)
{
    J.validate();
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw InputError("decompose_correlation: beta must be positive");
    if (n_matsubara < 0)
        throw InputError("decompose_correlation: n_matsubara must be non-negative");

    DissipatonModeSet set;
    set.beta = beta;

    auto pole_mode = [&](Complex pole, Complex residue_of_j) {
        // Contour closed in the lower half plane: (1/pi)(-2 pi i) Res.
        DissipatonMode m;
        m.gamma = I * pole;
        m.eta   = -2.0 * I * residue_of_j / (1.0 - std::exp(-beta * pole));
        return m;
    };

    if (J.kind == SpectralKind::BrownianOscillator)
    {
        const Real w0 = J.omega0, g = J.friction;
        if (!(w0 > 0.5 * g))
            throw InputError("decompose_correlation: overdamped or critically damped Brownian oscillator "
                             "(omega0 <= friction/2) is not supported");
        const Real omega = std::sqrt(w0 * w0 - 0.25 * g * g);
        const Complex poles[4] = {Complex(-omega, -0.5 * g), Complex(omega, -0.5 * g),
                                  Complex(-omega, 0.5 * g), Complex(omega, 0.5 * g)};
        for (int p = 0; p < 2; ++p)
        {
            Complex denom = 1.0;
            for (int q = 0; q < 4; ++q)
                if (q != p)
                    denom *= poles[p] - poles[q];
            const Complex residue = 2.0 * J.lambda * w0 * w0 * g * poles[p] / denom;
            set.modes.push_back(pole_mode(poles[p], residue));
        }
    }
    else
    {
        const Complex pole(0.0, -J.cutoff);
        // J = 2 lambda c z / ((z - ic)(z + ic)); residue at -ic is lambda c.
        set.modes.push_back(pole_mode(pole, J.lambda * J.cutoff));
    }

    for (int n = 1; n <= n_matsubara; ++n)
    {
        const Real nu = 2.0 * pi * n / beta;
        if (J.kind == SpectralKind::DrudeLorentz && std::abs(nu - J.cutoff) <= 1e-8 * J.cutoff)
            throw InputError("decompose_correlation: Matsubara frequency coincides with the Drude cutoff");
        DissipatonMode m;
        m.gamma = nu;
        m.eta   = Complex((-2.0 * I / beta * spectral_density_complex(J, Complex(0.0, -nu))).real(), 0.0);
        set.modes.push_back(m);
    }

    std::vector<Complex> gammas;
    for (const auto& m : set.modes)
        gammas.push_back(m.gamma);
    const auto bars = pair_indices(gammas, options.pairing_tolerance);
    for (std::size_t k = 0; k < bars.size(); ++k)
        set.modes[k].bar = bars[k];
    dissipaton_coefficients(set);

    if (options.check_reconstruction && J.kind == SpectralKind::BrownianOscillator && J.lambda > 0.0)
    {
        const auto report = reconstruction_error(set, J, options.window_in_beta * beta,
                                                 options.window_samples, options.quadrature);
        if (report.max_relative_error > options.tolerance)
        {
            std::ostringstream msg;
            msg << "decompose_correlation: reconstruction error " << report.max_relative_error
                << " at t = " << report.worst_time << " exceeds tolerance " << options.tolerance
                << "; increase n_matsubara (currently " << n_matsubara << ")";
            throw NumericalError(msg.str());
        }
    }
    return set;
}

//------------------------------------------------------------------------------
// JSON
//------------------------------------------------------------------------------

std::string mode_set_to_json(const DissipatonModeSet& set)
{
    nlohmann::json doc;
    doc["beta"]  = set.beta;
    doc["modes"] = nlohmann::json::array();
    for (const auto& m : set.modes)
    {
        doc["modes"].push_back({{"eta_re", m.eta.real()},
                                {"eta_im", m.eta.imag()},
                                {"gamma_re", m.gamma.real()},
                                {"gamma_im", m.gamma.imag()},
                                {"bar_index", m.bar}});
    }
    return doc.dump(2);
}

DissipatonModeSet mode_set_from_json(const std::string& text)
{
    DissipatonModeSet set;
    try
    {
        const auto doc = nlohmann::json::parse(text);
        set.beta       = doc.at("beta").get<Real>();
        for (const auto& e : doc.at("modes"))
        {
            DissipatonMode m;
            m.eta   = Complex(e.at("eta_re").get<Real>(), e.at("eta_im").get<Real>());
            m.gamma = Complex(e.at("gamma_re").get<Real>(), e.at("gamma_im").get<Real>());
            m.bar   = e.at("bar_index").get<int>();
            set.modes.push_back(m);
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw InputError(std::string("mode set JSON: ") + e.what());
    }
    for (const auto& m : set.modes)
    {
        if (m.bar < 0 || m.bar >= static_cast<int>(set.modes.size()))
            throw InputError("mode set JSON: bar_index out of range");
        if (!(m.gamma.real() > 0.0))
            throw InputError("mode set JSON: every mode needs Re gamma > 0");
    }
    for (std::size_t k = 0; k < set.modes.size(); ++k)
        if (set.modes[static_cast<std::size_t>(set.modes[k].bar)].bar != static_cast<int>(k))
            throw InputError("mode set JSON: bar_index is not an involution");
    dissipaton_coefficients(set);
    return set;
}

} // namespace dqme

#ifndef DQME_BATH_HPP
#define DQME_BATH_HPP

#include <span>
#include <string>
#include <vector>

#include <dqme/types.hpp>

namespace dqme
{

enum class SpectralKind
{
    BrownianOscillator,
    DrudeLorentz
};

///
/// Bath spectral density J(omega). Real and odd in omega, positive for
/// omega > 0.
///
/// Brownian oscillator: J = 2 lambda w0^2 g w / ((w^2 - w0^2)^2 + w^2 g^2)
/// Drude-Lorentz:       J = 2 lambda c w / (w^2 + c^2)
///
/// where `g` is the oscillator friction and `c` the Drude cutoff.
///
struct SpectralDensity
{
    SpectralKind kind = SpectralKind::BrownianOscillator;
    Real lambda       = 0.0; ///< reorganization energy
    Real omega0       = 0.0; ///< oscillator frequency (Brownian only)
    Real friction     = 0.0; ///< oscillator friction (Brownian only)
    Real cutoff       = 0.0; ///< Drude cutoff frequency

    static SpectralDensity brownian(Real lambda, Real omega0, Real friction);
    static SpectralDensity drude(Real lambda, Real cutoff);

    /// Throws InputError when a parameter is negative or non-finite.
    void validate() const;

    /// J(omega) / omega, regular at omega = 0.
    Real over_omega(Real omega) const;
};

Real evaluate_spectral_density(const SpectralDensity& J, Real omega);

std::string to_string(SpectralKind kind);
SpectralKind spectral_kind_from_string(const std::string& name);

struct CorrelationQuadratureOptions
{
    Real abs_tol        = 1e-13;
    Real rel_tol        = 1e-12;
    int max_panels      = 200000;
    Real cutoff         = 400.0; ///< lower bound of the analytic tail
    Real small_argument = 1e-4;  ///< |beta omega| below which coth is series expanded
};

struct CorrelationSample
{
    Real time;
    Complex value;
    Real error; ///< achieved absolute error estimate
};

///
/// Bath correlation function <F(t)F(0)>_B from the fluctuation-dissipation
/// theorem,
///
///   C(t) = (1/pi) int_0^inf J(w) [coth(beta w / 2) cos(w t) - i sin(w t)] dw,
///
/// by adaptive quadrature. Throws NumericalError with the achieved error
/// estimate when the requested tolerance is not met (e.g. Drude at t = 0,
/// where C(0) diverges).
///
std::vector<CorrelationSample> fdt_correlation(const SpectralDensity& J, Real beta,
                                               std::span<const Real> times,
                                               const CorrelationQuadratureOptions& options = {});

Complex fdt_correlation(const SpectralDensity& J, Real beta, Real time,
                        const CorrelationQuadratureOptions& options = {});

///
/// One exponential mode of C(t) = sum_k eta_k exp(-gamma_k t). `bar` is the
/// index of the partner mode with gamma_bar = conj(gamma). `zeta` and `xi`
/// are the coefficients of the real-variable representation,
///
///   zeta_k = sqrt((eta_k + conj(eta_bar)) / 2),
///   xi_k   = (eta_k - conj(eta_bar)) / (2 i zeta_k).
///
struct DissipatonMode
{
    Complex eta;
    Complex gamma;
    int bar = -1;
    Complex zeta{};
    Complex xi{};
};

struct DissipatonModeSet
{
    std::vector<DissipatonMode> modes;
    Real beta = 1.0;

    Index size() const { return static_cast<Index>(modes.size()); }
    const DissipatonMode& operator[](Index k) const { return modes[static_cast<std::size_t>(k)]; }
    DissipatonMode& operator[](Index k) { return modes[static_cast<std::size_t>(k)]; }

    std::vector<int> bar_map() const;
    Real max_decay_rate() const;

    /// sum_k eta_k exp(-gamma_k t)
    Complex correlation(Real t) const;
    /// sum_k conj(eta_bar(k)) exp(-gamma_k t); equals conj(correlation(t)).
    Complex reversed_correlation(Real t) const;
};

struct DecompositionOptions
{
    bool check_reconstruction = true;
    Real tolerance            = 1e-3; ///< max relative error of the exponential series
    Real window_in_beta       = 5.0;  ///< check window [0, window_in_beta * beta]
    int window_samples        = 251;
    Real pairing_tolerance    = 1e-10;
    CorrelationQuadratureOptions quadrature{};
};

///
/// Exponential (Matsubara / simple pole) decomposition of C(t).
///
/// Brownian oscillator: two oscillator poles gamma = g/2 -/+ i Omega with
/// Omega = sqrt(w0^2 - g^2/4), followed by `n_matsubara` terms with
/// gamma = 2 pi n / beta. Drude-Lorentz: one pole at the cutoff followed by
/// Matsubara terms. Pairing and zeta/xi coefficients are filled in.
///
/// The Brownian reconstruction is checked against `fdt_correlation` unless
/// disabled; exceeding the tolerance throws NumericalError.
///
DissipatonModeSet decompose_correlation(const SpectralDensity& J, Real beta, int n_matsubara,
                                        const DecompositionOptions& options = {});

struct ReconstructionReport
{
    Real max_relative_error = 0.0;
    Real worst_time         = 0.0;
    Real reference_scale    = 0.0; ///< |C(0)| from quadrature
};

ReconstructionReport reconstruction_error(const DissipatonModeSet& modes, const SpectralDensity& J,
                                          Real window, int samples,
                                          const CorrelationQuadratureOptions& options = {});

/// Conjugate-pair map k -> bar(k). Real exponents are self-paired.
std::vector<int> pair_indices(std::span<const Complex> gammas, Real tolerance = 1e-10);

/// Fills zeta and xi for every mode from eta and the pairing.
void dissipaton_coefficients(DissipatonModeSet& modes);

/// <F^2>_B = sum_k zeta_k^2, checked to be real and equal to Re sum_k eta_k.
/// Im sum_k eta_k is Im C(0+), which is -lambda c for a Drude pole and zero
/// at t = 0 itself.
Real bath_variance(const DissipatonModeSet& modes, Real tolerance = 1e-10);

/// Mode set as a JSON document with fields beta and
/// modes[{eta_re, eta_im, gamma_re, gamma_im, bar_index}].
std::string mode_set_to_json(const DissipatonModeSet& modes);
DissipatonModeSet mode_set_from_json(const std::string& text);

} // namespace dqme

#endif

#ifndef DQME_MOMENTS_HPP
#define DQME_MOMENTS_HPP

#include <optional>
#include <vector>

#include <dqme/bath.hpp>
#include <dqme/hierarchy.hpp>
#include <dqme/types.hpp>

namespace dqme
{

/// <(F^n)°> = sum_{|n| = n} n! / (n_1! ... n_K!) tr rho_n.
/// Throws InputError when n exceeds the truncation tier.
Complex irreducible_moment(const DDOStore& store, int n);

/// <F^n> of the hybrid bath mode from the irreducible moments and the
/// Gaussian bath variance <F^2>_B = sum_k zeta_k^2 = Re sum_k eta_k. The
/// real part is taken because a Drude pole reproduces C(0+), whose imaginary
/// part -lambda c is absent at t = 0. The imaginary residue must
/// not exceed imag_tolerance * max(1, |<F^n>|).
Real hybrid_moment(const DDOStore& store, const DissipatonModeSet& modes, int n, Real imag_tolerance = 1e-8);

/// Complex value before realification.
Complex hybrid_moment_complex(const DDOStore& store, const DissipatonModeSet& modes, int n);

/// Per-mode coefficient of rho_{n - 2m} in X_n:
/// zeta^-(n-2m) 2^-m n! / (m! (n-2m)!).
Complex x_coefficient(int n, int m, Complex zeta);
/// Per-mode coefficient of X_{n - 2m} in rho_n:
/// zeta^n 2^-m (-1)^m n! / (m! (n-2m)!).
Complex ddo_coefficient(int n, int m, Complex zeta);

/// Single-mode lower-triangular maps (orders 0..n_max): X = C rho and rho = Cbar X.
Matrix x_coefficient_matrix(int n_max, Complex zeta);
Matrix ddo_coefficient_matrix(int n_max, Complex zeta);

///
/// Operator-valued dissipaton moments X_n = sum_m c_nm rho_{n - 2m}, whose
/// traces are <x_n>. Stored with the layout of the DDOs. Tiers above
/// `max_tier` (default: all) are left zero. Throws NumericalError if a
/// needed zeta_k vanishes.
///
DDOStore x_operators(const DDOStore& store, const DissipatonModeSet& modes, int max_tier = -1);

/// <x_n> = tr X_n for one multi-index.
Complex x_moment(const DDOStore& store, const DissipatonModeSet& modes, const MultiIndex& index);

/// Traced x-moments for every index up to max_tier.
struct XMomentTable
{
    std::shared_ptr<const HierarchyIndex> index;
    std::vector<Complex> values; ///< zero above the computed tier
    int max_tier = 0;

    Complex operator()(const MultiIndex& n) const;
};

XMomentTable x_moment_table(const DDOStore& store, const DissipatonModeSet& modes, int max_tier = -1);

/// rho_n = sum_m cbar_nm X_{n - 2m}; the inverse of x_operators.
Matrix ddo_from_x_moments(const DDOStore& x_ops, const DissipatonModeSet& modes, const MultiIndex& index);
DDOStore ddos_from_x_operators(const DDOStore& x_ops, const DissipatonModeSet& modes);

/// <F^n> = n! sum_{|n| = n} prod_k zeta_k^{n_k} / n_k! <x_n>.
Real hybrid_moment_via_x(const XMomentTable& table, const DissipatonModeSet& modes, int n,
                         Real imag_tolerance = 1e-8);
Complex hybrid_moment_via_x_complex(const XMomentTable& table, const DissipatonModeSet& modes, int n);

/// Cumulants K_1..K_{n_max} from raw moments <F^1>..<F^{n_max}> by
/// K_n = mu_n - sum_{m=1}^{n-1} C(n-1, m) K_{n-m} mu_m.
std::vector<Real> cumulants(const std::vector<Real>& raw);

struct MomentRecord
{
    Real time = 0.0;
    std::vector<Real> raw;       ///< <F^1> .. <F^n_max>
    std::vector<Real> cumulant;  ///< K_1 .. K_n_max
    std::optional<Real> sigma;   ///< sqrt(K_2) when K_2 > 0
    std::optional<Real> skewness;
    std::optional<Real> kurtosis;
};

/// Raw moments, cumulants and shape ratios of F at one instant.
MomentRecord moment_record(const DDOStore& store, const DissipatonModeSet& modes, int n_max, Real time = 0.0,
                           Real imag_tolerance = 1e-8);

MomentRecord moment_record_from_raw(std::vector<Real> raw, Real time = 0.0);

} // namespace dqme

#endif

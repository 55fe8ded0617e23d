#ifndef DQME_FIELD_HPP
#define DQME_FIELD_HPP

#include <vector>

#include <dqme/bath.hpp>
#include <dqme/hierarchy.hpp>
#include <dqme/propagator.hpp>
#include <dqme/types.hpp>

namespace dqme
{

//------------------------------------------------------------------------------
// Basis
//------------------------------------------------------------------------------

/// Scaled Hermite functions psi_n(x) = exp(-x^2/2) He_n(x) / (sqrt(2 pi) n!),
/// n = 0..n_max, from (n+1) psi_{n+1} = x psi_n - psi_{n-1}. They satisfy
/// x psi_n = psi_{n-1} + (n+1) psi_{n+1} and psi_n' = -(n+1) psi_{n+1}.
RealVector scaled_hermite_functions(int n_max, Real x);

/// Dissipaton basis function phi_n(x) = psi_n(x) / zeta^n. Integrates to
/// delta_{n0} and carries the Gaussian weight, so <x^2> = 1 for n = 0.
Complex basis_function(int n, Real x, Complex zeta);

/// Probabilists' Hermite polynomial He_n(x).
Real hermite_he(int n, Real x);

/// n evenly spaced points on [a, b].
RealVector linspace(Real a, Real b, Index n);

//------------------------------------------------------------------------------
// Reconstruction
//------------------------------------------------------------------------------

struct FieldOptions
{
    bool with_operator = false;       ///< also keep rho(x) at every grid point
    std::vector<int> currents;        ///< modes (a subset of dims) for which J_k is evaluated
    Real imag_tolerance = 1e-9;       ///< on max|Im P| / max|P| where P is provably real
};

///
/// Grid samples of the dissipaton density over one or two displayed
/// variables. Two-dimensional data is row-major: entry (i, j) at
/// i * axes[1].size() + j.
///
struct FieldSlice
{
    std::vector<int> dims;
    std::vector<RealVector> axes;
    Vector P;                     ///< tr rho(x); see max_imag_ratio
    std::vector<Matrix> rho;      ///< with_operator only
    std::vector<int> current_modes;
    std::vector<Vector> current;  ///< J_k = 2 xi_k tr[Q rho(x)], one per current_modes entry
    Real max_imag_ratio = 0.0;    ///< max|Im P| / max|P|

    Index points() const { return P.size(); }
};

///
/// rho(x) = sum_n rho_n prod_{k in dims} phi_{n_k}(x_k) over the indices that
/// are unoccupied outside `dims` (the other variables are integrated out).
///
/// Every displayed mode must have its conjugate partner displayed too;
/// otherwise InputError. P is real pointwise only when every displayed zeta
/// is real; in that case max|Im P| / max|P| above the tolerance throws
/// NumericalError. For conjugate pairs P(x1, x2)* = P(x2, x1) instead.
///
FieldSlice reconstruct(const DDOStore& store, const DissipatonModeSet& modes, const Matrix& Q,
                       const std::vector<int>& dims, const std::vector<RealVector>& axes,
                       const FieldOptions& options = {});

/// J_k(x) = 2 xi_k tr[Q rho(x)] on the slice grid.
Vector probability_current(const DDOStore& store, const DissipatonModeSet& modes, const Matrix& Q,
                           const std::vector<int>& dims, const std::vector<RealVector>& axes, int k);

/// Projection of a one-variable field onto the DDOs:
/// rho_n = int rho(x) zeta^n He_n(x) dx, n = 0..n_max, by the trapezoid rule.
std::vector<Matrix> hermite_projection(const FieldSlice& slice, Complex zeta, int n_max);

//------------------------------------------------------------------------------
// Steady-state identities
//------------------------------------------------------------------------------

struct SmoluchowskiReport
{
    Real residual       = 0.0; ///< max_interior |sum Gamma_k P - sum d_k J_k| / scale
    Real discretization = 0.0; ///< Richardson estimate from the halved grid, same units
    Real scale          = 0.0; ///< max |sum Gamma_k P|, floored at 1e-3 max|gamma_k| max|P|
    bool conclusive     = true;
};

///
/// Balance of dP/dt = sum_k Gamma_k P - sum_k d J_k / d x_k with
/// Gamma_k = gamma_k d/dx (d/dx + x), by fourth-order central differences on
/// the interior of the grid. Each axis needs an odd number of points so the
/// halved grid shares every other node. The result is inconclusive when the
/// discretization estimate exceeds `tolerance`.
///
SmoluchowskiReport smoluchowski_residual(const DDOStore& store, const DissipatonModeSet& modes, const Matrix& Q,
                                         const std::vector<int>& dims, const std::vector<RealVector>& axes,
                                         Real tolerance = 5e-3);

/// Pointwise sum_k Gamma_k P - sum_k d_k J_k on the interior (other nodes 0).
/// The slice must carry the current of every displayed mode.
Vector smoluchowski_rate(const FieldSlice& slice, const DissipatonModeSet& modes);

struct RecurrenceResidual
{
    MultiIndex index;
    Complex lhs;
    Complex rhs;
    Real residual; ///< |lhs - rhs| / max(1, |lhs|)
};

///
/// Stationary input-output relation of the dissipaton moments,
///   gamma_n <x_n> = sum_k [2 xi_k n_k <Q x_{n - e_k}> + gamma_k n_k (n_k - 1) <x_{n - 2 e_k}>],
/// with gamma_n = sum_k n_k gamma_k, for every index of tier 1..max_tier.
///
std::vector<RecurrenceResidual> equilibrium_recurrence_residual(const DDOStore& store, const DissipatonModeSet& modes,
                                                                const Matrix& Q, int max_tier);

///
/// Stationarity of tr[A X_n] for a system operator A:
///   i <[H, A] x_n> + i sum_k zeta_k <[Q, A] x_{n + e_k}> + sum_k xi_k n_k <{A, Q} x_{n - e_k}>
///     = sum_k gamma_k [n_k <A x_n> - n_k (n_k - 1) <A x_{n - 2 e_k}>]
/// for every index of tier 0..max_tier (max_tier < L).
///
std::vector<RecurrenceResidual> closure_relation_residual(const DDOStore& store, const DissipatonModeSet& modes,
                                                          const SystemModel& model, const Matrix& A, int max_tier);

///
/// The three rows A = sigma_x, sigma_y, sigma_z of the closure relation for
/// the unbiased spin-boson model H = V sigma_x, Q = sigma_z. Rejects any
/// other model. Returns the largest residual.
///
Real spin_boson_closure_residual(const DDOStore& store, const DissipatonModeSet& modes, const SystemModel& model,
                                 int max_tier);

} // namespace dqme

#endif

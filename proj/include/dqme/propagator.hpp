#ifndef DQME_PROPAGATOR_HPP
#define DQME_PROPAGATOR_HPP

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include <dqme/bath.hpp>
#include <dqme/hierarchy.hpp>
#include <dqme/types.hpp>

namespace dqme
{

///
/// System Hamiltonian and the dissipative system mode Q coupled linearly to
/// the hybrid bath mode F.
///
struct SystemModel
{
    Matrix H;
    Matrix Q;

    Index dim() const { return H.rows(); }

    /// Throws InputError unless H and Q are square, equally sized and
    /// Hermitian to within `tolerance`.
    void validate(Real tolerance = 1e-12) const;
};

///
/// The linear generator of the dissipaton equation of motion on a fixed
/// hierarchy:
///
///   d rho_n = -i [H, rho_n] - (sum_k n_k gamma_k) rho_n
///             - i sum_k [Q, rho_{n_k^+}]
///             - i sum_k n_k (eta_k Q rho_{n_k^-} - conj(eta_bar(k)) rho_{n_k^-} Q)
///
/// Indices above the truncation read as zero. `apply` is reentrant, so one
/// generator may serve several propagations at once. Mode sums run over
/// conjugate pairs (k, bar(k)) and the commutator terms are grouped so that
/// the result for rho_bar(n) is the exact conjugate transpose of the one for
/// rho_n in floating point: Hermiticity pairing is kept to the last bit.
///
class DeomGenerator
{
public:
    DeomGenerator(SystemModel model, DissipatonModeSet modes, std::shared_ptr<const HierarchyIndex> index);

    const SystemModel& model() const { return m_model; }
    const DissipatonModeSet& modes() const { return m_modes; }
    const HierarchyIndex& index() const { return *m_index; }
    const std::shared_ptr<const HierarchyIndex>& index_ptr() const { return m_index; }
    Index dim() const { return m_model.dim(); }
    /// Length of the flattened state vector.
    Index state_size() const { return m_index->size() * dim() * dim(); }

    /// out = d/dt in, both flattened DDO vectors of length state_size().
    void apply(const Vector& in, Vector& out) const;

    /// Largest |Re gamma_k| and the spectral norm of H, used for the default step.
    Real default_time_step() const;

private:
    template <int D>
    void apply_fixed(const Complex* in, Complex* out) const;

    SystemModel m_model;
    DissipatonModeSet m_modes;
    std::shared_ptr<const HierarchyIndex> m_index;
    std::vector<Complex> m_decay;       // sum_k n_k gamma_k per DDO
    std::vector<Complex> m_eta_left;    // eta_k
    std::vector<Complex> m_eta_right;   // conj(eta_bar(k))
    std::vector<std::pair<int, int>> m_pairs; // (k, bar(k)) with k <= bar(k); bar = -1 when self-paired
};

/// One evaluation of the generator on a store.
DDOStore deom_rhs(const DDOStore& store, const SystemModel& model, const DissipatonModeSet& modes);

/// Factorized start: rho_S at tier 0, every other DDO zero. Rejects rho_S
/// that is not Hermitian, not of unit trace, or has a negative eigenvalue
/// (tolerance 1e-10).
DDOStore initial_state(const Matrix& rho_s, std::shared_ptr<const HierarchyIndex> index);
DDOStore initial_state(const Matrix& rho_s, int modes, int max_tier);

enum class Integrator
{
    RK4,
    RK45
};

Integrator integrator_from_string(const std::string& name);
std::string to_string(Integrator scheme);

struct PropagationOptions
{
    Integrator integrator = Integrator::RK4;
    Real dt               = 0.0;  ///< 0 selects DeomGenerator::default_time_step
    Real t_end            = 0.0;
    Real sample_interval  = 0.0;  ///< 0 samples every step; dt is shrunk to divide it
    Real rk45_rel_tol     = 1e-10;
    Real rk45_abs_tol     = 1e-13;
    Real blowup_norm      = 1e12;
    Real filter_threshold = 0.0;  ///< drop DDOs with Frobenius norm below; 0 disables
    bool keep_snapshots   = false;
};

/// Called at t = 0 and every sample time with the current state.
using Observer = std::function<void(Real time, const DDOStore& state)>;

struct Trajectory
{
    std::vector<Real> times;
    std::vector<DDOStore> snapshots; ///< filled only with keep_snapshots
    long steps                   = 0;
    Real dt                      = 0.0; ///< fixed step used (RK4), last accepted step (RK45)
    Real max_trace_error         = 0.0;
    Real max_hermiticity_defect  = 0.0;
};

///
/// Integrates `state` in place from t = 0 to options.t_end. Throws
/// NumericalError naming the offending multi-index if any DDO norm exceeds
/// options.blowup_norm or becomes non-finite.
///
Trajectory propagate(DDOStore& state, const DeomGenerator& generator, const PropagationOptions& options,
                     const Observer& observer = {});

Trajectory propagate(DDOStore& state, const SystemModel& model, const DissipatonModeSet& modes,
                     const PropagationOptions& options, const Observer& observer = {});

struct SteadyStateOptions
{
    Real tolerance      = 1e-10; ///< on max |d rho / dt|
    Real t_max          = 1000.0;
    Real dt             = 0.0;   ///< 0 selects the default step
    Real check_interval = 1.0;
    Matrix initial;              ///< empty selects the maximally mixed state
};

struct SteadyState
{
    DDOStore store;
    Real residual  = 0.0;
    Real time      = 0.0;
    bool converged = false;
};

/// Long-time propagation until the generator output falls below tolerance.
SteadyState steady_state(const DeomGenerator& generator, const SteadyStateOptions& options = {});

} // namespace dqme

#endif

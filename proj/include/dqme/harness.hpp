#ifndef DQME_HARNESS_HPP
#define DQME_HARNESS_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <dqme/bath.hpp>
#include <dqme/field.hpp>
#include <dqme/hierarchy.hpp>
#include <dqme/moments.hpp>
#include <dqme/propagator.hpp>
#include <dqme/types.hpp>

namespace dqme
{

//------------------------------------------------------------------------------
// Configuration
//------------------------------------------------------------------------------

inline constexpr int config_schema_version = 1;

enum class ModelKind
{
    ElectronTransfer,
    SpinBoson,
    PureDephasing,
    Custom
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelConfig
{
    ModelKind kind = ModelKind::ElectronTransfer;
    Real epsilon   = 0.6;
    Real coupling  = 0.4;         ///< V
    std::optional<Real> lambda;   ///< electron transfer; must equal the bath lambda when given
    Matrix H;                     ///< custom only
    Matrix Q;                     ///< custom only
    Matrix initial;               ///< empty selects the model default
};

struct BathConfig
{
    SpectralDensity density        = SpectralDensity::brownian(0.5, 1.0, 1.0);
    Real beta                      = 1.0;
    int n_matsubara                = -1;   ///< -1: smallest count meeting the tolerance
    bool check_reconstruction      = true;
    Real reconstruction_tolerance  = 1e-3;
};

struct HierarchyConfig
{
    int max_tier          = 6;
    Real filter_threshold = 0.0;
};

struct IntegratorConfig
{
    Integrator scheme    = Integrator::RK4;
    Real dt              = 0.0; ///< 0: 0.02 / max Re gamma, capped by 0.02 / ||H||
    Real t_end           = 10.0;
    Real sample_interval = 0.1;
};

struct FieldRequest
{
    std::vector<int> dims;
    Real x_min   = -6.0;
    Real x_max   = 6.0;
    int points   = 101;
    bool current = true;
    Real smoluchowski_tolerance = 5e-3;
};

struct SteadyStateRequest
{
    Real tolerance = 1e-10;
    Real t_max     = 2000.0;
};

struct OutputConfig
{
    int moments_n_max   = 4;
    int recurrence_tier = -1;  ///< -1: not requested
    bool checkpoint     = false;
    std::optional<FieldRequest> field;
    std::optional<SteadyStateRequest> steady_state; ///< analysis state; default is the final sample
};

struct SweepConfig
{
    std::string parameter; ///< JSON pointer into the config, e.g. /bath/lambda
    std::vector<Real> values;
};

struct RunConfig
{
    int schema_version = config_schema_version;
    std::string units  = "Omega_S";
    ModelConfig model;
    BathConfig bath;
    HierarchyConfig hierarchy;
    IntegratorConfig integrator;
    OutputConfig outputs;
    std::optional<SweepConfig> sweep;
    Real convergence_tolerance = 1e-6;
    Real oracle_tolerance      = 1e-4;
    std::vector<std::string> assumptions; ///< stated in the config plus defaults filled in
    std::string text;                     ///< normalized JSON the config was parsed from
};

///
/// Parses the versioned JSON config. Unknown keys, a wrong schema version,
/// non-positive beta, a negative tier, or L below the requested moment order
/// are InputErrors.
///
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Copy of the config with one numeric field replaced (JSON pointer path).
RunConfig with_parameter(const RunConfig& config, const std::string& pointer, Real value);

///
/// System Hamiltonian and coupling operator.
///
///   ElectronTransfer: H = (eps + lambda)|1><1| + V(|1><0| + |0><1|), Q = -|1><1|
///   SpinBoson:        H = (eps/2) sigma_z + V sigma_x,              Q = sigma_z
///   PureDephasing:    H = (eps/2) sigma_z,                          Q = sigma_z
///
SystemModel build_model(const RunConfig& config);

/// The configured initial density, or the model default: |0><0| except for
/// pure dephasing, which starts in |+><+|.
Matrix initial_density(const RunConfig& config);

struct ModeSetReport
{
    DissipatonModeSet modes;
    ReconstructionReport reconstruction;
    int n_matsubara = 0;
};

/// Decomposition of the configured bath; resolves an automatic Matsubara count.
ModeSetReport build_modes(const RunConfig& config);

//------------------------------------------------------------------------------
// Oracle
//------------------------------------------------------------------------------

/// (q_0 - q_1)^2 for Q = sigma_z. Calibrated against the short-time decay of
/// the propagated coherence and frozen in the tests.
inline constexpr Real pure_dephasing_prefactor = 4.0;

///
/// Phi(t) = int_0^t ds int_0^s Re C(u) du
///        = (1/pi) int_0^inf J(w) coth(beta w / 2) (1 - cos w t) / w^2 dw,
/// by adaptive quadrature. Throws NumericalError when it does not converge.
///
Real dephasing_exponent(const SpectralDensity& J, Real beta, Real time);

///
/// Exact |rho_01(t)| = |rho_01(0)| exp(-prefactor Phi(t)) for a coupling that
/// commutes with the system Hamiltonian. The bias does not enter.
///
std::vector<Real> oracle_pure_dephasing(const SpectralDensity& J, Real beta, std::span<const Real> times,
                                        Real rho01_initial, Real prefactor = pure_dephasing_prefactor);

//------------------------------------------------------------------------------
// Runs
//------------------------------------------------------------------------------

struct RunSample
{
    Real time = 0.0;
    Matrix rho;            ///< reduced density matrix
    MomentRecord moments;  ///< raw moments of F and derived statistics
    Real trace_error        = 0.0;
    Real hermiticity_defect = 0.0;
};

struct RunResult
{
    ModeSetReport bath;
    int max_tier     = 0;
    Index ddo_count  = 0;
    Real dt          = 0.0;
    long steps       = 0;
    std::vector<RunSample> samples;
    DDOStore final_state;
    Real max_trace_error        = 0.0;
    Real max_hermiticity_defect = 0.0;
    Real dominant_frequency     = 0.0; ///< of <F(t)>, from d^2<F>/dt^2; NaN when no peak
    Real dominant_frequency_raw = 0.0; ///< the same from <F(t)> - <F(t_end)> itself
};

///
/// decompose -> propagate, sampling the reduced density and the moments of
/// F at every sample time. `max_tier` overrides the configured truncation.
/// The observer sees every sampled state.
///
RunResult simulate(const RunConfig& config, std::optional<int> max_tier = {}, const Observer& observer = {});

/// Change of the sampled observables between two truncations of the same run.
struct TruncationDelta
{
    int tier_a = 0;
    int tier_b = 0;
    Real rho   = 0.0;          ///< max |rho_a - rho_b| over samples and entries
    std::vector<Real> moments; ///< max |<F^n>_a - <F^n>_b| / max(1, |<F^n>_b|), n = 1..n_max

    Real largest() const;
};

TruncationDelta truncation_delta(const RunResult& a, const RunResult& b);

///
/// Angular frequency of the largest peak of |sum_j u_j exp(i w t_j)| on
/// [2 pi / T, omega_max], scanned on a fine grid, where u is the
/// `derivative_order`-th finite-difference derivative of the samples (order
/// 0 uses v - v_last). Differentiating suppresses the broadband pedestal of
/// a non-oscillatory relaxation, which otherwise swamps the oscillation
/// peak. NaN when the maximum sits at an end of the range.
///
Real dominant_frequency(std::span<const Real> times, std::span<const Real> values, Real omega_max = 5.0,
                        int derivative_order = 2);

struct AnalysisReport
{
    std::string state;  ///< "final" or "steady"
    Real steady_residual = 0.0;
    std::optional<FieldSlice> field;
    std::optional<SmoluchowskiReport> smoluchowski;
    std::optional<Real> recurrence_residual;
    std::optional<Real> closure_residual;  ///< unbiased spin-boson only
};

///
/// Field, Smoluchowski balance and recurrences on the analysis state: the
/// steady state when the config requests one (found by long-time
/// propagation from the initial density), otherwise `final_state`. Throws
/// ConvergenceError when the steady state is not reached.
///
AnalysisReport analyse(const RunConfig& config, const DDOStore* final_state);

//------------------------------------------------------------------------------
// Commands
//------------------------------------------------------------------------------

/// t,F_mean,F2,F3,F4,sigma_F,skewness,kurtosis,trace_err,herm_err at 17 digits.
void write_moments_csv(std::ostream& os, const RunResult& result);
/// x_<k> columns, then P_re, P_im, then J_<k>_re, J_<k>_im per current.
void write_field_csv(std::ostream& os, const FieldSlice& slice);

struct CommandStatus
{
    bool converged = true;   ///< false maps to exit code 4
    std::string message;
};

/// Mode set and reconstruction report into out/modes.json.
CommandStatus decompose_command(const RunConfig& config, const std::filesystem::path& out);
/// moments.csv, optional field.csv and checkpoint.txt, summary.json.
CommandStatus run_command(const RunConfig& config, const std::filesystem::path& out,
                          const std::vector<int>& l_sweep = {});
/// oracle.csv comparing the propagated coherence with the exact one.
CommandStatus oracle_command(const RunConfig& config, const std::filesystem::path& out);
/// Field slice and steady-state identities into field.csv and field_summary.json.
CommandStatus field_command(const RunConfig& config, const std::filesystem::path& out);
/// One run per sweep value under out/point_<i>, plus sweep_summary.json.
CommandStatus sweep_command(const RunConfig& config, const std::filesystem::path& out,
                            const std::vector<int>& l_sweep = {});

} // namespace dqme

#endif

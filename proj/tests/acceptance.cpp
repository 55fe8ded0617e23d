// Acceptance suite: one PASS/FAIL line per criterion. Runs the shipped
// configs under configs/, so it takes a few minutes on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <dqme/harness.hpp>

using namespace dqme;

namespace
{

const std::string config_dir = DQME_CONFIG_DIR;

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Conservation over every propagation below.
struct Conservation
{
    Real trace = 0.0;
    Real herm  = 0.0;
    int runs   = 0;
    int samples = 0;

    void add(const RunResult& r)
    {
        for (const auto& s : r.samples)
        {
            trace = std::max(trace, s.trace_error);
            herm  = std::max(herm, s.hermiticity_defect);
            ++samples;
        }
        ++runs;
    }

    void add(const Trajectory& t)
    {
        trace = std::max(trace, t.max_trace_error);
        herm  = std::max(herm, t.max_hermiticity_defect);
        samples += static_cast<int>(t.times.size());
        ++runs;
    }
} conservation;

RunResult tracked(const RunConfig& c, std::optional<int> L = {}, const Observer& obs = {})
{
    RunResult r = simulate(c, L, obs);
    conservation.add(r);
    return r;
}

struct SweepPoint
{
    Real value;
    RunResult run;
    RunResult refined; // L + 1
};

std::vector<SweepPoint> sweep_points(const RunConfig& config)
{
    std::vector<SweepPoint> out;
    for (Real v : config.sweep->values)
    {
        const RunConfig c = with_parameter(config, config.sweep->parameter, v);
        SweepPoint p{v, tracked(c), tracked(c, c.hierarchy.max_tier + 1)};
        out.push_back(std::move(p));
    }
    return out;
}

bool strictly(const std::vector<Real>& v, bool increasing)
{
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (increasing ? !(v[i + 1] > v[i]) : !(v[i + 1] < v[i]))
            return false;
    return v.size() > 1;
}

std::string list(const std::vector<Real>& v)
{
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i)
        s += fmt(i ? ", %.6g" : "%.6g", v[i]);
    return s + "}";
}

Real final_sigma_ratio(const RunResult& r)
{
    return *r.samples.back().moments.sigma / *r.samples.front().moments.sigma;
}

//------------------------------------------------------------------------------

Outcome decomposition_fidelity()
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto J  = SpectralDensity::brownian(1.0, 1.0, 1.0);
    DecompositionOptions opt;
    opt.check_reconstruction = false;
    const auto modes = decompose_correlation(J, 1.0, 20, opt);
    const auto rep   = reconstruction_error(modes, J, 5.0, 251);
    const double s   = seconds_since(t0);
    return {rep.max_relative_error <= 1e-3 && s < 5.0,
            fmt("max relative error %.3g on [0, 5 beta] (limit 1e-3), %.2f s (limit 5 s)", rep.max_relative_error, s)};
}

Outcome exact_model_oracle()
{
    const auto t0      = std::chrono::steady_clock::now();
    const RunConfig c  = load_run_config(config_dir + "/pure_dephasing.json");
    const RunResult r  = tracked(c);
    std::vector<Real> times;
    for (const auto& s : r.samples)
        times.push_back(s.time);
    const auto oracle = oracle_pure_dephasing(c.bath.density, c.bath.beta, times, std::abs(r.samples[0].rho(0, 1)));
    Real worst = 0.0, pop_drift = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
    {
        worst     = std::max(worst, std::abs(std::abs(r.samples[i].rho(0, 1)) - oracle[i]));
        pop_drift = std::max(pop_drift, std::abs(r.samples[i].rho(0, 0) - r.samples[0].rho(0, 0)));
    }
    const double s = seconds_since(t0);
    const bool ok  = worst <= 1e-4 && pop_drift <= 1e-12 && times.back() >= 10.0 && s < 120.0 &&
                    r.bath.modes.size() <= 22;
    return {ok, fmt("max ||rho01| - oracle| %.3g on [0, %.0f] (limit 1e-4), K = %.0f, L = %.0f", worst, times.back(),
                    static_cast<double>(r.bath.modes.size()), r.max_tier) +
                    fmt(", population drift %.2g, %.1f s (limit 120 s)", pop_drift, s)};
}

Outcome dual_route_moments()
{
    RunConfig c = load_run_config(config_dir + "/et_coupling_sweep.json");
    c           = with_parameter(c, "/integrator/t_end", 10.0);
    c           = with_parameter(c, "/integrator/sample_interval", 0.2);
    const auto modes = build_modes(c).modes;
    Real worst = 0.0;
    int times  = 0;
    tracked(c, {}, [&](Real t, const DDOStore& s) {
        if (t == 0.0)
            return;
        const auto table = x_moment_table(s, modes, 4);
        for (int n = 1; n <= 4; ++n)
        {
            const Real a = hybrid_moment(s, modes, n);
            const Real b = hybrid_moment_via_x(table, modes, n);
            worst        = std::max(worst, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
        }
        ++times;
    });
    return {worst <= 1e-8 && times == 50,
            fmt("max relative difference %.3g over n = 1..4 at %.0f times (limit 1e-8)", worst, times)};
}

Outcome gaussian_start()
{
    Real worst = 0.0;
    int models = 0;
    for (const char* name : {"et_coupling_sweep.json", "et_temperature_sweep.json", "pure_dephasing.json", "spin_boson_steady.json"})
    {
        const RunConfig c = load_run_config(config_dir + "/" + name);
        const auto modes  = build_modes(c).modes;
        const auto state  = initial_state(initial_density(c), static_cast<int>(modes.size()), 4);
        const auto rec    = moment_record(state, modes, 4);
        worst             = std::max({worst, std::abs(*rec.skewness), std::abs(*rec.kurtosis)});
        ++models;
    }
    // a mixed start in a custom three-level model
    const RunConfig custom = parse_run_config(R"({
        "schema_version": 1,
        "model": {"type": "Custom", "H": [[0, 0.3, 0], [0.3, 0.5, 0.2], [0, 0.2, 1.0]],
                  "Q": [[1, 0, 0], [0, 0, 0], [0, 0, -1]],
                  "initial": [[0.5, 0.1, 0], [0.1, 0.3, 0], [0, 0, 0.2]]},
        "bath": {"spectral_density": "BrownianOscillator", "lambda": 0.7, "beta": 2.0, "n_matsubara": 3,
                 "check_reconstruction": false},
        "hierarchy": {"L": 4}})");
    const auto modes = build_modes(custom).modes;
    const auto rec   = moment_record(initial_state(initial_density(custom), static_cast<int>(modes.size()), 4), modes, 4);
    worst            = std::max({worst, std::abs(*rec.skewness), std::abs(*rec.kurtosis)});
    ++models;
    return {worst <= 1e-8, fmt("max |skewness|, |kurtosis| at t = 0 is %.3g over %.0f models (limit 1e-8)", worst, models)};
}

Outcome truncation_convergence(const std::vector<SweepPoint>& coupling, const std::vector<SweepPoint>& temperature)
{
    Real worst  = 0.0;
    int checked = 0;
    for (const auto* set : {&coupling, &temperature})
        for (const auto& p : *set)
        {
            for (std::size_t i = 0; i < p.run.samples.size(); ++i)
            {
                const auto& a = p.run.samples[i];
                const auto& b = p.refined.samples[i];
                worst         = std::max(worst, (a.rho - b.rho).cwiseAbs().maxCoeff());
                for (std::size_t n = 0; n < 4; ++n)
                    worst = std::max(worst, std::abs(a.moments.raw[n] - b.moments.raw[n]));
            }
            ++checked;
        }
    return {worst <= 1e-6, fmt("max absolute change of rho_S and <F^n> (n <= 4) between L and L + 1 is %.3g over "
                               "%.0f runs (limit 1e-6)",
                               worst, checked)};
}

Outcome coupling_trends(const RunConfig& config, const std::vector<SweepPoint>& coupling)
{
    const Real omega_s = std::sqrt(config.model.epsilon * config.model.epsilon +
                                   4.0 * config.model.coupling * config.model.coupling);
    std::vector<Real> mean, ratio, skew, kurt, freq;
    bool freq_ok = true;
    for (const auto& p : coupling)
    {
        const auto& m = p.run.samples.back().moments;
        mean.push_back(m.raw[0]);
        ratio.push_back(final_sigma_ratio(p.run));
        skew.push_back(std::abs(*m.skewness));
        kurt.push_back(std::abs(*m.kurtosis));
        freq.push_back(p.run.dominant_frequency);
        freq_ok = freq_ok && std::abs(p.run.dominant_frequency - omega_s) <= 0.15 * omega_s;
    }
    const bool ok = strictly(mean, true) && strictly(ratio, true) && strictly(skew, true) && strictly(kurt, true) &&
                    freq_ok;
    return {ok, "lambda " + list(config.sweep->values) + ": <F> " + list(mean) + ", sigma/sigma0 " + list(ratio) +
                    ", |skew| " + list(skew) + ", |kurt| " + list(kurt) + ", frequency " + list(freq) +
                    fmt(" (Omega_S = %.3g, 15%%)", omega_s)};
}

Outcome temperature_trends(const RunConfig& config, const std::vector<SweepPoint>& temperature)
{
    std::vector<Real> beta = config.sweep->values;
    const bool hotter = strictly(beta, false);
    const Real span   = *std::max_element(beta.begin(), beta.end()) / *std::min_element(beta.begin(), beta.end());
    std::vector<Real> mean, ratio, skew;
    for (const auto& p : temperature)
    {
        mean.push_back(p.run.samples.back().moments.raw[0]);
        ratio.push_back(final_sigma_ratio(p.run));
        skew.push_back(*p.run.samples.back().moments.skewness);
    }
    const bool ok = hotter && span >= 4.0 && strictly(mean, true) && strictly(ratio, false) && strictly(skew, false);
    return {ok, "beta " + list(beta) + " (rising temperature): <F> " + list(mean) + ", sigma/sigma0 " + list(ratio) +
                    ", skewness " + list(skew)};
}

Outcome steady_state_identities(AnalysisReport& report)
{
    const RunConfig c = load_run_config(config_dir + "/spin_boson_steady.json");
    report            = analyse(c, nullptr);
    const auto& sm    = *report.smoluchowski;
    const bool ok     = *report.recurrence_residual <= 1e-6 && *report.closure_residual <= 1e-6 &&
                    sm.residual <= 5e-3 && sm.conclusive && report.field->points() == 401;
    return {ok, fmt("recurrence %.3g, spin-boson closure %.3g (limits 1e-6), Smoluchowski %.3g (limit 5e-3, "
                    "discretization %.2g) on 401 points",
                    *report.recurrence_residual, *report.closure_residual, sm.residual, sm.discretization)};
}

Outcome round_trips(const std::vector<SweepPoint>& coupling)
{
    // coefficient maps for every zeta in play: complex pair, imaginary and real
    std::vector<Complex> zetas;
    for (const auto& m : coupling.front().run.bath.modes.modes)
        zetas.push_back(m.zeta);
    for (const auto& m : decompose_correlation(SpectralDensity::drude(0.2, 1.0), 0.5, 2).modes)
        zetas.push_back(m.zeta);
    Real coeff = 0.0;
    for (Complex z : zetas)
    {
        const Matrix c  = x_coefficient_matrix(8, z);
        const Matrix cb = ddo_coefficient_matrix(8, z);
        coeff           = std::max({coeff, (c * cb - Matrix::Identity(9, 9)).cwiseAbs().maxCoeff(),
                                    (cb * c - Matrix::Identity(9, 9)).cwiseAbs().maxCoeff()});
    }

    // whole-store route on a propagated state
    const auto& run   = coupling.front().run;
    const DDOStore& s = run.final_state;
    const DDOStore back = ddos_from_x_operators(x_operators(s, run.bath.modes), run.bath.modes);
    const Real store    = (back.data() - s.data()).cwiseAbs().maxCoeff() / s.data().cwiseAbs().maxCoeff();

    // Hermite projection of a reconstructed one-mode field
    const RunConfig c  = load_run_config(config_dir + "/spin_boson_steady.json");
    const auto modes   = build_modes(c).modes;
    const auto model   = build_model(c);
    auto index         = std::make_shared<HierarchyIndex>(1, 6);
    DDOStore state     = initial_state(initial_density(c), index);
    PropagationOptions po;
    po.dt    = 0.005;
    po.t_end = 2.0;
    conservation.add(propagate(state, model, modes, po));
    const RealVector x = linspace(-12.0, 12.0, 481);
    FieldOptions fo;
    fo.with_operator   = true;
    const auto slice   = reconstruct(state, modes, model.Q, {0}, {x}, fo);
    const auto proj    = hermite_projection(slice, modes[0].zeta, 6);
    Real herm          = 0.0;
    for (int n = 0; n <= 6; ++n)
        herm = std::max(herm, (proj[static_cast<std::size_t>(n)] - Matrix(state[n])).cwiseAbs().maxCoeff());

    return {coeff <= 1e-10 && store <= 1e-10 && herm <= 1e-8,
            fmt("c cbar identity %.3g, store round trip %.3g (limits 1e-10), Hermite projection %.3g (limit 1e-8)",
                coeff, store, herm)};
}

} // namespace

int main()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Outcome> results(10);
    auto guarded = [](const std::function<Outcome()>& f) {
        try
        {
            return f();
        }
        catch (const std::exception& e)
        {
            return Outcome{false, std::string("error: ") + e.what()};
        }
    };

    results[0] = guarded(decomposition_fidelity);
    results[2] = guarded(exact_model_oracle);
    results[3] = guarded(dual_route_moments);
    results[4] = guarded(gaussian_start);

    std::vector<SweepPoint> coupling, temperature;
    RunConfig coupling_config, temperature_config;
    try
    {
        coupling_config    = load_run_config(config_dir + "/et_coupling_sweep.json");
        temperature_config = load_run_config(config_dir + "/et_temperature_sweep.json");
        coupling    = sweep_points(coupling_config);
        temperature = sweep_points(temperature_config);
        results[5]  = guarded([&] { return truncation_convergence(coupling, temperature); });
        results[6]  = guarded([&] { return coupling_trends(coupling_config, coupling); });
        results[7]  = guarded([&] { return temperature_trends(temperature_config, temperature); });
        results[9]  = guarded([&] { return round_trips(coupling); });
    }
    catch (const std::exception& e)
    {
        for (int i : {5, 6, 7, 9})
            results[static_cast<std::size_t>(i)] = {false, std::string("error: ") + e.what()};
    }
    AnalysisReport report;
    results[8] = guarded([&] { return steady_state_identities(report); });

    results[1] = {conservation.trace <= 1e-10 && conservation.herm <= 1e-9 && conservation.samples > 0,
                  fmt("max |tr rho_0 - 1| %.3g (limit 1e-10), max Hermiticity defect %.3g (limit 1e-9) over %.0f "
                      "samples",
                      conservation.trace, conservation.herm, conservation.samples)};

    const char* names[10] = {"decomposition fidelity", "conservation",       "exact-model oracle",
                             "dual-route moments",     "Gaussian start",     "truncation convergence",
                             "coupling trends",        "temperature trends", "steady-state identities",
                             "round-trips"};
    int failed = 0;
    for (int i = 0; i < 10; ++i)
    {
        const auto& r = results[static_cast<std::size_t>(i)];
        std::printf("%s criterion %d (%s): %s\n", r.pass ? "PASS" : "FAIL", i + 1, names[i], r.detail.c_str());
        failed += r.pass ? 0 : 1;
    }
    std::printf("%d of 10 criteria passed in %.0f s\n", 10 - failed, seconds_since(t0));
    return failed == 0 ? 0 : 1;
}

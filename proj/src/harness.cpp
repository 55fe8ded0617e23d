#include <dqme/harness.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include <dqme/quadrature.hpp>

namespace dqme
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

constexpr Real pi = 3.141592653589793238462643383279502884;
constexpr Real nan_value = std::numeric_limits<Real>::quiet_NaN();

//------------------------------------------------------------------------------
// JSON helpers
//------------------------------------------------------------------------------

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object())
        throw InputError("config: " + where + " must be an object");
    for (const auto& [key, value] : obj.items())
    {
        bool known = false;
        for (const char* a : allowed)
            known = known || key == a;
        if (!known)
            throw InputError("config: unknown key " + where + "." + key);
    }
}

Real get_real(const json& obj, const char* key, Real fallback, const std::string& where)
{
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number())
        throw InputError("config: " + where + "." + key + " must be a number");
    const Real x = v.get<Real>();
    if (!std::isfinite(x))
        throw InputError("config: " + where + "." + key + " must be finite");
    return x;
}

int get_int(const json& obj, const char* key, int fallback, const std::string& where)
{
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer())
        throw InputError("config: " + where + "." + key + " must be an integer");
    return v.get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where)
{
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_boolean())
        throw InputError("config: " + where + "." + key + " must be true or false");
    return v.get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback, const std::string& where)
{
    if (!obj.contains(key))
        return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string())
        throw InputError("config: " + where + "." + key + " must be a string");
    return v.get<std::string>();
}

RealVector real_rows(const json& rows, const std::string& where, Index& n)
{
    if (!rows.is_array() || rows.empty())
        throw InputError("config: " + where + " must be a non-empty array of rows");
    n = static_cast<Index>(rows.size());
    RealVector out(n * n);
    for (Index i = 0; i < n; ++i)
    {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != n)
            throw InputError("config: " + where + " must be square");
        for (Index j = 0; j < n; ++j)
        {
            const auto& v = row[static_cast<std::size_t>(j)];
            if (!v.is_number())
                throw InputError("config: " + where + " entries must be numbers");
            out[i * n + j] = v.get<Real>();
        }
    }
    return out;
}

// [[...]] (real) or {"re": [[...]], "im": [[...]]}
Matrix parse_matrix(const json& v, const std::string& where)
{
    Index n = 0;
    if (v.is_array())
    {
        const RealVector re = real_rows(v, where, n);
        Matrix m(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                m(i, j) = re[i * n + j];
        return m;
    }
    check_keys(v, where, {"re", "im"});
    if (!v.contains("re"))
        throw InputError("config: " + where + ".re is required");
    const RealVector re = real_rows(v.at("re"), where + ".re", n);
    RealVector im = RealVector::Zero(n * n);
    if (v.contains("im"))
    {
        Index m_im = 0;
        im = real_rows(v.at("im"), where + ".im", m_im);
        if (m_im != n)
            throw InputError("config: " + where + ".im has the wrong size");
    }
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            m(i, j) = Complex(re[i * n + j], im[i * n + j]);
    return m;
}

Matrix projector(Index dim, Index k)
{
    Matrix m = Matrix::Zero(dim, dim);
    m(k, k)  = 1.0;
    return m;
}

Matrix pauli_x()
{
    Matrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

Matrix pauli_z()
{
    Matrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}

// Dedicated text for the numbers that end up in CSV files.
std::string number(Real x)
{
    if (std::isnan(x))
        return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

json number_or_null(Real x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

json optional_json(const std::optional<Real>& x)
{
    return x ? number_or_null(*x) : json(nullptr);
}

//------------------------------------------------------------------------------
// Output bundle: files removed again unless the command completes
//------------------------------------------------------------------------------

class OutputBundle
{
public:
    explicit OutputBundle(fs::path dir) : m_dir(std::move(dir))
    {
        std::error_code ec;
        if (!fs::exists(m_dir, ec))
        {
            if (!fs::create_directories(m_dir, ec))
                throw InputError("cannot create output directory " + m_dir.string());
            m_created = true;
        }
        else if (!fs::is_directory(m_dir, ec))
            throw InputError("output path is not a directory: " + m_dir.string());
    }

    OutputBundle(const OutputBundle&)            = delete;
    OutputBundle& operator=(const OutputBundle&) = delete;

    ~OutputBundle()
    {
        if (m_committed)
            return;
        std::error_code ec;
        for (auto it = m_paths.rbegin(); it != m_paths.rend(); ++it)
            fs::remove_all(*it, ec);
        if (m_created)
            fs::remove(m_dir, ec); // only succeeds when empty
    }

    const fs::path& dir() const { return m_dir; }

    void write(const std::string& name, const std::string& content)
    {
        const fs::path p = m_dir / name;
        m_paths.push_back(p);
        std::ofstream os(p, std::ios::binary);
        os << content;
        os.close();
        if (!os)
            throw InputError("cannot write " + p.string());
    }

    fs::path subdirectory(const std::string& name)
    {
        const fs::path p = m_dir / name;
        std::error_code ec;
        if (!fs::exists(p, ec))
            m_paths.push_back(p);
        fs::create_directories(p, ec);
        return p;
    }

    void commit() { m_committed = true; }

private:
    fs::path m_dir;
    std::vector<fs::path> m_paths;
    bool m_created   = false;
    bool m_committed = false;
};

std::string to_text(const std::function<void(std::ostream&)>& writer)
{
    std::ostringstream os;
    writer(os);
    return os.str();
}

} // namespace

//------------------------------------------------------------------------------
// Configuration
//------------------------------------------------------------------------------

std::string to_string(ModelKind kind)
{
    switch (kind)
    {
    case ModelKind::ElectronTransfer: return "ElectronTransfer";
    case ModelKind::SpinBoson: return "SpinBoson";
    case ModelKind::PureDephasing: return "PureDephasing";
    case ModelKind::Custom: return "Custom";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& name)
{
    for (ModelKind k : {ModelKind::ElectronTransfer, ModelKind::SpinBoson, ModelKind::PureDephasing, ModelKind::Custom})
        if (name == to_string(k))
            return k;
    throw InputError("config: unknown model type '" + name + "'");
}

RunConfig parse_run_config(const std::string& text)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (const json::exception& e)
    {
        throw InputError(std::string("config: malformed JSON: ") + e.what());
    }

    check_keys(doc, "config",
               {"schema_version", "units", "assumptions", "model", "bath", "hierarchy", "integrator", "outputs",
                "sweep", "convergence_tolerance", "oracle_tolerance"});

    RunConfig c;
    if (!doc.contains("schema_version"))
        throw InputError("config: schema_version is required");
    c.schema_version = get_int(doc, "schema_version", 0, "config");
    if (c.schema_version != config_schema_version)
        throw InputError("config: unsupported schema_version " + std::to_string(c.schema_version));
    c.units = get_string(doc, "units", c.units, "config");

    if (doc.contains("assumptions"))
    {
        const auto& a = doc.at("assumptions");
        if (!a.is_array())
            throw InputError("config: assumptions must be an array of strings");
        for (const auto& s : a)
        {
            if (!s.is_string())
                throw InputError("config: assumptions must be an array of strings");
            c.assumptions.push_back(s.get<std::string>());
        }
    }
    auto assume = [&](const std::string& s) { c.assumptions.push_back(s); };

    // model
    const json model = doc.value("model", json::object());
    check_keys(model, "model", {"type", "epsilon", "V", "lambda", "H", "Q", "initial"});
    c.model.kind = model_kind_from_string(get_string(model, "type", "ElectronTransfer", "model"));
    if (c.model.kind == ModelKind::ElectronTransfer && !model.contains("epsilon"))
        assume("epsilon = 0.6 Omega_S, derived from Omega_S = sqrt(epsilon^2 + 4 V^2) with V = 0.4 Omega_S");
    c.model.epsilon  = get_real(model, "epsilon", c.model.kind == ModelKind::ElectronTransfer ? 0.6 : 0.0, "model");
    c.model.coupling = get_real(model, "V", c.model.kind == ModelKind::PureDephasing ? 0.0 : 0.4, "model");
    if (model.contains("lambda"))
        c.model.lambda = get_real(model, "lambda", 0.0, "model");
    if (c.model.kind == ModelKind::Custom)
    {
        if (!model.contains("H") || !model.contains("Q"))
            throw InputError("config: a Custom model needs H and Q");
        c.model.H = parse_matrix(model.at("H"), "model.H");
        c.model.Q = parse_matrix(model.at("Q"), "model.Q");
    }
    else if (model.contains("H") || model.contains("Q"))
        throw InputError("config: H and Q are only accepted for Custom models");
    if (c.model.kind == ModelKind::PureDephasing && model.contains("V"))
        throw InputError("config: PureDephasing has no tunnelling V");
    if (model.contains("initial"))
        c.model.initial = parse_matrix(model.at("initial"), "model.initial");
    else if (c.model.kind == ModelKind::ElectronTransfer)
        assume("initial state |0><0| (donor)");
    else if (c.model.kind == ModelKind::PureDephasing)
        assume("initial state |+><+|");
    else
        assume("initial state |0><0|");

    // bath
    const json bath = doc.value("bath", json::object());
    check_keys(bath, "bath",
               {"spectral_density", "lambda", "omega0", "friction", "cutoff", "beta", "n_matsubara",
                "check_reconstruction", "reconstruction_tolerance"});
    const SpectralKind kind =
        spectral_kind_from_string(get_string(bath, "spectral_density", "BrownianOscillator", "bath"));
    const Real lambda = get_real(bath, "lambda", 0.5, "bath");
    if (kind == SpectralKind::BrownianOscillator)
    {
        if (bath.contains("cutoff"))
            throw InputError("config: bath.cutoff applies to DrudeLorentz only");
        c.bath.density = SpectralDensity::brownian(lambda, get_real(bath, "omega0", 1.0, "bath"),
                                                   get_real(bath, "friction", 1.0, "bath"));
    }
    else
    {
        if (bath.contains("omega0") || bath.contains("friction"))
            throw InputError("config: bath.omega0 and bath.friction apply to BrownianOscillator only");
        c.bath.density = SpectralDensity::drude(lambda, get_real(bath, "cutoff", 1.0, "bath"));
    }
    c.bath.density.validate();
    if (!bath.contains("beta"))
        assume("beta Omega_S = 1");
    c.bath.beta = get_real(bath, "beta", 1.0, "bath");
    if (!(c.bath.beta > 0.0))
        throw InputError("config: bath.beta must be positive");
    if (bath.contains("n_matsubara") && bath.at("n_matsubara").is_string())
    {
        if (bath.at("n_matsubara").get<std::string>() != "auto")
            throw InputError("config: bath.n_matsubara must be an integer or \"auto\"");
    }
    else
    {
        c.bath.n_matsubara = get_int(bath, "n_matsubara", -1, "bath");
        if (bath.contains("n_matsubara") && c.bath.n_matsubara < 0)
            throw InputError("config: bath.n_matsubara must be non-negative");
    }
    c.bath.check_reconstruction     = get_bool(bath, "check_reconstruction", true, "bath");
    c.bath.reconstruction_tolerance = get_real(bath, "reconstruction_tolerance", 1e-3, "bath");
    if (!(c.bath.reconstruction_tolerance > 0.0))
        throw InputError("config: bath.reconstruction_tolerance must be positive");
    if (c.bath.n_matsubara < 0 && kind != SpectralKind::BrownianOscillator)
        throw InputError("config: an automatic Matsubara count needs the Brownian oscillator quadrature check");
    if (c.model.kind == ModelKind::ElectronTransfer && c.model.lambda &&
        std::abs(*c.model.lambda - lambda) > 1e-14 * std::max(1.0, lambda))
        throw InputError("config: model.lambda must equal bath.lambda");

    // hierarchy
    const json hierarchy = doc.value("hierarchy", json::object());
    check_keys(hierarchy, "hierarchy", {"L", "filter_threshold"});
    c.hierarchy.max_tier         = get_int(hierarchy, "L", c.hierarchy.max_tier, "hierarchy");
    c.hierarchy.filter_threshold = get_real(hierarchy, "filter_threshold", 0.0, "hierarchy");
    if (c.hierarchy.max_tier < 0)
        throw InputError("config: hierarchy.L must be non-negative");
    if (c.hierarchy.filter_threshold < 0.0)
        throw InputError("config: hierarchy.filter_threshold must be non-negative");

    // integrator
    const json integ = doc.value("integrator", json::object());
    check_keys(integ, "integrator", {"scheme", "dt", "t_end", "sample_interval"});
    c.integrator.scheme          = integrator_from_string(get_string(integ, "scheme", "RK4", "integrator"));
    c.integrator.dt              = get_real(integ, "dt", 0.0, "integrator");
    c.integrator.t_end           = get_real(integ, "t_end", c.integrator.t_end, "integrator");
    c.integrator.sample_interval = get_real(integ, "sample_interval", c.integrator.sample_interval, "integrator");
    if (c.integrator.dt < 0.0 || !(c.integrator.t_end > 0.0) || c.integrator.sample_interval < 0.0)
        throw InputError("config: integrator needs dt >= 0, t_end > 0 and sample_interval >= 0");

    // outputs
    const json outputs = doc.value("outputs", json::object());
    check_keys(outputs, "outputs", {"moments", "field", "recurrences", "checkpoint", "steady_state"});
    if (outputs.contains("moments"))
    {
        check_keys(outputs.at("moments"), "outputs.moments", {"n_max"});
        c.outputs.moments_n_max = get_int(outputs.at("moments"), "n_max", 4, "outputs.moments");
        if (c.outputs.moments_n_max < 0)
            throw InputError("config: outputs.moments.n_max must be non-negative");
    }
    if (outputs.contains("recurrences"))
    {
        check_keys(outputs.at("recurrences"), "outputs.recurrences", {"tier"});
        c.outputs.recurrence_tier = get_int(outputs.at("recurrences"), "tier", 2, "outputs.recurrences");
        if (c.outputs.recurrence_tier < 1 || c.outputs.recurrence_tier > c.hierarchy.max_tier)
            throw InputError("config: outputs.recurrences.tier must lie in 1..L");
    }
    c.outputs.checkpoint = get_bool(outputs, "checkpoint", false, "outputs");
    if (outputs.contains("steady_state"))
    {
        const json& s = outputs.at("steady_state");
        check_keys(s, "outputs.steady_state", {"tolerance", "t_max"});
        SteadyStateRequest r;
        r.tolerance = get_real(s, "tolerance", r.tolerance, "outputs.steady_state");
        r.t_max     = get_real(s, "t_max", r.t_max, "outputs.steady_state");
        if (!(r.tolerance > 0.0) || !(r.t_max > 0.0))
            throw InputError("config: outputs.steady_state needs positive tolerance and t_max");
        c.outputs.steady_state = r;
    }
    if (outputs.contains("field"))
    {
        const json& f = outputs.at("field");
        check_keys(f, "outputs.field", {"dims", "min", "max", "points", "current", "smoluchowski_tolerance"});
        FieldRequest r;
        if (!f.contains("dims") || !f.at("dims").is_array() || f.at("dims").empty() || f.at("dims").size() > 2)
            throw InputError("config: outputs.field.dims must list one or two modes");
        for (const auto& d : f.at("dims"))
        {
            if (!d.is_number_integer())
                throw InputError("config: outputs.field.dims must be integers");
            r.dims.push_back(d.get<int>());
        }
        r.x_min   = get_real(f, "min", r.x_min, "outputs.field");
        r.x_max   = get_real(f, "max", r.x_max, "outputs.field");
        r.points  = get_int(f, "points", r.points, "outputs.field");
        r.current = get_bool(f, "current", r.current, "outputs.field");
        r.smoluchowski_tolerance =
            get_real(f, "smoluchowski_tolerance", r.smoluchowski_tolerance, "outputs.field");
        if (!(r.x_max > r.x_min) || r.points < 5 || r.points % 2 == 0)
            throw InputError("config: outputs.field needs max > min and an odd number of points >= 5");
        c.outputs.field = r;
    }
    if (c.hierarchy.max_tier < c.outputs.moments_n_max)
        throw InputError("config: hierarchy.L must be at least outputs.moments.n_max");

    // sweep
    if (doc.contains("sweep"))
    {
        const json& s = doc.at("sweep");
        check_keys(s, "sweep", {"parameter", "values"});
        SweepConfig sw;
        sw.parameter = get_string(s, "parameter", "", "sweep");
        if (sw.parameter.empty() || sw.parameter.front() != '/')
            throw InputError("config: sweep.parameter must be a JSON pointer such as /bath/lambda");
        if (sw.parameter.rfind("/sweep", 0) == 0)
            throw InputError("config: sweep.parameter cannot point into the sweep itself");
        if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty())
            throw InputError("config: sweep.values must be a non-empty array");
        for (const auto& v : s.at("values"))
        {
            if (!v.is_number())
                throw InputError("config: sweep.values must be numbers");
            sw.values.push_back(v.get<Real>());
        }
        c.sweep = sw;
    }

    c.convergence_tolerance = get_real(doc, "convergence_tolerance", c.convergence_tolerance, "config");
    c.oracle_tolerance      = get_real(doc, "oracle_tolerance", c.oracle_tolerance, "config");
    c.text                  = doc.dump(2);

    // model-level checks that need the whole config
    build_model(c).validate();
    initial_state(initial_density(c), 1, 0); // Hermitian, unit trace, positive
    return c;
}

RunConfig load_run_config(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw InputError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_run_config(ss.str());
}

RunConfig with_parameter(const RunConfig& config, const std::string& pointer, Real value)
{
    json doc = json::parse(config.text);
    try
    {
        const json::json_pointer ptr(pointer);
        if (!doc.contains(ptr.parent_pointer()) || !doc.at(ptr.parent_pointer()).is_object())
            throw InputError("config: sweep parameter " + pointer + " has no parent object");
        doc[ptr] = value;
    }
    catch (const json::exception& e)
    {
        throw InputError("config: bad sweep parameter " + pointer + ": " + e.what());
    }
    doc.erase("sweep");
    return parse_run_config(doc.dump());
}

SystemModel build_model(const RunConfig& config)
{
    const ModelConfig& m = config.model;
    SystemModel s;
    switch (m.kind)
    {
    case ModelKind::ElectronTransfer:
    {
        const Real lambda = config.bath.density.lambda;
        s.H               = (m.epsilon + lambda) * projector(2, 1);
        s.H(0, 1)         = m.coupling;
        s.H(1, 0)         = m.coupling;
        s.Q               = -projector(2, 1);
        break;
    }
    case ModelKind::SpinBoson:
        s.H = 0.5 * m.epsilon * pauli_z() + m.coupling * pauli_x();
        s.Q = pauli_z();
        break;
    case ModelKind::PureDephasing:
        s.H = 0.5 * m.epsilon * pauli_z();
        s.Q = pauli_z();
        break;
    case ModelKind::Custom:
        s.H = m.H;
        s.Q = m.Q;
        break;
    }
    s.validate();
    return s;
}

Matrix initial_density(const RunConfig& config)
{
    const Index dim = build_model(config).dim();
    if (config.model.initial.size() != 0)
    {
        if (config.model.initial.rows() != dim)
            throw InputError("config: model.initial does not match the system dimension");
        return config.model.initial;
    }
    if (config.model.kind == ModelKind::PureDephasing)
        return Matrix::Constant(2, 2, 0.5);
    return projector(dim, 0);
}

ModeSetReport build_modes(const RunConfig& config)
{
    const BathConfig& b = config.bath;
    DecompositionOptions options;
    options.check_reconstruction = false;
    options.tolerance            = b.reconstruction_tolerance;

    auto check = [&](ModeSetReport& r) {
        if (b.density.kind == SpectralKind::BrownianOscillator)
            r.reconstruction = reconstruction_error(r.modes, b.density, options.window_in_beta * b.beta,
                                                    options.window_samples);
        else
            r.reconstruction.max_relative_error = nan_value;
    };

    ModeSetReport r;
    if (b.n_matsubara >= 0)
    {
        r.n_matsubara = b.n_matsubara;
        r.modes       = decompose_correlation(b.density, b.beta, b.n_matsubara, options);
        check(r);
        if (b.check_reconstruction && r.reconstruction.max_relative_error > b.reconstruction_tolerance)
        {
            std::ostringstream msg;
            msg << "decomposition: relative reconstruction error " << r.reconstruction.max_relative_error
                << " at t = " << r.reconstruction.worst_time << " exceeds " << b.reconstruction_tolerance
                << " with " << b.n_matsubara << " Matsubara terms";
            throw NumericalError(msg.str());
        }
        return r;
    }

    constexpr int max_auto = 64;
    for (int n = 0; n <= max_auto; ++n)
    {
        r.n_matsubara = n;
        r.modes       = decompose_correlation(b.density, b.beta, n, options);
        check(r);
        if (r.reconstruction.max_relative_error <= b.reconstruction_tolerance)
            return r;
    }
    std::ostringstream msg;
    msg << "decomposition: " << max_auto << " Matsubara terms do not reach the reconstruction tolerance "
        << b.reconstruction_tolerance;
    throw NumericalError(msg.str());
}

//------------------------------------------------------------------------------
// Oracle
//------------------------------------------------------------------------------

Real dephasing_exponent(const SpectralDensity& J, Real beta, Real time)
{
    J.validate();
    if (!(beta > 0.0))
        throw InputError("dephasing_exponent: beta must be positive");
    if (!(time >= 0.0) || !std::isfinite(time))
        throw InputError("dephasing_exponent: time must be finite and non-negative");
    if (time == 0.0 || J.lambda == 0.0)
        return 0.0;

    // J/w * (x coth x) * (2/beta) * 2 sin^2(wt/2) / w^2 with x = beta w / 2,
    // every factor regular at w = 0.
    auto integrand = [&](Real w) {
        const Real x      = 0.5 * beta * w;
        const Real xcothx = std::abs(x) < 1e-4 ? 1.0 + x * x / 3.0 : x / std::tanh(x);
        const Real h      = 0.5 * w * time;
        const Real sinc   = std::abs(h) < 1e-8 ? 1.0 : std::sin(h) / h;
        return J.over_omega(w) * xcothx * (2.0 / beta) * 0.5 * time * time * sinc * sinc;
    };

    const Real scale = std::max({J.omega0, J.friction, J.cutoff, 1.0 / beta, 1.0});
    const Real W     = 40.0 * scale + 20.0 * pi / time;
    const int panels = 64 + static_cast<int>(std::ceil(W * time / pi));
    std::vector<Real> breaks(static_cast<std::size_t>(panels) + 1);
    for (int i = 0; i <= panels; ++i)
        breaks[static_cast<std::size_t>(i)] = W * i / panels;

    constexpr Real abs_tol = 1e-15, rel_tol = 1e-12;
    const auto head = integrate_adaptive<Real>(integrand, std::span<const Real>(breaks), abs_tol, rel_tol);
    // w = W / s on (0, 1]
    auto tail_integrand = [&](Real s) { return s <= 0.0 ? 0.0 : integrand(W / s) * W / (s * s); };
    const auto tail = integrate_adaptive<Real>(tail_integrand, 0.0, 1.0, abs_tol, rel_tol);

    const Real value = (head.value + tail.value) / pi;
    const Real error = (head.error + tail.error) / pi;
    if (!std::isfinite(value) || error > std::max(1e-13, 1e-10 * std::abs(value)))
    {
        std::ostringstream msg;
        msg << "dephasing_exponent: quadrature did not converge at t = " << time << " (error estimate " << error
            << ")";
        throw NumericalError(msg.str());
    }
    return value;
}

std::vector<Real> oracle_pure_dephasing(const SpectralDensity& J, Real beta, std::span<const Real> times,
                                        Real rho01_initial, Real prefactor)
{
    std::vector<Real> out;
    out.reserve(times.size());
    for (Real t : times)
        out.push_back(std::abs(rho01_initial) * std::exp(-prefactor * dephasing_exponent(J, beta, t)));
    return out;
}

//------------------------------------------------------------------------------
// Runs
//------------------------------------------------------------------------------

RunResult simulate(const RunConfig& config, std::optional<int> max_tier, const Observer& observer)
{
    RunResult r;
    r.bath                = build_modes(config);
    const auto& modes     = r.bath.modes;
    const SystemModel sys = build_model(config);
    r.max_tier            = max_tier.value_or(config.hierarchy.max_tier);
    const int n_max       = config.outputs.moments_n_max;
    if (r.max_tier < n_max)
        throw InputError("simulate: truncation tier below the requested moment order");

    auto index  = std::make_shared<HierarchyIndex>(static_cast<int>(modes.size()), r.max_tier);
    r.ddo_count = index->size();
    DDOStore state = initial_state(initial_density(config), index);
    const DeomGenerator gen(sys, modes, index);

    PropagationOptions po;
    po.integrator       = config.integrator.scheme;
    po.dt               = config.integrator.dt;
    po.t_end            = config.integrator.t_end;
    po.sample_interval  = config.integrator.sample_interval;
    po.filter_threshold = config.hierarchy.filter_threshold;

    const std::vector<int> bar = modes.bar_map();
    const auto traj = propagate(state, gen, po, [&](Real t, const DDOStore& s) {
        RunSample x;
        x.time               = t;
        x.rho                = s.reduced();
        x.trace_error        = s.trace_error();
        x.hermiticity_defect = s.hermiticity_defect(bar);
        if (n_max > 0)
            x.moments = moment_record(s, modes, n_max, t);
        else
            x.moments.time = t;
        r.samples.push_back(std::move(x));
        if (observer)
            observer(t, s);
    });

    r.dt                     = traj.dt;
    r.steps                  = traj.steps;
    r.max_trace_error        = traj.max_trace_error;
    r.max_hermiticity_defect = traj.max_hermiticity_defect;
    for (const auto& s : r.samples)
    {
        r.max_trace_error        = std::max(r.max_trace_error, s.trace_error);
        r.max_hermiticity_defect = std::max(r.max_hermiticity_defect, s.hermiticity_defect);
    }
    r.final_state = std::move(state);

    r.dominant_frequency     = nan_value;
    r.dominant_frequency_raw = nan_value;
    if (n_max > 0 && r.samples.size() > 8)
    {
        std::vector<Real> t, f;
        for (const auto& s : r.samples)
        {
            t.push_back(s.time);
            f.push_back(s.moments.raw[0]);
        }
        r.dominant_frequency     = dominant_frequency(t, f);
        r.dominant_frequency_raw = dominant_frequency(t, f, 5.0, 0);
    }
    return r;
}

Real TruncationDelta::largest() const
{
    Real m = rho;
    for (Real x : moments)
        m = std::max(m, x);
    return m;
}

TruncationDelta truncation_delta(const RunResult& a, const RunResult& b)
{
    if (a.samples.size() != b.samples.size())
        throw InputError("truncation_delta: runs have different sample grids");
    TruncationDelta d;
    d.tier_a           = a.max_tier;
    d.tier_b           = b.max_tier;
    const std::size_t n = a.samples.empty() ? 0 : std::min(a.samples[0].moments.raw.size(), b.samples[0].moments.raw.size());
    d.moments.assign(n, 0.0);
    for (std::size_t i = 0; i < a.samples.size(); ++i)
    {
        const auto& sa = a.samples[i];
        const auto& sb = b.samples[i];
        if (std::abs(sa.time - sb.time) > 1e-12 * std::max(1.0, std::abs(sa.time)))
            throw InputError("truncation_delta: runs have different sample grids");
        d.rho = std::max(d.rho, (sa.rho - sb.rho).cwiseAbs().maxCoeff());
        for (std::size_t k = 0; k < n; ++k)
        {
            const Real ref = std::max(1.0, std::abs(sb.moments.raw[k]));
            d.moments[k]   = std::max(d.moments[k], std::abs(sa.moments.raw[k] - sb.moments.raw[k]) / ref);
        }
    }
    return d;
}

namespace
{

// Largest value of |sum_j v_j exp(i w t_j)| on [w_min, omega_max]; NaN at an end of the range.
Real fourier_peak(std::span<const Real> times, const std::vector<Real>& v, Real w_min, Real omega_max)
{
    const int grid = 4000;
    Real best = nan_value, best_power = -1.0;
    for (int g = 0; g <= grid; ++g)
    {
        const Real w = w_min + (omega_max - w_min) * g / grid;
        Complex sum  = 0.0;
        for (std::size_t j = 0; j < times.size(); ++j)
            sum += v[j] * std::polar(1.0, w * times[j]);
        if (std::abs(sum) > best_power)
        {
            best_power = std::abs(sum);
            best       = (g == 0 || g == grid) ? nan_value : w;
        }
    }
    return best;
}

// np.gradient-style derivative: central inside, one-sided at the ends.
std::vector<Real> derivative(std::span<const Real> t, std::span<const Real> v)
{
    const std::size_t n = v.size();
    std::vector<Real> d(n);
    d[0]     = (v[1] - v[0]) / (t[1] - t[0]);
    d[n - 1] = (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
        d[i] = (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1]);
    return d;
}

} // namespace

Real dominant_frequency(std::span<const Real> times, std::span<const Real> values, Real omega_max,
                        int derivative_order)
{
    if (times.size() != values.size() || times.size() < 3)
        throw InputError("dominant_frequency: need at least three matching samples");
    if (derivative_order < 0)
        throw InputError("dominant_frequency: derivative order must be non-negative");
    const Real span = times.back() - times.front();
    if (!(span > 0.0))
        throw InputError("dominant_frequency: samples must span a positive time");
    const Real w_min = 2.0 * pi / span;
    if (!(omega_max > w_min))
        return nan_value;

    std::vector<Real> v(values.begin(), values.end());
    if (derivative_order == 0)
    {
        const Real last = v.back();
        for (Real& x : v)
            x -= last;
    }
    for (int k = 0; k < derivative_order; ++k)
        v = derivative(times, v);
    return fourier_peak(times, v, w_min, omega_max);
}

AnalysisReport analyse(const RunConfig& config, const DDOStore* final_state)
{
    AnalysisReport rep;
    const SystemModel sys = build_model(config);
    const auto bath       = build_modes(config);
    const auto& modes     = bath.modes;

    DDOStore steady;
    const DDOStore* state = final_state;
    if (config.outputs.steady_state)
    {
        auto index = std::make_shared<HierarchyIndex>(static_cast<int>(modes.size()), config.hierarchy.max_tier);
        const DeomGenerator gen(sys, modes, index);
        SteadyStateOptions so;
        so.tolerance = config.outputs.steady_state->tolerance;
        so.t_max     = config.outputs.steady_state->t_max;
        so.dt        = config.integrator.dt;
        so.initial   = initial_density(config);
        auto ss      = steady_state(gen, so);
        rep.steady_residual = ss.residual;
        if (!ss.converged)
        {
            std::ostringstream msg;
            msg << "steady state not reached by t = " << ss.time << " (residual " << ss.residual << ", tolerance "
                << so.tolerance << ")";
            throw ConvergenceError(msg.str());
        }
        steady    = std::move(ss.store);
        state     = &steady;
        rep.state = "steady";
    }
    else
    {
        if (!state)
            throw InputError("analyse: no state to analyse");
        rep.state = "final";
    }

    if (config.outputs.field)
    {
        const FieldRequest& f = *config.outputs.field;
        for (int d : f.dims)
            if (d < 0 || d >= static_cast<int>(modes.size()))
                throw InputError("config: outputs.field.dims names a mode outside 0.." +
                                 std::to_string(modes.size() - 1));
        std::vector<RealVector> axes(f.dims.size(), linspace(f.x_min, f.x_max, f.points));
        FieldOptions fo;
        if (f.current)
            fo.currents = f.dims;
        rep.field = reconstruct(*state, modes, sys.Q, f.dims, axes, fo);
        if (rep.state == "steady")
            rep.smoluchowski = smoluchowski_residual(*state, modes, sys.Q, f.dims, axes, f.smoluchowski_tolerance);
    }

    if (config.outputs.recurrence_tier > 0)
    {
        const int tier = std::min(config.outputs.recurrence_tier, state->max_tier());
        Real worst     = 0.0;
        for (const auto& r : equilibrium_recurrence_residual(*state, modes, sys.Q, tier))
            worst = std::max(worst, r.residual);
        rep.recurrence_residual = worst;
        if (config.model.kind == ModelKind::SpinBoson && config.model.epsilon == 0.0 && state->max_tier() > 0)
            rep.closure_residual =
                spin_boson_closure_residual(*state, modes, sys, std::min(tier, state->max_tier() - 1));
    }
    return rep;
}

//------------------------------------------------------------------------------
// Output
//------------------------------------------------------------------------------

void write_moments_csv(std::ostream& os, const RunResult& result)
{
    os << "t,F_mean,F2,F3,F4,sigma_F,skewness,kurtosis,trace_err,herm_err\n";
    for (const auto& s : result.samples)
    {
        const auto& m = s.moments;
        os << number(s.time);
        for (std::size_t k = 0; k < 4; ++k)
            os << ',' << number(k < m.raw.size() ? m.raw[k] : nan_value);
        os << ',' << number(m.sigma.value_or(nan_value)) << ',' << number(m.skewness.value_or(nan_value)) << ','
           << number(m.kurtosis.value_or(nan_value)) << ',' << number(s.trace_error) << ','
           << number(s.hermiticity_defect) << '\n';
    }
}

void write_field_csv(std::ostream& os, const FieldSlice& slice)
{
    for (int d : slice.dims)
        os << 'x' << d << ',';
    os << "P_re,P_im";
    for (int k : slice.current_modes)
        os << ",J" << k << "_re,J" << k << "_im";
    os << '\n';

    const Index n0 = slice.axes[0].size();
    const Index n1 = slice.axes.size() > 1 ? slice.axes[1].size() : 1;
    for (Index i = 0; i < n0; ++i)
        for (Index j = 0; j < n1; ++j)
        {
            const Index p = i * n1 + j;
            os << number(slice.axes[0][i]) << ',';
            if (slice.axes.size() > 1)
                os << number(slice.axes[1][j]) << ',';
            os << number(slice.P[p].real()) << ',' << number(slice.P[p].imag());
            for (const auto& J : slice.current)
                os << ',' << number(J[p].real()) << ',' << number(J[p].imag());
            os << '\n';
        }
}

namespace
{

json sample_json(const RunSample& s)
{
    json j;
    j["time"] = s.time;
    json pops = json::array();
    for (Index k = 0; k < s.rho.rows(); ++k)
        pops.push_back(s.rho(k, k).real());
    j["populations"] = pops;
    if (!s.moments.raw.empty())
    {
        j["F_mean"]   = s.moments.raw[0];
        j["sigma_F"]  = optional_json(s.moments.sigma);
        j["skewness"] = optional_json(s.moments.skewness);
        j["kurtosis"] = optional_json(s.moments.kurtosis);
    }
    return j;
}

json delta_json(const TruncationDelta& d)
{
    return {{"L_a", d.tier_a}, {"L_b", d.tier_b}, {"rho", d.rho}, {"moments", d.moments}, {"largest", d.largest()}};
}

json analysis_json(const AnalysisReport& a)
{
    json j;
    j["state"] = a.state;
    if (a.state == "steady")
        j["steady_residual"] = a.steady_residual;
    if (a.field)
    {
        j["field"] = {{"dims", a.field->dims},
                      {"points", a.field->points()},
                      {"max_imag_ratio", a.field->max_imag_ratio}};
    }
    if (a.smoluchowski)
        j["smoluchowski"] = {{"residual", a.smoluchowski->residual},
                             {"discretization", a.smoluchowski->discretization},
                             {"scale", a.smoluchowski->scale},
                             {"conclusive", a.smoluchowski->conclusive}};
    if (a.recurrence_residual)
        j["recurrence_residual"] = *a.recurrence_residual;
    if (a.closure_residual)
        j["closure_residual"] = *a.closure_residual;
    return j;
}

json run_summary(const RunConfig& config, const RunResult& r)
{
    json j;
    j["schema_version"] = config_schema_version;
    j["units"]          = config.units;
    j["model"]          = to_string(config.model.kind);
    j["assumptions"]    = config.assumptions;
    j["bath"]           = {{"spectral_density", to_string(config.bath.density.kind)},
                           {"beta", config.bath.beta},
                           {"modes", r.bath.modes.size()},
                           {"n_matsubara", r.bath.n_matsubara},
                           {"reconstruction_error", number_or_null(r.bath.reconstruction.max_relative_error)},
                           {"variance", bath_variance(r.bath.modes)}};
    j["hierarchy"]      = {{"L", r.max_tier}, {"ddo_count", r.ddo_count}};
    j["integrator"]     = {{"scheme", to_string(config.integrator.scheme)},
                           {"dt", r.dt},
                           {"steps", r.steps},
                           {"t_end", config.integrator.t_end}};
    j["max_trace_error"]        = r.max_trace_error;
    j["max_hermiticity_defect"] = r.max_hermiticity_defect;
    if (!r.samples.empty())
    {
        j["initial"] = sample_json(r.samples.front());
        j["final"]   = sample_json(r.samples.back());
        const auto& s0 = r.samples.front().moments.sigma;
        const auto& s1 = r.samples.back().moments.sigma;
        j["final"]["sigma_ratio"] = (s0 && s1 && *s0 > 0.0) ? json(*s1 / *s0) : json(nullptr);
    }
    j["dominant_frequency"]     = number_or_null(r.dominant_frequency);
    j["dominant_frequency_raw"] = number_or_null(r.dominant_frequency_raw);
    return j;
}

// Runs at every extra truncation; deltas between consecutive tiers in ascending order.
std::vector<TruncationDelta> truncation_sweep(const RunConfig& config, const RunResult& primary,
                                              const std::vector<int>& l_sweep)
{
    std::set<int> tiers(l_sweep.begin(), l_sweep.end());
    if (tiers.empty())
        return {};
    tiers.insert(primary.max_tier);
    std::vector<RunResult> runs;
    for (int L : tiers)
    {
        if (L < config.outputs.moments_n_max)
            throw InputError("--l-sweep: tier " + std::to_string(L) + " is below the moment order");
        if (L == primary.max_tier)
            runs.push_back(primary);
        else
            runs.push_back(simulate(config, L));
    }
    std::vector<TruncationDelta> out;
    for (std::size_t i = 0; i + 1 < runs.size(); ++i)
        out.push_back(truncation_delta(runs[i], runs[i + 1]));
    return out;
}

// Shared body of run and sweep points.
CommandStatus run_into(OutputBundle& bundle, const RunConfig& config, const std::vector<int>& l_sweep,
                       json* summary_out)
{
    const RunResult result = simulate(config);
    bundle.write("moments.csv", to_text([&](std::ostream& os) { write_moments_csv(os, result); }));

    json summary = run_summary(config, result);
    CommandStatus status;

    const auto deltas = truncation_sweep(config, result, l_sweep);
    if (!deltas.empty())
    {
        summary["l_sweep"] = json::array();
        for (const auto& d : deltas)
            summary["l_sweep"].push_back(delta_json(d));
        const bool ok                   = deltas.back().largest() <= config.convergence_tolerance;
        summary["truncation_converged"] = ok;
        if (!ok)
        {
            status.converged = false;
            std::ostringstream msg;
            msg << "truncation not converged: change " << deltas.back().largest() << " between L = "
                << deltas.back().tier_a << " and " << deltas.back().tier_b << " exceeds "
                << config.convergence_tolerance;
            status.message = msg.str();
        }
    }

    if (config.outputs.field || config.outputs.recurrence_tier > 0)
    {
        const AnalysisReport a = analyse(config, &result.final_state);
        if (a.field)
            bundle.write("field.csv", to_text([&](std::ostream& os) { write_field_csv(os, *a.field); }));
        summary["analysis"] = analysis_json(a);
    }
    if (config.outputs.checkpoint)
        bundle.write("checkpoint.txt", to_text([&](std::ostream& os) { write_checkpoint(os, result.final_state); }));

    bundle.write("summary.json", summary.dump(2) + "\n");
    if (summary_out)
        *summary_out = std::move(summary);
    return status;
}

// "increasing", "decreasing" or "mixed" across the sweep order.
std::string trend(const std::vector<Real>& v)
{
    bool inc = true, dec = true;
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
    {
        inc = inc && v[i + 1] > v[i];
        dec = dec && v[i + 1] < v[i];
    }
    if (v.size() < 2 || std::any_of(v.begin(), v.end(), [](Real x) { return !std::isfinite(x); }))
        return "undetermined";
    return inc ? "increasing" : dec ? "decreasing" : "mixed";
}

Real json_real(const json& j, const char* a, const char* b)
{
    if (!j.contains(a) || !j.at(a).contains(b) || !j.at(a).at(b).is_number())
        return nan_value;
    return j.at(a).at(b).get<Real>();
}

} // namespace

CommandStatus decompose_command(const RunConfig& config, const fs::path& out)
{
    OutputBundle bundle(out);
    const ModeSetReport r = build_modes(config);
    bundle.write("modes.json", mode_set_to_json(r.modes) + "\n");
    json j = {{"spectral_density", to_string(config.bath.density.kind)},
              {"beta", config.bath.beta},
              {"n_matsubara", r.n_matsubara},
              {"modes", r.modes.size()},
              {"max_relative_error", number_or_null(r.reconstruction.max_relative_error)},
              {"worst_time", r.reconstruction.worst_time},
              {"reference_scale", r.reconstruction.reference_scale},
              {"variance", bath_variance(r.modes)}};
    bundle.write("decomposition.json", j.dump(2) + "\n");
    bundle.commit();
    return {};
}

CommandStatus run_command(const RunConfig& config, const fs::path& out, const std::vector<int>& l_sweep)
{
    OutputBundle bundle(out);
    CommandStatus status = run_into(bundle, config, l_sweep, nullptr);
    bundle.commit();
    return status;
}

CommandStatus oracle_command(const RunConfig& config, const fs::path& out)
{
    if (config.model.kind != ModelKind::PureDephasing)
        throw InputError("oracle: needs a PureDephasing model");
    OutputBundle bundle(out);
    const RunResult r = simulate(config);

    std::vector<Real> times;
    for (const auto& s : r.samples)
        times.push_back(s.time);
    const Real rho01   = std::abs(r.samples.front().rho(0, 1));
    const auto oracle  = oracle_pure_dephasing(config.bath.density, config.bath.beta, times, rho01);

    Real worst = 0.0;
    std::ostringstream csv;
    csv << "t,deom_abs_rho01,oracle_abs_rho01,abs_diff,rho00,rho11\n";
    for (std::size_t i = 0; i < times.size(); ++i)
    {
        const Real d = std::abs(r.samples[i].rho(0, 1));
        worst        = std::max(worst, std::abs(d - oracle[i]));
        csv << number(times[i]) << ',' << number(d) << ',' << number(oracle[i]) << ',' << number(std::abs(d - oracle[i]))
            << ',' << number(r.samples[i].rho(0, 0).real()) << ',' << number(r.samples[i].rho(1, 1).real()) << '\n';
    }
    bundle.write("oracle.csv", csv.str());

    const bool ok = worst <= config.oracle_tolerance;
    json j        = {{"L", r.max_tier},
                     {"modes", r.bath.modes.size()},
                     {"ddo_count", r.ddo_count},
                     {"max_abs_diff", worst},
                     {"tolerance", config.oracle_tolerance},
                     {"agrees", ok},
                     {"prefactor", pure_dephasing_prefactor},
                     {"max_trace_error", r.max_trace_error},
                     {"max_hermiticity_defect", r.max_hermiticity_defect}};
    bundle.write("oracle_summary.json", j.dump(2) + "\n");
    bundle.commit();

    CommandStatus status;
    if (!ok)
    {
        status.converged = false;
        std::ostringstream msg;
        msg << "oracle: max |rho_01| deviation " << worst << " exceeds " << config.oracle_tolerance << " at L = "
            << r.max_tier;
        status.message = msg.str();
    }
    return status;
}

CommandStatus field_command(const RunConfig& config, const fs::path& out)
{
    if (!config.outputs.field)
        throw InputError("field: the config has no outputs.field section");
    OutputBundle bundle(out);

    std::optional<RunResult> run;
    if (!config.outputs.steady_state)
        run = simulate(config);
    const AnalysisReport a = analyse(config, run ? &run->final_state : nullptr);
    bundle.write("field.csv", to_text([&](std::ostream& os) { write_field_csv(os, *a.field); }));
    bundle.write("field_summary.json", analysis_json(a).dump(2) + "\n");
    bundle.commit();

    CommandStatus status;
    if (a.smoluchowski && !a.smoluchowski->conclusive)
    {
        status.converged = false;
        std::ostringstream msg;
        msg << "field: Smoluchowski balance inconclusive, discretization estimate "
            << a.smoluchowski->discretization << " exceeds " << config.outputs.field->smoluchowski_tolerance;
        status.message = msg.str();
    }
    return status;
}

CommandStatus sweep_command(const RunConfig& config, const fs::path& out, const std::vector<int>& l_sweep)
{
    if (!config.sweep)
        throw InputError("sweep: the config has no sweep section");
    const SweepConfig& sw = *config.sweep;

    std::vector<RunConfig> points;
    for (Real v : sw.values)
        points.push_back(with_parameter(config, sw.parameter, v));

    OutputBundle bundle(out);
    std::vector<fs::path> dirs;
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        char name[32];
        std::snprintf(name, sizeof(name), "point_%02zu", i);
        dirs.push_back(bundle.subdirectory(name));
    }

    // Independent points; each worker claims the next unclaimed one.
    std::vector<json> summaries(points.size());
    std::vector<CommandStatus> statuses(points.size());
    std::vector<std::exception_ptr> errors(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++)
        {
            try
            {
                OutputBundle point(dirs[i]);
                statuses[i] = run_into(point, points[i], l_sweep, &summaries[i]);
                point.commit();
            }
            catch (...)
            {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n_threads =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(points.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    json j;
    j["parameter"] = sw.parameter;
    j["values"]    = sw.values;
    j["points"]    = json::array();
    std::vector<Real> mean, ratio, skew, kurt;
    CommandStatus status;
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        const json& s = summaries[i];
        json p        = {{"value", sw.values[i]},
                         {"dir", dirs[i].filename().string()},
                         {"final", s.value("final", json::object())},
                         {"dominant_frequency", s.value("dominant_frequency", json(nullptr))}};
        if (s.contains("l_sweep"))
            p["l_sweep"] = s.at("l_sweep");
        j["points"].push_back(p);
        mean.push_back(json_real(s, "final", "F_mean"));
        ratio.push_back(json_real(s, "final", "sigma_ratio"));
        skew.push_back(std::abs(json_real(s, "final", "skewness")));
        kurt.push_back(std::abs(json_real(s, "final", "kurtosis")));
        if (!statuses[i].converged)
        {
            status.converged = false;
            status.message += (status.message.empty() ? "" : "; ") + dirs[i].filename().string() + ": " +
                              statuses[i].message;
        }
    }
    j["trends"] = {{"F_mean", trend(mean)},
                   {"sigma_ratio", trend(ratio)},
                   {"abs_skewness", trend(skew)},
                   {"abs_kurtosis", trend(kurt)}};
    j["assumptions"] = config.assumptions;
    bundle.write("sweep_summary.json", j.dump(2) + "\n");
    bundle.commit();
    return status;
}

} // namespace dqme

#include <dqme/hierarchy.hpp>

#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace dqme
{

MultiIndex::MultiIndex(std::initializer_list<int> occ) : m_occ(occ)
{
    for (int v : m_occ)
        if (v < 0)
            throw InputError("MultiIndex: occupations must be non-negative");
}

MultiIndex::MultiIndex(std::vector<int> occ) : m_occ(std::move(occ))
{
    for (int v : m_occ)
        if (v < 0)
            throw InputError("MultiIndex: occupations must be non-negative");
}

int MultiIndex::tier() const
{
    int n = 0;
    for (int v : m_occ)
        n += v;
    return n;
}

std::string MultiIndex::to_string() const
{
    std::ostringstream os;
    os << *this;
    return os.str();
}

std::ostream& operator<<(std::ostream& os, const MultiIndex& n)
{
    os << '(';
    for (int k = 0; k < n.modes(); ++k)
        os << (k ? "," : "") << n[k];
    return os << ')';
}

std::uint64_t hierarchy_size(int modes, int max_tier)
{
    // C(L+K, K) built as a running product C(L+j, j), exact at every step.
    constexpr auto cap = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t c = 1;
    for (int j = 1; j <= modes; ++j)
    {
        const auto num = static_cast<std::uint64_t>(max_tier + j);
        if (c > cap / num)
            return cap;
        c = c * num / static_cast<std::uint64_t>(j);
    }
    return c;
}

namespace
{

void check_sizing(int modes, int max_tier, std::uint64_t max_count)
{
    if (modes < 1)
        throw InputError("hierarchy: at least one mode is required");
    if (max_tier < 0)
        throw InputError("hierarchy: truncation tier must be non-negative");
    const auto count = hierarchy_size(modes, max_tier);
    if (count > max_count)
    {
        std::ostringstream msg;
        msg << "hierarchy: K = " << modes << ", L = " << max_tier << " gives " << count
            << " dissipaton density operators, above the limit of " << max_count
            << "; reduce the number of modes or the truncation tier";
        throw InputError(msg.str());
    }
}

// Compositions of `remaining` into the slots [k, K) in descending lex order.
void fill_tier(std::vector<int>& current, int k, int remaining, std::vector<MultiIndex>& out)
{
    const int K = static_cast<int>(current.size());
    if (k == K - 1)
    {
        current[static_cast<std::size_t>(k)] = remaining;
        out.emplace_back(current);
        return;
    }
    for (int v = remaining; v >= 0; --v)
    {
        current[static_cast<std::size_t>(k)] = v;
        fill_tier(current, k + 1, remaining - v, out);
    }
    current[static_cast<std::size_t>(k)] = 0;
}

} // namespace

std::vector<MultiIndex> enumerate_indices(int modes, int max_tier, std::uint64_t max_count)
{
    check_sizing(modes, max_tier, max_count);
    std::vector<MultiIndex> out;
    out.reserve(static_cast<std::size_t>(hierarchy_size(modes, max_tier)));
    std::vector<int> current(static_cast<std::size_t>(modes), 0);
    for (int n = 0; n <= max_tier; ++n)
        fill_tier(current, 0, n, out);
    return out;
}

std::optional<MultiIndex> raise(const MultiIndex& n, int k, int max_tier)
{
    if (k < 0 || k >= n.modes())
        throw InputError("raise: mode index out of range");
    if (n.tier() + 1 > max_tier)
        return std::nullopt;
    MultiIndex r = n;
    ++r[k];
    return r;
}

std::optional<MultiIndex> lower(const MultiIndex& n, int k)
{
    if (k < 0 || k >= n.modes())
        throw InputError("lower: mode index out of range");
    if (n[k] == 0)
        return std::nullopt;
    MultiIndex r = n;
    --r[k];
    return r;
}

MultiIndex conjugate_index(const MultiIndex& n, std::span<const int> bar)
{
    if (static_cast<int>(bar.size()) != n.modes())
        throw InputError("conjugate_index: pairing map has the wrong length");
    MultiIndex r(n.modes());
    for (int k = 0; k < n.modes(); ++k)
        r[bar[static_cast<std::size_t>(k)]] = n[k];
    return r;
}

//------------------------------------------------------------------------------
// HierarchyIndex
//------------------------------------------------------------------------------

HierarchyIndex::HierarchyIndex(int modes, int max_tier, std::uint64_t max_count)
    : m_modes(modes), m_max_tier(max_tier)
{
    const auto all = enumerate_indices(modes, max_tier, max_count);
    m_size         = static_cast<Index>(all.size());

    const int top = max_tier + modes;
    m_binomial.assign(static_cast<std::size_t>(top + 1), std::vector<std::uint64_t>(static_cast<std::size_t>(top + 1), 0));
    for (int a = 0; a <= top; ++a)
    {
        m_binomial[a][0] = 1;
        for (int b = 1; b <= a; ++b)
            m_binomial[a][b] = m_binomial[a - 1][b - 1] + (b <= a - 1 ? m_binomial[a - 1][b] : 0);
    }

    const auto K = static_cast<std::size_t>(modes);
    m_occ.resize(static_cast<std::size_t>(m_size) * K);
    m_tier.resize(static_cast<std::size_t>(m_size));
    m_tier_begin.assign(static_cast<std::size_t>(max_tier + 2), m_size);
    for (Index i = m_size - 1; i >= 0; --i)
    {
        const auto& n = all[static_cast<std::size_t>(i)];
        for (int k = 0; k < modes; ++k)
            m_occ[static_cast<std::size_t>(i) * K + static_cast<std::size_t>(k)] = n[k];
        m_tier[static_cast<std::size_t>(i)]             = n.tier();
        m_tier_begin[static_cast<std::size_t>(n.tier())] = i;
    }

    m_raise.resize(static_cast<std::size_t>(m_size) * K);
    m_lower.resize(static_cast<std::size_t>(m_size) * K);
    std::vector<int> work(K);
    for (Index i = 0; i < m_size; ++i)
    {
        for (int k = 0; k < modes; ++k)
            work[static_cast<std::size_t>(k)] = occupation(i, k);
        for (int k = 0; k < modes; ++k)
        {
            auto& slot = work[static_cast<std::size_t>(k)];
            ++slot;
            m_raise[static_cast<std::size_t>(i) * K + static_cast<std::size_t>(k)] = static_cast<std::int32_t>(position(work));
            slot -= 2;
            m_lower[static_cast<std::size_t>(i) * K + static_cast<std::size_t>(k)] =
                slot < 0 ? -1 : static_cast<std::int32_t>(position(work));
            ++slot;
        }
    }
}

MultiIndex HierarchyIndex::multi_index(Index i) const
{
    MultiIndex n(m_modes);
    for (int k = 0; k < m_modes; ++k)
        n[k] = occupation(i, k);
    return n;
}

Index HierarchyIndex::position(std::span<const int> occ) const
{
    if (static_cast<int>(occ.size()) != m_modes)
        throw InputError("HierarchyIndex: multi-index has the wrong number of modes");
    int n = 0;
    for (int v : occ)
    {
        if (v < 0)
            return -1;
        n += v;
    }
    if (n > m_max_tier)
        return -1;

    // Indices of lower tiers: C(n - 1 + K, K).
    std::uint64_t rank = n == 0 ? 0 : m_binomial[static_cast<std::size_t>(n - 1 + m_modes)][static_cast<std::size_t>(m_modes)];
    int remaining      = n;
    for (int k = 0; k + 1 < m_modes; ++k)
    {
        const int v     = occ[static_cast<std::size_t>(k)];
        const int slots = m_modes - k - 1;
        // Compositions with a larger value at k come first (hockey stick sum).
        if (remaining - v >= 1)
            rank += m_binomial[static_cast<std::size_t>(remaining - v - 1 + slots)][static_cast<std::size_t>(slots)];
        remaining -= v;
    }
    return static_cast<Index>(rank);
}

std::vector<Index> HierarchyIndex::conjugate_positions(std::span<const int> bar) const
{
    if (static_cast<int>(bar.size()) != m_modes)
        throw InputError("conjugate_positions: pairing map has the wrong length");
    std::vector<Index> out(static_cast<std::size_t>(m_size));
    std::vector<int> work(static_cast<std::size_t>(m_modes));
    for (Index i = 0; i < m_size; ++i)
    {
        for (int k = 0; k < m_modes; ++k)
            work[static_cast<std::size_t>(bar[static_cast<std::size_t>(k)])] = occupation(i, k);
        out[static_cast<std::size_t>(i)] = position(work);
    }
    return out;
}

std::uint64_t HierarchyIndex::ordering_hash() const
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix        = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b)
        {
            h ^= (v >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(m_modes));
    mix(static_cast<std::uint64_t>(m_max_tier));
    for (int v : m_occ)
        mix(static_cast<std::uint64_t>(v));
    return h;
}

//------------------------------------------------------------------------------
// DDOStore
//------------------------------------------------------------------------------

DDOStore::DDOStore(std::shared_ptr<const HierarchyIndex> index, Index dim)
    : m_index(std::move(index)), m_dim(dim), m_data(Vector::Zero(m_index->size() * dim * dim))
{
    if (dim < 1)
        throw InputError("DDOStore: system dimension must be positive");
}

Matrix DDOStore::at(const MultiIndex& n) const
{
    const Index i = m_index->position(n);
    if (i < 0)
        return Matrix::Zero(m_dim, m_dim);
    return (*this)[i];
}

DDOStore& DDOStore::operator+=(const DDOStore& other)
{
    if (other.m_data.size() != m_data.size())
        throw InputError("DDOStore: shape mismatch");
    m_data += other.m_data;
    return *this;
}

DDOStore& DDOStore::operator*=(Complex s)
{
    m_data *= s;
    return *this;
}

Real DDOStore::hermiticity_defect(std::span<const int> bar) const
{
    const auto conj = m_index->conjugate_positions(bar);
    Real worst      = 0.0;
    for (Index i = 0; i < size(); ++i)
        worst = std::max(worst, ((*this)[i].adjoint() - (*this)[conj[static_cast<std::size_t>(i)]]).norm());
    return worst;
}

Real DDOStore::trace_error() const { return std::abs(reduced().trace() - 1.0); }

std::pair<Real, Index> DDOStore::max_norm() const
{
    Real worst = 0.0;
    Index at   = 0;
    for (Index i = 0; i < size(); ++i)
    {
        const Real n = (*this)[i].norm();
        if (!(n <= worst)) // also catches NaN
        {
            worst = n;
            at    = i;
            if (std::isnan(n))
                break;
        }
    }
    return {worst, at};
}

//------------------------------------------------------------------------------
// Checkpoints
//------------------------------------------------------------------------------

void write_checkpoint(std::ostream& os, const DDOStore& store)
{
    const auto& idx = store.index();
    char buf[64];
    os << "dqme-checkpoint 1\n";
    os << "modes " << idx.modes() << "\n";
    os << "max_tier " << idx.max_tier() << "\n";
    os << "dim " << store.dim() << "\n";
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(idx.ordering_hash()));
    os << "ordering_hash " << buf << "\n";
    os << "count " << idx.size() << "\n";
    const Index block = store.dim() * store.dim();
    for (Index i = 0; i < idx.size(); ++i)
    {
        for (Index e = 0; e < block; ++e)
        {
            const Complex v = store.data()[i * block + e];
            std::snprintf(buf, sizeof(buf), "%.17g %.17g", v.real(), v.imag());
            os << (e ? " " : "") << buf;
        }
        os << "\n";
    }
}

DDOStore read_checkpoint(std::istream& is)
{
    auto expect = [&is](const char* key) {
        std::string word;
        if (!(is >> word) || word != key)
            throw InputError(std::string("checkpoint: expected '") + key + "'");
    };
    int version = 0, modes = 0, max_tier = 0;
    Index dim = 0, count = 0;
    std::string hash_text;
    expect("dqme-checkpoint");
    is >> version;
    if (version != 1)
        throw InputError("checkpoint: unsupported version");
    expect("modes");
    is >> modes;
    expect("max_tier");
    is >> max_tier;
    expect("dim");
    is >> dim;
    expect("ordering_hash");
    is >> hash_text;
    expect("count");
    is >> count;
    if (!is)
        throw InputError("checkpoint: malformed header");

    auto index = std::make_shared<const HierarchyIndex>(modes, max_tier);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(index->ordering_hash()));
    if (hash_text != buf)
        throw InputError("checkpoint: ordering hash mismatch");
    if (count != index->size())
        throw InputError("checkpoint: DDO count does not match the hierarchy");

    DDOStore store(index, dim);
    std::string token_re, token_im;
    for (Index e = 0; e < store.data().size(); ++e)
    {
        if (!(is >> token_re >> token_im))
            throw InputError("checkpoint: truncated data");
        store.data()[e] = Complex(std::strtod(token_re.c_str(), nullptr), std::strtod(token_im.c_str(), nullptr));
    }
    return store;
}

} // namespace dqme

#ifndef DQME_HIERARCHY_HPP
#define DQME_HIERARCHY_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <dqme/types.hpp>

namespace dqme
{

///
/// Bosonic occupation vector n = (n_1, ..., n_K) labelling one dissipaton
/// density operator. Mode indices are zero based.
///
class MultiIndex
{
public:
    MultiIndex() = default;
    explicit MultiIndex(int modes) : m_occ(static_cast<std::size_t>(modes), 0) {}
    MultiIndex(std::initializer_list<int> occ);
    explicit MultiIndex(std::vector<int> occ);

    int modes() const { return static_cast<int>(m_occ.size()); }
    int tier() const;
    int operator[](int k) const { return m_occ[static_cast<std::size_t>(k)]; }
    int& operator[](int k) { return m_occ[static_cast<std::size_t>(k)]; }
    std::span<const int> occupations() const { return m_occ; }

    bool operator==(const MultiIndex&) const = default;

    std::string to_string() const;

private:
    std::vector<int> m_occ;
};

std::ostream& operator<<(std::ostream& os, const MultiIndex& n);

/// Number of multi-indices over K modes with tier <= L, i.e. C(L+K, K).
/// Saturates at UINT64_MAX.
std::uint64_t hierarchy_size(int modes, int max_tier);

inline constexpr std::uint64_t default_max_hierarchy_size = 10'000'000;

/// All indices with tier <= L in graded order: tiers ascending, and within
/// a tier lexicographically descending, e.g. (00),(10),(01),(20),(11),(02).
std::vector<MultiIndex> enumerate_indices(int modes, int max_tier,
                                          std::uint64_t max_count = default_max_hierarchy_size);

/// n with n_k + 1, or nullopt when the tier would exceed L.
std::optional<MultiIndex> raise(const MultiIndex& n, int k, int max_tier);
/// n with n_k - 1, or nullopt when n_k = 0.
std::optional<MultiIndex> lower(const MultiIndex& n, int k);
/// Occupations permuted by the conjugate-pair map: result[bar[k]] = n[k].
MultiIndex conjugate_index(const MultiIndex& n, std::span<const int> bar);

///
/// Truncated hierarchy of multi-indices with O(1) neighbour lookup.
///
/// Positions are assigned by `enumerate_indices`; `raise`/`lower` return
/// the position of the neighbour or -1 when it is outside the truncation
/// (or has a negative occupation).
///
class HierarchyIndex
{
public:
    HierarchyIndex(int modes, int max_tier, std::uint64_t max_count = default_max_hierarchy_size);

    int modes() const { return m_modes; }
    int max_tier() const { return m_max_tier; }
    Index size() const { return m_size; }

    int occupation(Index i, int k) const { return m_occ[static_cast<std::size_t>(i * m_modes + k)]; }
    int tier(Index i) const { return m_tier[static_cast<std::size_t>(i)]; }
    MultiIndex multi_index(Index i) const;

    Index raise(Index i, int k) const { return m_raise[static_cast<std::size_t>(i * m_modes + k)]; }
    Index lower(Index i, int k) const { return m_lower[static_cast<std::size_t>(i * m_modes + k)]; }

    /// First position of tier n; tier_begin(L + 1) == size().
    Index tier_begin(int n) const { return m_tier_begin[static_cast<std::size_t>(n)]; }

    /// Position of an index, or -1 when its tier exceeds the truncation.
    Index position(std::span<const int> occupations) const;
    Index position(const MultiIndex& n) const { return position(n.occupations()); }

    /// Position of the conjugate index under the pairing map, for every i.
    std::vector<Index> conjugate_positions(std::span<const int> bar) const;

    /// FNV-1a over the enumeration, identifying (K, L, ordering).
    std::uint64_t ordering_hash() const;

private:
    int m_modes;
    int m_max_tier;
    Index m_size;
    std::vector<int> m_occ;
    std::vector<int> m_tier;
    std::vector<std::int32_t> m_raise;
    std::vector<std::int32_t> m_lower;
    std::vector<Index> m_tier_begin;
    // binomial[a][b] = C(a, b) for a <= L + K
    std::vector<std::vector<std::uint64_t>> m_binomial;
};

///
/// Dense storage of the dissipaton density operators rho_n, one dim x dim
/// complex matrix per multi-index, contiguous in enumeration order.
///
class DDOStore
{
public:
    using MatrixMap      = Eigen::Map<Matrix>;
    using ConstMatrixMap = Eigen::Map<const Matrix>;

    DDOStore() = default;
    DDOStore(std::shared_ptr<const HierarchyIndex> index, Index dim);

    const HierarchyIndex& index() const { return *m_index; }
    const std::shared_ptr<const HierarchyIndex>& index_ptr() const { return m_index; }
    Index dim() const { return m_dim; }
    Index size() const { return m_index ? m_index->size() : 0; }
    int modes() const { return m_index->modes(); }
    int max_tier() const { return m_index->max_tier(); }

    MatrixMap operator[](Index i) { return {m_data.data() + i * m_dim * m_dim, m_dim, m_dim}; }
    ConstMatrixMap operator[](Index i) const { return {m_data.data() + i * m_dim * m_dim, m_dim, m_dim}; }

    /// rho at a multi-index; zero matrix above the truncation.
    Matrix at(const MultiIndex& n) const;

    Vector& data() { return m_data; }
    const Vector& data() const { return m_data; }

    /// The reduced density matrix (tier 0).
    ConstMatrixMap reduced() const { return (*this)[0]; }

    void set_zero() { m_data.setZero(); }
    DDOStore& operator+=(const DDOStore& other);
    DDOStore& operator*=(Complex s);

    /// max_n || rho_n^dagger - rho_{conj(n)} ||_F
    Real hermiticity_defect(std::span<const int> bar) const;
    /// |tr rho_0 - 1|
    Real trace_error() const;
    /// Largest Frobenius norm and its position.
    std::pair<Real, Index> max_norm() const;

private:
    std::shared_ptr<const HierarchyIndex> m_index;
    Index m_dim = 0;
    Vector m_data;
};

///
/// Text checkpoint: header with K, L, dim, ordering hash, then one line per
/// DDO with the real and imaginary parts of its entries (column major) at
/// 17 significant digits, which round-trips doubles exactly.
///
void write_checkpoint(std::ostream& os, const DDOStore& store);
DDOStore read_checkpoint(std::istream& is);

} // namespace dqme

#endif

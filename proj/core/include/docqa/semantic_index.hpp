#pragma once

#include "docqa/corpus.hpp"
#include "docqa/gateway.hpp"
#include "docqa/ranking.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace docqa {

inline constexpr std::size_t kDefaultEmbeddingDim = 1024;

/// Unit-norm dense vector.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    /// L2-normalizes `values`. Throws ContractError for an all-zero or
    /// non-finite vector.
    static EmbeddingVector normalized(std::vector<float> values);
    /// Wraps values already known to be unit norm (persisted vectors).
    static EmbeddingVector from_unit(std::vector<float> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    explicit EmbeddingVector(std::vector<float> v) : values_(std::move(v)) {}
    std::vector<float> values_;
};

/// Inner product accumulated in double; equals the cosine for unit vectors.
/// Throws ArgumentError on dimension mismatch.
double cosine_sim(std::span<const float> q, std::span<const float> d);
inline double cosine_sim(const EmbeddingVector& q, const EmbeddingVector& d)
{
    return cosine_sim(q.values(), d.values());
}

struct PrefixConvention {
    std::string query = "query: ";
    std::string passage = "passage: ";
};

struct EmbedOptions {
    std::size_t dim = kDefaultEmbeddingDim;
    std::size_t batch_size = 32;
    /// 0 uses the client's own limit.
    std::size_t max_in_flight = 0;
    /// Prepended to every input text.
    std::string prefix;
};

/// One normalized vector per text, in input order, fetched in
/// ceil(n / batch_size) requests. Throws ArgumentError for empty input and
/// ContractError when the endpoint returns the wrong count or dimension.
/// Transport errors from the client propagate unchanged.
std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts, EmbeddingClient& client,
                                   const EmbedOptions& options = {});

/// Flat exact inner-product index. Immutable after construction.
class SemanticIndex {
public:
    explicit SemanticIndex(std::size_t dim = kDefaultEmbeddingDim) : dim_(dim) {}
    /// Throws ArgumentError if sizes or dimensions disagree.
    SemanticIndex(std::size_t dim, std::vector<PageRef> refs, const std::vector<EmbeddingVector>& vectors);

    /// Embeds every page's normalized text with the passage prefix.
    static SemanticIndex build(const Corpus& corpus, EmbeddingClient& client, const EmbedOptions& options = {},
                               const PrefixConvention& prefixes = {});

    /// Exact top-k by inner product, descending, ties by PageRef ascending.
    /// Throws ArgumentError when k == 0 or q has the wrong dimension.
    std::vector<RankedPage> search(const EmbeddingVector& q, std::size_t k) const;
    /// Every page scored, same order as search().
    std::vector<RankedPage> score_all(const EmbeddingVector& q) const;

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return refs_.size(); }
    const std::vector<PageRef>& page_refs() const noexcept { return refs_; }
    std::span<const float> vector(std::size_t i) const;

    void write(std::ostream& out) const;
    static SemanticIndex read(std::istream& in);

private:
    std::size_t dim_;
    std::vector<PageRef> refs_;
    std::vector<float> data_;  // row-major, size() * dim_
};

inline std::vector<RankedPage> search_semantic(const SemanticIndex& index, const EmbeddingVector& q, std::size_t k)
{
    return index.search(q, k);
}

inline constexpr std::uint32_t kSemanticFormatVersion = 1;

void save_semantic_index(const SemanticIndex& index, const std::filesystem::path& path);
SemanticIndex load_semantic_index(const std::filesystem::path& path);

}  // namespace docqa

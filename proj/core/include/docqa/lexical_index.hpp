#pragma once

#include "docqa/corpus.hpp"
#include "docqa/ranking.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace docqa {

struct LexicalOptions {
    std::size_t max_features = 50000;
    int n_min = 1;
    int n_max = 5;
};

/// 1 + ln(tf), for tf > 0.
double sublinear_tf(std::uint32_t tf);
/// ln((1 + N) / (1 + df)) + 1.
double smoothed_idf(std::size_t page_count, std::uint32_t df);

class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> features, std::vector<std::uint32_t> df);

    std::size_t size() const noexcept { return features_.size(); }
    std::optional<std::uint32_t> id(std::string_view feature) const;
    const std::string& feature(std::uint32_t id) const { return features_.at(id); }
    std::uint32_t df(std::uint32_t id) const { return df_.at(id); }
    const std::vector<std::string>& features() const noexcept { return features_; }

private:
    std::vector<std::string> features_;
    std::vector<std::uint32_t> df_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

/// (feature id, weight), sorted by id, L2 norm 1 unless empty.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

/// TF-IDF index over page n-gram features. Immutable after construction and
/// safe for concurrent scoring.
class LexicalIndex {
public:
    /// Throws ArgumentError when max_features is 0 or the n-gram range is invalid.
    static LexicalIndex build(const Corpus& corpus, const LexicalOptions& options = {});

    /// Cosine similarity of the query against every page, zero scores omitted,
    /// sorted by score descending then PageRef ascending.
    std::vector<RankedPage> score(std::string_view query_text) const;

    /// Normalized TF-IDF vector of arbitrary text against this vocabulary.
    SparseVector vectorize(std::string_view text) const;

    const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
    const LexicalOptions& options() const noexcept { return options_; }
    std::size_t page_count() const noexcept { return page_refs_.size(); }
    const std::vector<PageRef>& page_refs() const noexcept { return page_refs_; }
    const SparseVector& doc_vector(std::size_t page) const { return doc_vectors_.at(page); }

    void write(std::ostream& out) const;
    static LexicalIndex read(std::istream& in);

private:
    LexicalIndex(LexicalOptions options, Vocabulary vocabulary, std::vector<PageRef> refs,
                 std::vector<SparseVector> vectors);
    void build_postings();

    LexicalOptions options_;
    Vocabulary vocabulary_;
    std::vector<double> idf_;
    std::vector<PageRef> page_refs_;
    std::vector<SparseVector> doc_vectors_;
    // feature id -> (page position, weight)
    std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;
};

inline LexicalIndex build_lexical_index(const Corpus& corpus, const LexicalOptions& options = {})
{
    return LexicalIndex::build(corpus, options);
}

inline std::vector<RankedPage> score_lexical(const LexicalIndex& index, std::string_view query_text)
{
    return index.score(query_text);
}

inline constexpr std::uint32_t kLexicalFormatVersion = 1;

void save_lexical_index(const LexicalIndex& index, const std::filesystem::path& path);
LexicalIndex load_lexical_index(const std::filesystem::path& path);

}  // namespace docqa

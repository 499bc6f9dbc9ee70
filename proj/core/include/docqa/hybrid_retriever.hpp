#pragma once

#include "docqa/corpus.hpp"
#include "docqa/gateway.hpp"
#include "docqa/lexical_index.hpp"
#include "docqa/ranking.hpp"
#include "docqa/semantic_index.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace docqa {

/// Weights of the lexical and semantic scores; alpha + beta = 1.
struct FusionWeights {
    double alpha = 0.6;
    double beta = 0.4;

    /// Throws ArgumentError unless both are >= 0 and they sum to 1 within 1e-12.
    void validate() const;
};

/// Result-count bounds and the fused-score threshold that extends past top_m.
struct SelectionPolicy {
    std::size_t top_m = 3;
    std::size_t top_n = 7;
    double threshold = 0.3;

    /// Throws ArgumentError unless 1 <= top_m <= top_n and threshold in [0, 1].
    void validate() const;
};

struct ScoredPage {
    PageRef ref;
    double s_tfidf = 0.0;
    double s_semantic = 0.0;
    double s_final = 0.0;

    friend bool operator==(const ScoredPage&, const ScoredPage&) = default;
};

inline constexpr std::size_t kDefaultCandidateDepth = 50;

/// Fuses two ranked lists.
///
/// Candidates are the union of the first `candidate_k` entries of each list.
/// Each retriever's raw scores are min-max normalized over the candidates,
/// a candidate absent from a list having raw score 0; a list whose candidate
/// scores are all equal normalizes to 1.0, and an empty list contributes 0
/// everywhere. Output is sorted by s_final descending, then PageRef.
std::vector<ScoredPage> fuse(const std::vector<RankedPage>& lexical, const std::vector<RankedPage>& semantic,
                             const FusionWeights& weights, std::size_t candidate_k = kDefaultCandidateDepth);

/// Prefix of `ranked` of length min(top_n, max(top_m, #{s_final >= threshold})),
/// clamped to ranked.size(). `ranked` must be sorted by s_final descending.
std::vector<ScoredPage> select_adaptive(const std::vector<ScoredPage>& ranked, const SelectionPolicy& policy);

struct RetrievalOptions {
    FusionWeights weights;
    SelectionPolicy policy;
    std::size_t candidate_k = kDefaultCandidateDepth;
    PrefixConvention prefixes;
    /// Run lexical scoring and the query embedding concurrently.
    bool parallel = true;
};

struct RetrievalIndexes {
    const LexicalIndex* lexical = nullptr;
    /// Null disables the semantic retriever.
    const SemanticIndex* semantic = nullptr;
};

struct RetrievalResult {
    std::string query;
    std::vector<ScoredPage> pages;
    std::vector<std::string> warnings;
};

/// Lexical scoring, query embedding and exact semantic scoring, fusion, then
/// adaptive selection. `doc_id`, when set, restricts candidates to one
/// document. Embedding transport errors propagate.
RetrievalResult retrieve(const std::string& query_text, const RetrievalIndexes& indexes,
                         const RetrievalOptions& options, EmbeddingClient* embed_client,
                         const std::optional<std::string>& doc_id = std::nullopt);

nlohmann::json to_json(const ScoredPage& page);
/// {query, pages: [...], policy: {...}, weights: {...}}
nlohmann::json to_json(const RetrievalResult& result, const RetrievalOptions& options);

}  // namespace docqa

#include "docqa/hybrid_retriever.hpp"

#include "docqa/errors.hpp"
#include "docqa/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <set>

namespace docqa {

using nlohmann::json;

void FusionWeights::validate() const
{
    if (!(alpha >= 0.0) || !(beta >= 0.0) || std::abs(alpha + beta - 1.0) > 1e-12) {
        throw ArgumentError("fusion weights must be non-negative and sum to 1 (alpha=" + std::to_string(alpha) +
                            ", beta=" + std::to_string(beta) + ")");
    }
}

void SelectionPolicy::validate() const
{
    if (top_m < 1 || top_n < top_m) {
        throw ArgumentError("selection policy requires 1 <= top_m <= top_n");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ArgumentError("selection threshold must lie in [0, 1]");
    }
}

namespace {

std::vector<RankedPage> sorted_copy(const std::vector<RankedPage>& in)
{
    std::vector<RankedPage> out = in;
    sort_ranked(out);
    return out;
}

std::map<PageRef, double> min_max(const std::vector<RankedPage>& list, const std::set<PageRef>& candidates)
{
    std::map<PageRef, double> out;
    if (list.empty()) {
        for (const PageRef& r : candidates) {
            out[r] = 0.0;
        }
        return out;
    }
    std::map<PageRef, double> raw;
    for (const RankedPage& p : list) {
        raw.emplace(p.ref, p.score);
    }
    double lo = 0.0;
    double hi = 0.0;
    bool first = true;
    for (const PageRef& r : candidates) {
        const auto it = raw.find(r);
        const double s = it == raw.end() ? 0.0 : it->second;
        out[r] = s;
        lo = first ? s : std::min(lo, s);
        hi = first ? s : std::max(hi, s);
        first = false;
    }
    const double range = hi - lo;
    for (auto& [r, s] : out) {
        s = range > 0.0 ? (s - lo) / range : 1.0;
    }
    return out;
}

std::vector<RankedPage> restrict_to_doc(std::vector<RankedPage> list, const std::optional<std::string>& doc_id)
{
    if (doc_id) {
        std::erase_if(list, [&](const RankedPage& p) { return p.ref.doc_id != *doc_id; });
    }
    return list;
}

}  // namespace

std::vector<ScoredPage> fuse(const std::vector<RankedPage>& lexical, const std::vector<RankedPage>& semantic,
                             const FusionWeights& weights, std::size_t candidate_k)
{
    weights.validate();
    if (lexical.empty() && semantic.empty()) {
        return {};
    }
    const std::vector<RankedPage> lex = sorted_copy(lexical);
    const std::vector<RankedPage> sem = sorted_copy(semantic);

    std::set<PageRef> candidates;
    for (std::size_t i = 0; i < std::min(candidate_k, lex.size()); ++i) {
        candidates.insert(lex[i].ref);
    }
    for (std::size_t i = 0; i < std::min(candidate_k, sem.size()); ++i) {
        candidates.insert(sem[i].ref);
    }

    const auto lex_norm = min_max(lex, candidates);
    const auto sem_norm = min_max(sem, candidates);

    std::vector<ScoredPage> out;
    out.reserve(candidates.size());
    for (const PageRef& r : candidates) {
        ScoredPage p;
        p.ref = r;
        p.s_tfidf = lex_norm.at(r);
        p.s_semantic = sem_norm.at(r);
        p.s_final = weights.alpha * p.s_tfidf + weights.beta * p.s_semantic;
        out.push_back(std::move(p));
    }
    std::sort(out.begin(), out.end(), [](const ScoredPage& a, const ScoredPage& b) {
        if (a.s_final != b.s_final) {
            return a.s_final > b.s_final;
        }
        return a.ref < b.ref;
    });
    return out;
}

std::vector<ScoredPage> select_adaptive(const std::vector<ScoredPage>& ranked, const SelectionPolicy& policy)
{
    policy.validate();
    const auto above = static_cast<std::size_t>(std::count_if(
        ranked.begin(), ranked.end(), [&](const ScoredPage& p) { return p.s_final >= policy.threshold; }));
    const std::size_t take = std::min({policy.top_n, std::max(policy.top_m, above), ranked.size()});
    return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take)};
}

RetrievalResult retrieve(const std::string& query_text, const RetrievalIndexes& indexes,
                         const RetrievalOptions& options, EmbeddingClient* embed_client,
                         const std::optional<std::string>& doc_id)
{
    if (indexes.lexical == nullptr) {
        throw ArgumentError("retrieve requires a lexical index");
    }
    options.weights.validate();
    options.policy.validate();

    RetrievalResult result;
    result.query = query_text;
    const bool use_semantic = indexes.semantic != nullptr && embed_client != nullptr;

    const auto semantic_scores = [&]() -> std::vector<RankedPage> {
        if (!use_semantic) {
            return {};
        }
        EmbedOptions eo;
        eo.dim = indexes.semantic->dim();
        eo.batch_size = 1;
        eo.max_in_flight = 1;
        eo.prefix = options.prefixes.query;
        const auto q = embed({normalize_text(query_text)}, *embed_client, eo);
        return indexes.semantic->score_all(q.front());
    };

    std::vector<RankedPage> lex;
    std::vector<RankedPage> sem;
    if (options.parallel && use_semantic) {
        auto pending = std::async(std::launch::async, semantic_scores);
        lex = indexes.lexical->score(query_text);
        sem = pending.get();
    } else {
        lex = indexes.lexical->score(query_text);
        sem = semantic_scores();
    }
    lex = restrict_to_doc(std::move(lex), doc_id);
    sem = restrict_to_doc(std::move(sem), doc_id);

    if (lex.empty() && sem.empty()) {
        std::string warning = use_semantic ? "query matched no pages"
                                           : "query has no lexical features and semantic retrieval is disabled";
        spdlog::warn("retrieval for '{}': {}", query_text, warning);
        result.warnings.push_back(std::move(warning));
        return result;
    }
    result.pages = select_adaptive(fuse(lex, sem, options.weights, options.candidate_k), options.policy);
    return result;
}

json to_json(const ScoredPage& page)
{
    return {
        {"doc_id", page.ref.doc_id},
        {"page_index", page.ref.page_index},
        {"s_tfidf", page.s_tfidf},
        {"s_semantic", page.s_semantic},
        {"s_final", page.s_final},
    };
}

json to_json(const RetrievalResult& result, const RetrievalOptions& options)
{
    json pages = json::array();
    for (const ScoredPage& p : result.pages) {
        pages.push_back(to_json(p));
    }
    json out = {
        {"query", result.query},
        {"pages", std::move(pages)},
        {"policy",
         {{"top_m", options.policy.top_m}, {"top_n", options.policy.top_n}, {"threshold", options.policy.threshold}}},
        {"weights", {{"alpha", options.weights.alpha}, {"beta", options.weights.beta}}},
    };
    if (!result.warnings.empty()) {
        out["warnings"] = result.warnings;
    }
    return out;
}

}  // namespace docqa

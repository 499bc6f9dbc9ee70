#pragma once

#include "docqa/corpus.hpp"
#include "docqa/ensemble.hpp"
#include "docqa/hybrid_retriever.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace docqa {

/// One line of a question file:
/// {"id", "question", "options": [...], "answer"?, "doc_id"?, "category"?, "pages"?}
/// "answer" is a letter or a 0-based index; "pages" lists
/// {"doc_id", "page_index"} objects that bypass retrieval.
struct QuestionRecord {
    std::string id;
    std::string question;
    std::vector<std::string> options;
    std::optional<int> gold;
    std::optional<std::string> doc_id;
    std::optional<std::string> category;
    std::vector<PageRef> pages;
};

QuestionRecord question_from_json(const nlohmann::json& j);
nlohmann::json to_json(const QuestionRecord& q);
/// Throws ParseError with the 1-based line number.
std::vector<QuestionRecord> read_questions(std::istream& in);

struct VerdictRecord {
    std::string id;
    std::optional<char> chosen;
    double confidence = 0.0;
    std::map<char, std::size_t> votes;
    std::size_t responses_used = 0;
    bool stopped_early = false;
    bool tie_broken = false;
    std::vector<PageRef> context;
};

VerdictRecord verdict_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VerdictRecord& v);
std::vector<VerdictRecord> read_verdicts(std::istream& in);

struct InferenceOptions {
    bool use_retrieval = true;
    /// Pages handed over when retrieval is off: the first K of the
    /// question's document (or of the corpus).
    std::size_t context_pages = 3;
    RetrievalOptions retrieval;
    std::vector<DecodingConfig> schedule = make_schedule();
    EnsembleOptions ensemble;
};

/// Context pages for a question: explicit pages, retrieval, or the leading
/// pages when retrieval is disabled.
std::vector<ContextPage> gather_context(const QuestionRecord& q, const Corpus& corpus,
                                        const RetrievalIndexes& indexes, EmbeddingClient* embed_client,
                                        const InferenceOptions& options);

VerdictRecord answer_question(const QuestionRecord& q, const Corpus& corpus, const RetrievalIndexes& indexes,
                              EmbeddingClient* embed_client, GenerationClient& client,
                              const InferenceOptions& options);

// ---------------------------------------------------------------------------
// Evaluation

/// "Y/N", "Fact.", "Num" or "other".
std::string canonical_category(const std::optional<std::string>& tag);

struct CategoryScore {
    std::size_t total = 0;
    std::size_t correct = 0;

    double accuracy() const noexcept { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct EvaluationReport {
    CategoryScore overall;
    std::map<std::string, CategoryScore> by_category;
    std::size_t abstained = 0;
    std::size_t missing = 0;
};

/// Scores verdicts against gold answers. A missing verdict or an abstention
/// counts as wrong. Throws ArgumentError for a question without a gold
/// answer or a verdict whose id matches no question.
EvaluationReport evaluate(const std::vector<QuestionRecord>& questions, const std::vector<VerdictRecord>& verdicts);
nlohmann::json to_json(const EvaluationReport& report);

}  // namespace docqa

#pragma once

#include "docqa/corpus.hpp"
#include "docqa/gateway.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace docqa {

enum class QuestionType {
    comparative,
    computational,
    conditional,
    causal,
    comprehensive,
};

inline constexpr std::array<QuestionType, 5> kAllQuestionTypes = {
    QuestionType::comparative, QuestionType::computational, QuestionType::conditional,
    QuestionType::causal,      QuestionType::comprehensive,
};

std::string_view to_string(QuestionType type);
/// Throws ArgumentError for an unknown name.
QuestionType parse_question_type(std::string_view name);

// ---------------------------------------------------------------------------
// Page selection

struct PageSelectionOptions {
    std::size_t min_chars = 200;
    double max_toc_density = 0.5;
    double numeric_weight = 5.0;
    /// Middle-page preference: weight = 1 - |2i/(P-1) - 1| * depth.
    double middle_depth = 0.5;
    std::uint64_t seed = 0;
};

struct PageScore {
    PageRef ref;
    double richness = 0.0;
    double middle_weight = 1.0;
    double final_score = 0.0;
};

/// Fraction of non-blank raw lines ending in a digit.
double toc_marker_density(std::string_view raw_text);
double middle_weight(std::size_t page_index, std::size_t pages_in_doc, double depth);

/// Scores of the pages that survive the cover / short-page / TOC filters, in corpus order.
std::vector<PageScore> score_pages(const Corpus& corpus, const PageSelectionOptions& options = {});

/// Stratified selection. Eligible pages are bucketed into `quota` strata by
/// relative position within their document (page_index / pages_in_doc);
/// strata are visited round-robin, each yielding its best remaining page
/// (final score descending, seeded hash, PageRef). When fewer pages are
/// eligible than requested, all of them are returned and a warning logged.
/// Throws ArgumentError when quota == 0.
std::vector<PageRef> select_pages(const Corpus& corpus, std::size_t quota, const PageSelectionOptions& options = {});

// ---------------------------------------------------------------------------
// Prompts

enum class PromptKind {
    ocr_enhance,
    feasibility,
    generate_qtype,
};

/// Throws ArgumentError for an unknown name.
PromptKind parse_prompt_kind(std::string_view name);

using PromptContext = std::map<std::string, std::string>;

/// UTF-8 templates with {{name}} placeholders, one file per kind:
/// ocr_enhance.txt, feasibility.txt and generate_<qtype>.txt.
class PromptTemplates {
public:
    explicit PromptTemplates(std::filesystem::path directory);

    /// Throws ConfigError if the template file is missing, ArgumentError if
    /// generate_qtype lacks a type or a placeholder has no value.
    std::string build(PromptKind kind, const PromptContext& context,
                      std::optional<QuestionType> qtype = std::nullopt) const;

    const std::filesystem::path& directory() const noexcept { return directory_; }

    static std::string render(std::string_view tmpl, const PromptContext& context);

private:
    std::filesystem::path directory_;
};

/// Template directory installed with the library (or the source tree's copy).
std::filesystem::path default_template_dir();

// ---------------------------------------------------------------------------
// Candidates, parsing and gates

struct QACandidate {
    std::string question;
    std::vector<std::string> options;
    int answer_index = 0;
    QuestionType qtype = QuestionType::comprehensive;
    PageRef source_page;
    std::string evidence;

    friend bool operator==(const QACandidate&, const QACandidate&) = default;
};

struct FeasibilityVerdict {
    std::string reasoning;
    bool answerable = false;
    std::string answer;
    std::string evidence;
};

struct GateThresholds {
    std::size_t min_question_chars = 10;
    std::size_t max_question_chars = 300;
    std::size_t min_clauses = 2;
    double answer_support_overlap = 0.2;
    double max_option_length_ratio = 5.0;
    double dedup_jaccard = 0.8;
    std::size_t min_reasoning_chars = 30;
    double evidence_overlap = 0.5;
};

enum class Gate {
    length,
    complexity,
    answer_support,
    option_quality,
    dedup,
};

std::string_view to_string(Gate gate);

struct GateReport {
    bool length = false;
    bool complexity = false;
    bool answer_support = false;
    bool option_quality = false;
    bool dedup = false;

    bool overall() const noexcept { return length && complexity && answer_support && option_quality && dedup; }
    std::vector<Gate> failures() const;
};

/// Set of content-token texts of normalized `text`.
std::set<std::string> token_set(std::string_view text);
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);
/// |part ∩ whole| / |part|, 0 for an empty part.
double containment(const std::set<std::string>& part, const std::set<std::string>& whole);

/// Parses a generated question. Accepts a JSON object, optionally fenced or
/// surrounded by prose, with "question", "options", "answer_index" and
/// "evidence". Throws ParseError.
QACandidate parse_generated_qa(std::string_view model_output, QuestionType qtype, PageRef source);

/// Extracts the REASONING / ANSWERABLE / ANSWER / EVIDENCE sections
/// (English or Japanese labels, any case, markdown decoration tolerated).
/// Throws ParseError when a section is missing or the answerability token
/// is not recognised.
FeasibilityVerdict parse_feasibility(std::string_view model_output);

/// Reasoning long enough, answerable, answer naming exactly one option and
/// that option being the candidate's answer, evidence tokens mostly present
/// in the page.
bool validate_feasibility(const FeasibilityVerdict& verdict, const QACandidate& qa, std::string_view page_text,
                          const GateThresholds& thresholds = {});

/// Verdict built without a model: the claimed option must be supported by
/// the page and the candidate's own evidence is reused.
FeasibilityVerdict lexical_feasibility(const QACandidate& qa, std::string_view page_text,
                                       const GateThresholds& thresholds = {});

bool dedup_gate(const QACandidate& candidate, std::span<const QACandidate> accepted,
                const GateThresholds& thresholds = {});

GateReport run_gates(const QACandidate& candidate, std::span<const QACandidate> accepted, std::string_view page_text,
                     const GateThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// OCR enhancement

/// Removes code fences and trailing spaces, normalizes heading markers and
/// collapses blank-line runs.
std::string postprocess_ocr(std::string_view model_output);

std::string enhance_ocr(const PageRecord& record, GenerationClient& client, const PromptTemplates& templates,
                        int max_tokens = 4096);

// ---------------------------------------------------------------------------
// Pipeline

struct AugmentOptions {
    PageSelectionOptions selection;
    GateThresholds gates;
    std::vector<QuestionType> per_page_types{kAllQuestionTypes.begin(), kAllQuestionTypes.end()};
    std::size_t options_per_question = 4;
    std::size_t max_in_flight = 4;
    /// Skip the model round-trip for feasibility.
    bool lexical_feasibility = false;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::uint64_t seed = 0;
};

struct AuditRecord {
    std::size_t candidate_index = 0;
    PageRef page;
    QuestionType qtype = QuestionType::comprehensive;
    /// transport | parse | gate | feasibility_parse | feasibility
    std::string stage;
    /// Gate name for stage "gate", otherwise a message.
    std::string reason;
    std::vector<std::string> failed_gates;
    std::string question;
};

struct AugmentResult {
    std::vector<QACandidate> accepted;
    std::vector<AuditRecord> audit;
    std::size_t generated = 0;
};

/// Page selection, one generation per (page, type), parsing, gates and
/// feasibility validation. Model calls run concurrently; acceptance and the
/// dedup check happen in task order so the result is deterministic.
AugmentResult augment(const Corpus& corpus, GenerationClient& client, const PromptTemplates& templates,
                      std::size_t quota, const AugmentOptions& options = {});

nlohmann::json to_json(const QACandidate& qa);
QACandidate qa_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AuditRecord& record);

}  // namespace docqa

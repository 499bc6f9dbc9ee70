#include "docqa/augmentation.hpp"

#include "docqa/errors.hpp"
#include "docqa/hashing.hpp"
#include "docqa/text.hpp"
#include "docqa/tokenizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace docqa {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kTypeNames = {
    "comparative", "computational", "conditional", "causal", "comprehensive",
};

constexpr std::array<std::string_view, 5> kGateNames = {
    "length", "complexity", "answer_support", "option_quality", "dedup",
};

std::string ascii_lower(std::string_view s)
{
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
    }
    return out;
}

/// Normalized, ASCII-lowercased comparison key.
std::string fold(std::string_view s)
{
    return ascii_lower(normalize_text(s));
}

bool is_ascii_alnum(char c)
{
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read prompt template " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::set<std::string> number_set(std::string_view raw)
{
    std::set<std::string> out;
    for (const Token& t : tokenize(normalize_text(raw))) {
        if (t.kind == TokenKind::number) {
            out.insert(t.text);
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(QuestionType type)
{
    return kTypeNames.at(static_cast<std::size_t>(type));
}

QuestionType parse_question_type(std::string_view name)
{
    const std::string key = ascii_lower(text::trim(name));
    for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
        if (kTypeNames[i] == key) {
            return static_cast<QuestionType>(i);
        }
    }
    throw ArgumentError("unknown question type '" + std::string(name) + "'");
}

std::string_view to_string(Gate gate)
{
    return kGateNames.at(static_cast<std::size_t>(gate));
}

std::vector<Gate> GateReport::failures() const
{
    std::vector<Gate> out;
    if (!length) out.push_back(Gate::length);
    if (!complexity) out.push_back(Gate::complexity);
    if (!answer_support) out.push_back(Gate::answer_support);
    if (!option_quality) out.push_back(Gate::option_quality);
    if (!dedup) out.push_back(Gate::dedup);
    return out;
}

// ---------------------------------------------------------------------------
// Page selection

double toc_marker_density(std::string_view raw_text)
{
    std::size_t lines = 0;
    std::size_t marked = 0;
    for (std::string_view line : text::split_lines(raw_text)) {
        const std::string norm = normalize_text(line);
        if (norm.empty()) {
            continue;
        }
        ++lines;
        if (norm.back() >= '0' && norm.back() <= '9') {
            ++marked;
        }
    }
    return lines == 0 ? 0.0 : static_cast<double>(marked) / static_cast<double>(lines);
}

double middle_weight(std::size_t page_index, std::size_t pages_in_doc, double depth)
{
    if (pages_in_doc <= 1) {
        return 1.0;
    }
    const double rel = 2.0 * static_cast<double>(page_index) / static_cast<double>(pages_in_doc - 1) - 1.0;
    return 1.0 - std::abs(rel) * depth;
}

std::vector<PageScore> score_pages(const Corpus& corpus, const PageSelectionOptions& options)
{
    std::vector<PageScore> out;
    for (const Page& p : corpus.pages()) {
        if (p.page_index == 0 || p.char_count < options.min_chars ||
            toc_marker_density(p.raw_text) > options.max_toc_density) {
            continue;
        }
        PageScore s;
        s.ref = p.ref();
        s.richness = static_cast<double>(p.char_count) + options.numeric_weight * static_cast<double>(p.numeric_token_count);
        s.middle_weight = middle_weight(p.page_index, corpus.pages_in_doc(p.doc_id), options.middle_depth);
        s.final_score = s.richness * s.middle_weight;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<PageRef> select_pages(const Corpus& corpus, std::size_t quota, const PageSelectionOptions& options)
{
    if (quota == 0) {
        throw ArgumentError("page quota must be at least 1");
    }
    const std::vector<PageScore> scores = score_pages(corpus, options);
    if (scores.size() < quota) {
        spdlog::warn("page quota {} exceeds the {} eligible pages; selecting all of them", quota, scores.size());
    }

    const std::size_t strata = quota;
    std::vector<std::vector<const PageScore*>> buckets(strata);
    for (const PageScore& s : scores) {
        const std::size_t pages = corpus.pages_in_doc(s.ref.doc_id);
        const std::size_t k = std::min(strata - 1, s.ref.page_index * strata / pages);
        buckets[k].push_back(&s);
    }
    const auto tie = [&](const PageRef& r) {
        const std::string key = to_string(r);
        return splitmix64(options.seed ^ fnv1a64(key));
    };
    for (auto& b : buckets) {
        std::sort(b.begin(), b.end(), [&](const PageScore* x, const PageScore* y) {
            if (x->final_score != y->final_score) {
                return x->final_score > y->final_score;
            }
            const auto hx = tie(x->ref);
            const auto hy = tie(y->ref);
            if (hx != hy) {
                return hx < hy;
            }
            return x->ref < y->ref;
        });
    }

    std::vector<PageRef> out;
    const std::size_t target = std::min(quota, scores.size());
    for (std::size_t round = 0; out.size() < target; ++round) {
        for (const auto& b : buckets) {
            if (round < b.size() && out.size() < target) {
                out.push_back(b[round]->ref);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompts

PromptKind parse_prompt_kind(std::string_view name)
{
    const std::string key = ascii_lower(text::trim(name));
    if (key == "ocr_enhance") return PromptKind::ocr_enhance;
    if (key == "feasibility") return PromptKind::feasibility;
    if (key == "generate_qtype" || key == "generate") return PromptKind::generate_qtype;
    throw ArgumentError("unknown prompt kind '" + std::string(name) + "'");
}

PromptTemplates::PromptTemplates(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::string PromptTemplates::render(std::string_view tmpl, const PromptContext& context)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        const std::size_t close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const std::string name(text::trim(tmpl.substr(open + 2, close - open - 2)));
        const auto it = context.find(name);
        if (it == context.end()) {
            throw ArgumentError("prompt placeholder '" + name + "' has no value");
        }
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

std::string PromptTemplates::build(PromptKind kind, const PromptContext& context,
                                   std::optional<QuestionType> qtype) const
{
    std::string file;
    switch (kind) {
    case PromptKind::ocr_enhance:
        file = "ocr_enhance.txt";
        break;
    case PromptKind::feasibility:
        file = "feasibility.txt";
        break;
    case PromptKind::generate_qtype:
        if (!qtype) {
            throw ArgumentError("generate_qtype prompt needs a question type");
        }
        file = "generate_" + std::string(to_string(*qtype)) + ".txt";
        break;
    default:
        throw ArgumentError("unknown prompt kind");
    }
    const auto path = directory_ / file;
    if (!std::filesystem::is_regular_file(path)) {
        throw ConfigError("missing prompt template " + path.string());
    }
    return render(read_file(path), context);
}

std::filesystem::path default_template_dir()
{
    if (const char* env = std::getenv("DOCQA_TEMPLATE_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
#ifdef DOCQA_INSTALLED_TEMPLATE_DIR
    if (std::filesystem::is_directory(DOCQA_INSTALLED_TEMPLATE_DIR)) {
        return DOCQA_INSTALLED_TEMPLATE_DIR;
    }
#endif
#ifdef DOCQA_SOURCE_TEMPLATE_DIR
    return DOCQA_SOURCE_TEMPLATE_DIR;
#else
    return "templates";
#endif
}

// ---------------------------------------------------------------------------
// Token-set measures

std::set<std::string> token_set(std::string_view raw)
{
    std::set<std::string> out;
    for (Token& t : content_tokens(normalize_text(raw))) {
        out.insert(std::move(t.text));
    }
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b)
{
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    for (const auto& s : a) {
        common += b.count(s);
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double containment(const std::set<std::string>& part, const std::set<std::string>& whole)
{
    if (part.empty()) {
        return 0.0;
    }
    std::size_t common = 0;
    for (const auto& s : part) {
        common += whole.count(s);
    }
    return static_cast<double>(common) / static_cast<double>(part.size());
}

// ---------------------------------------------------------------------------
// Generated QA

QACandidate parse_generated_qa(std::string_view model_output, QuestionType qtype, PageRef source)
{
    const std::size_t open = model_output.find('{');
    const std::size_t close = model_output.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        throw ParseError(0, "generated output holds no JSON object");
    }
    const json j = json::parse(model_output.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError(0, "generated output is not valid JSON");
    }

    QACandidate qa;
    qa.qtype = qtype;
    qa.source_page = std::move(source);
    if (!j.contains("question") || !j["question"].is_string()) {
        throw ParseError(0, "generated QA lacks a question string");
    }
    qa.question = std::string(text::trim(j["question"].get<std::string>()));
    if (!j.contains("options") || !j["options"].is_array()) {
        throw ParseError(0, "generated QA lacks an options array");
    }
    for (const auto& o : j["options"]) {
        if (!o.is_string()) {
            throw ParseError(0, "generated option is not a string");
        }
        qa.options.emplace_back(text::trim(o.get<std::string>()));
    }
    if (j.contains("answer_index") && j["answer_index"].is_number_integer()) {
        qa.answer_index = j["answer_index"].get<int>();
    } else if (j.contains("answer") && j["answer"].is_string()) {
        const std::string a = fold(j["answer"].get<std::string>());
        if (a.size() != 1 || a[0] < 'a' || a[0] > 'z') {
            throw ParseError(0, "generated answer is not an option letter");
        }
        qa.answer_index = a[0] - 'a';
    } else {
        throw ParseError(0, "generated QA lacks an answer_index");
    }
    if (j.contains("evidence") && j["evidence"].is_string()) {
        qa.evidence = std::string(text::trim(j["evidence"].get<std::string>()));
    }
    return qa;
}

// ---------------------------------------------------------------------------
// Feasibility

namespace {

enum class Section { reasoning, answerable, answer, evidence };

struct Alias {
    std::string_view text;
    Section section;
};

// Longer aliases first so "answerable" is not read as "answer".
constexpr std::array<Alias, 17> kAliases = {{
    {"answerability", Section::answerable},
    {"answerable", Section::answerable},
    {"reasoning", Section::reasoning},
    {"evidence", Section::evidence},
    {"answer", Section::answer},
    {"reason", Section::reasoning},
    {"回答可能性", Section::answerable},
    {"解答可能性", Section::answerable},
    {"回答可能", Section::answerable},
    {"解答可能", Section::answerable},
    {"推論", Section::reasoning},
    {"理由", Section::reasoning},
    {"根拠", Section::evidence},
    {"証拠", Section::evidence},
    {"回答", Section::answer},
    {"解答", Section::answer},
    {"答え", Section::answer},
}};

/// Advances past ASCII characters in `chars` and the CJK brackets 【】「」.
std::size_t skip_chars(std::string_view s, std::size_t pos, std::string_view chars)
{
    constexpr std::array<std::string_view, 4> brackets = {"【", "】", "「", "」"};
    for (;;) {
        if (pos < s.size() && chars.find(s[pos]) != std::string_view::npos) {
            ++pos;
            continue;
        }
        const auto b = std::find_if(brackets.begin(), brackets.end(),
                                    [&](std::string_view g) { return s.substr(pos).starts_with(g); });
        if (b == brackets.end()) {
            return pos;
        }
        pos += b->size();
    }
}

struct LabelHit {
    Section section;
    std::string inline_content;
};

std::optional<LabelHit> match_label(const std::string& norm)
{
    const std::string low = ascii_lower(norm);
    std::size_t pos = skip_chars(low, 0, "#*->_[ ");
    std::size_t digits = pos;
    while (digits < low.size() && low[digits] >= '0' && low[digits] <= '9') {
        ++digits;
    }
    if (digits > pos && digits < low.size() && (low[digits] == '.' || low[digits] == ')')) {
        pos = skip_chars(low, digits + 1, "*_ ");
    }
    for (const Alias& a : kAliases) {
        if (!std::string_view(low).substr(pos).starts_with(a.text)) {
            continue;
        }
        std::size_t rest = pos + a.text.size();
        if (rest < low.size() && is_ascii_alnum(low[rest])) {
            continue;
        }
        rest = skip_chars(low, rest, "*_] ");
        if (rest == low.size()) {
            return LabelHit{a.section, {}};
        }
        if (low[rest] != ':') {
            return std::nullopt;
        }
        rest = skip_chars(low, rest + 1, "*_ ");
        return LabelHit{a.section, norm.substr(rest)};
    }
    return std::nullopt;
}

bool word_prefix(std::string_view s, std::string_view word)
{
    if (!s.starts_with(word)) {
        return false;
    }
    const bool ascii = static_cast<unsigned char>(word.front()) < 0x80;
    return !ascii || s.size() == word.size() || !is_ascii_alnum(s[word.size()]);
}

std::optional<bool> parse_yes_no(std::string_view content)
{
    const std::string low = ascii_lower(content);
    const std::size_t pos = skip_chars(low, 0, "*_[(\"' ");
    const std::string_view s = std::string_view(low).substr(pos);
    // Negatives first: "不可能" also contains "可能".
    for (std::string_view n : {"no", "false", "unanswerable", "not answerable", "いいえ", "回答不可", "解答不可",
                               "不可能", "不可", "できない", "否"}) {
        if (word_prefix(s, n)) {
            return false;
        }
    }
    for (std::string_view y : {"yes", "true", "answerable", "はい", "回答可能", "解答可能", "可能", "できる", "是"}) {
        if (word_prefix(s, y)) {
            return true;
        }
    }
    return std::nullopt;
}

std::string join_lines(const std::vector<std::string>& lines)
{
    std::string out;
    for (const auto& l : lines) {
        if (l.empty()) {
            continue;
        }
        if (!out.empty()) {
            out += '\n';
        }
        out += l;
    }
    return out;
}

/// Option indexes the free-form answer refers to.
std::vector<int> matched_options(std::string_view answer, const std::vector<std::string>& options)
{
    std::string a = fold(answer);
    const std::size_t start = skip_chars(a, 0, "*_\"'( ");
    a = a.substr(start);
    while (!a.empty() && (a.back() == '.' || a.back() == '*' || a.back() == '"' || a.back() == '\'')) {
        a.pop_back();
    }
    for (std::string_view prefix : {"option ", "選択肢"}) {
        if (a.starts_with(prefix)) {
            a = std::string(text::trim(a.substr(prefix.size())));
        }
    }

    std::vector<int> out;
    for (std::size_t i = 0; i < options.size() && i < 26; ++i) {
        const std::string opt = fold(options[i]);
        const char label = static_cast<char>('a' + i);
        bool hit = !opt.empty() && a == opt;
        if (!hit && !a.empty() && a[0] == label) {
            const std::string_view tail(a.data() + 1, a.size() - 1);
            if (tail.empty() || tail == ")") {
                hit = true;
            } else if (tail[0] == '.' || tail[0] == ')' || tail[0] == ':') {
                const std::string_view rest = text::trim(tail.substr(1));
                hit = rest.empty() || rest == opt;
            }
        }
        if (hit) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

}  // namespace

FeasibilityVerdict parse_feasibility(std::string_view model_output)
{
    std::map<Section, std::vector<std::string>> sections;
    std::optional<Section> current;
    std::set<Section> seen;
    for (std::string_view line : text::split_lines(model_output)) {
        const std::string norm = normalize_text(line);
        if (norm.starts_with("```")) {
            continue;
        }
        if (auto hit = match_label(norm)) {
            if (seen.count(hit->section) != 0) {
                current.reset();  // first occurrence wins
                continue;
            }
            seen.insert(hit->section);
            current = hit->section;
            sections[hit->section].push_back(std::move(hit->inline_content));
            continue;
        }
        if (current) {
            sections[*current].push_back(norm);
        }
    }

    const auto need = [&](Section s, std::string_view name) {
        if (seen.count(s) == 0) {
            throw ParseError(0, "feasibility output lacks the " + std::string(name) + " section");
        }
        return join_lines(sections[s]);
    };
    FeasibilityVerdict v;
    v.reasoning = need(Section::reasoning, "reasoning");
    const std::string answerable = need(Section::answerable, "answerability");
    v.answer = need(Section::answer, "answer");
    v.evidence = need(Section::evidence, "evidence");
    const auto yn = parse_yes_no(answerable);
    if (!yn) {
        throw ParseError(0, "unrecognised answerability token '" + answerable + "'");
    }
    v.answerable = *yn;
    if (v.answerable && v.answer.empty()) {
        throw ParseError(0, "answerable verdict without an answer");
    }
    return v;
}

bool validate_feasibility(const FeasibilityVerdict& verdict, const QACandidate& qa, std::string_view page_text,
                          const GateThresholds& thresholds)
{
    if (text::code_point_length(normalize_text(verdict.reasoning)) < thresholds.min_reasoning_chars) {
        return false;
    }
    if (!verdict.answerable) {
        return false;
    }
    const auto matches = matched_options(verdict.answer, qa.options);
    if (matches.size() != 1 || matches.front() != qa.answer_index) {
        return false;
    }
    return containment(token_set(verdict.evidence), token_set(page_text)) >= thresholds.evidence_overlap;
}

FeasibilityVerdict lexical_feasibility(const QACandidate& qa, std::string_view page_text,
                                       const GateThresholds& thresholds)
{
    FeasibilityVerdict v;
    if (qa.answer_index < 0 || static_cast<std::size_t>(qa.answer_index) >= qa.options.size()) {
        v.reasoning = "The claimed answer index does not name an option.";
        return v;
    }
    const std::string& option = qa.options[static_cast<std::size_t>(qa.answer_index)];
    const auto page = token_set(page_text);
    const double support = containment(token_set(option), page);
    v.reasoning = "Lexical check: " + std::to_string(support) + " of the answer option's tokens occur on the page.";
    v.answerable = support >= thresholds.answer_support_overlap;
    v.answer = option;
    v.evidence = qa.evidence.empty() ? option : qa.evidence;
    return v;
}

// ---------------------------------------------------------------------------
// Gates

bool dedup_gate(const QACandidate& candidate, std::span<const QACandidate> accepted, const GateThresholds& thresholds)
{
    const auto mine = token_set(candidate.question);
    return std::none_of(accepted.begin(), accepted.end(), [&](const QACandidate& a) {
        return jaccard(mine, token_set(a.question)) >= thresholds.dedup_jaccard;
    });
}

namespace {

bool length_gate(const QACandidate& c, const GateThresholds& t)
{
    const std::size_t n = text::code_point_length(normalize_text(c.question));
    return n >= t.min_question_chars && n <= t.max_question_chars;
}

bool complexity_gate(const QACandidate& c, const GateThresholds& t)
{
    const std::string q = normalize_text(c.question);
    for (const Token& tok : tokenize(q)) {
        if (tok.kind == TokenKind::number) {
            return true;
        }
    }
    std::size_t clauses = 0;
    std::u32string segment;
    const auto flush = [&] {
        if (!content_tokens(text::encode_utf8(segment)).empty()) {
            ++clauses;
        }
        segment.clear();
    };
    for (char32_t cp : text::decode_utf8(q)) {
        switch (cp) {
        case U',': case U';': case U':': case U'?': case U'!': case U'.':
        case U'、': case U'。': case U'・':
            flush();
            break;
        default:
            segment.push_back(cp);
        }
    }
    flush();
    return clauses >= t.min_clauses;
}

bool answer_support_gate(const QACandidate& c, const std::set<std::string>& page_tokens, std::string_view page_text,
                         const GateThresholds& t)
{
    if (c.answer_index < 0 || static_cast<std::size_t>(c.answer_index) >= c.options.size()) {
        return false;
    }
    const std::string& option = c.options[static_cast<std::size_t>(c.answer_index)];
    if (containment(token_set(option), page_tokens) >= t.answer_support_overlap) {
        return true;
    }
    const auto numbers = number_set(option);
    if (numbers.empty()) {
        return false;
    }
    const auto page_numbers = number_set(page_text);
    return std::all_of(numbers.begin(), numbers.end(), [&](const std::string& n) { return page_numbers.count(n) != 0; });
}

bool option_quality_gate(const QACandidate& c, const GateThresholds& t)
{
    if (c.options.size() != 4 && c.options.size() != 10) {
        return false;
    }
    if (c.answer_index < 0 || static_cast<std::size_t>(c.answer_index) >= c.options.size()) {
        return false;
    }
    std::set<std::string> keys;
    std::size_t shortest = SIZE_MAX;
    std::size_t longest = 0;
    for (const auto& o : c.options) {
        const std::string key = fold(o);
        if (key.empty() || !keys.insert(key).second) {
            return false;
        }
        const std::size_t n = text::code_point_length(key);
        shortest = std::min(shortest, n);
        longest = std::max(longest, n);
    }
    return static_cast<double>(longest) <= t.max_option_length_ratio * static_cast<double>(shortest);
}

}  // namespace

GateReport run_gates(const QACandidate& candidate, std::span<const QACandidate> accepted, std::string_view page_text,
                     const GateThresholds& thresholds)
{
    GateReport r;
    r.length = length_gate(candidate, thresholds);
    r.complexity = complexity_gate(candidate, thresholds);
    r.answer_support = answer_support_gate(candidate, token_set(page_text), page_text, thresholds);
    r.option_quality = option_quality_gate(candidate, thresholds);
    r.dedup = dedup_gate(candidate, accepted, thresholds);
    return r;
}

// ---------------------------------------------------------------------------
// OCR enhancement

std::string postprocess_ocr(std::string_view model_output)
{
    std::vector<std::string> lines;
    for (std::string_view line : text::split_lines(model_output)) {
        std::string l(line);
        if (text::trim(l).starts_with("```")) {
            continue;
        }
        std::replace(l.begin(), l.end(), '\t', ' ');
        while (!l.empty() && l.back() == ' ') {
            l.pop_back();
        }
        std::string_view body = text::trim(l);
        std::size_t level = 0;
        for (;;) {
            if (body.starts_with("#")) {
                body.remove_prefix(1);
            } else if (body.starts_with("＃")) {
                body.remove_prefix(std::string_view("＃").size());
            } else {
                break;
            }
            ++level;
        }
        if (level > 0) {
            body = text::trim(body);
            l = body.empty() ? std::string() : std::string(std::min<std::size_t>(level, 6), '#') + " " + std::string(body);
        }
        if (l.empty() && (lines.empty() || lines.back().empty())) {
            continue;
        }
        lines.push_back(std::move(l));
    }
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) {
            out += '\n';
        }
        out += lines[i];
    }
    return out;
}

std::string enhance_ocr(const PageRecord& record, GenerationClient& client, const PromptTemplates& templates,
                        int max_tokens)
{
    const std::string prompt = templates.build(PromptKind::ocr_enhance, {
                                                                            {"doc_id", record.doc_id},
                                                                            {"page_index", std::to_string(record.page_index)},
                                                                            {"page_text", record.text},
                                                                        });
    ChatRequest req;
    ChatMessage msg;
    msg.content.push_back(ContentPart::text(prompt));
    if (!record.image.empty()) {
        msg.content.push_back(ContentPart::image(record.image));
    }
    req.messages.push_back(std::move(msg));
    req.temperature = 0.0;
    req.max_tokens = max_tokens;
    return postprocess_ocr(client.generate(req));
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

std::string labelled_options(const std::vector<std::string>& options)
{
    std::string out;
    for (std::size_t i = 0; i < options.size(); ++i) {
        out += static_cast<char>('A' + (i % 26));
        out += ". ";
        out += options[i];
        out += '\n';
    }
    return out;
}

struct Task {
    std::size_t index = 0;
    const Page* page = nullptr;
    QuestionType qtype = QuestionType::comprehensive;
};

struct Outcome {
    std::optional<QACandidate> candidate;
    GateReport gates;
    std::string stage;  // empty: passed the per-candidate checks
    std::string reason;
};

Outcome run_task(const Task& task, GenerationClient& client, const PromptTemplates& templates,
                 const AugmentOptions& options)
{
    Outcome out;
    const Page& page = *task.page;
    const std::uint64_t seed = splitmix64(options.seed + task.index);

    ChatRequest gen = ChatRequest::user_text(templates.build(PromptKind::generate_qtype,
                                                             {
                                                                 {"doc_id", page.doc_id},
                                                                 {"page_index", std::to_string(page.page_index)},
                                                                 {"page_text", page.normalized_text},
                                                                 {"option_count", std::to_string(options.options_per_question)},
                                                                 {"qtype", std::string(to_string(task.qtype))},
                                                             },
                                                             task.qtype));
    gen.temperature = options.temperature;
    gen.top_p = 0.95;
    gen.top_k = 50;
    gen.max_tokens = options.max_tokens;
    gen.seed = seed;

    std::string raw;
    try {
        raw = client.generate(gen);
    } catch (const Error& e) {
        out.stage = e.category() == ErrorCategory::transport ? "transport" : "generation";
        out.reason = e.what();
        return out;
    }
    try {
        out.candidate = parse_generated_qa(raw, task.qtype, page.ref());
    } catch (const ParseError& e) {
        out.stage = "parse";
        out.reason = e.what();
        return out;
    }

    out.gates = run_gates(*out.candidate, {}, page.normalized_text, options.gates);
    if (!(out.gates.length && out.gates.complexity && out.gates.answer_support && out.gates.option_quality)) {
        out.stage = "gate";
        return out;
    }

    FeasibilityVerdict verdict;
    if (options.lexical_feasibility) {
        verdict = lexical_feasibility(*out.candidate, page.normalized_text, options.gates);
    } else {
        const QACandidate& qa = *out.candidate;
        ChatRequest check = ChatRequest::user_text(templates.build(
            PromptKind::feasibility,
            {
                {"doc_id", page.doc_id},
                {"page_index", std::to_string(page.page_index)},
                {"page_text", page.normalized_text},
                {"question", qa.question},
                {"options", labelled_options(qa.options)},
                {"answer", std::string(1, static_cast<char>('A' + qa.answer_index)) + ". " +
                               qa.options[static_cast<std::size_t>(qa.answer_index)]},
            }));
        check.temperature = 0.0;
        check.max_tokens = options.max_tokens;
        check.seed = seed;
        try {
            verdict = parse_feasibility(client.generate(check));
        } catch (const ParseError& e) {
            out.stage = "feasibility_parse";
            out.reason = e.what();
            return out;
        } catch (const Error& e) {
            out.stage = e.category() == ErrorCategory::transport ? "transport" : "feasibility";
            out.reason = e.what();
            return out;
        }
    }
    if (!validate_feasibility(verdict, *out.candidate, page.normalized_text, options.gates)) {
        out.stage = "feasibility";
        out.reason = verdict.answerable ? "answer or evidence not supported" : "judged unanswerable";
    }
    return out;
}

}  // namespace

AugmentResult augment(const Corpus& corpus, GenerationClient& client, const PromptTemplates& templates,
                      std::size_t quota, const AugmentOptions& options)
{
    if (options.per_page_types.empty()) {
        throw ArgumentError("augmentation needs at least one question type");
    }
    if (options.options_per_question != 4 && options.options_per_question != 10) {
        throw ArgumentError("options_per_question must be 4 or 10");
    }

    std::vector<Task> tasks;
    for (const PageRef& ref : select_pages(corpus, quota, options.selection)) {
        for (QuestionType t : options.per_page_types) {
            tasks.push_back({tasks.size(), corpus.find(ref), t});
        }
    }

    std::vector<Outcome> outcomes(tasks.size());
    {
        std::atomic<std::size_t> next{0};
        const std::size_t workers = std::clamp<std::size_t>(options.max_in_flight, 1, std::max<std::size_t>(tasks.size(), 1));
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) {
                    outcomes[i] = run_task(tasks[i], client, templates, options);
                }
            });
        }
    }

    AugmentResult result;
    result.generated = tasks.size();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        Outcome& o = outcomes[i];
        if (o.candidate) {
            o.gates.dedup = dedup_gate(*o.candidate, result.accepted, options.gates);
            if (!o.gates.dedup) {
                // gates precede feasibility
                o.stage = "gate";
            }
        }
        if (o.stage.empty()) {
            result.accepted.push_back(std::move(*o.candidate));
            continue;
        }
        AuditRecord rec;
        rec.candidate_index = i;
        rec.page = tasks[i].page->ref();
        rec.qtype = tasks[i].qtype;
        rec.stage = o.stage;
        if (o.candidate) {
            rec.question = o.candidate->question;
        }
        if (o.stage == "gate") {
            for (Gate g : o.gates.failures()) {
                rec.failed_gates.emplace_back(to_string(g));
            }
            rec.reason = rec.failed_gates.front();
        } else {
            rec.reason = o.reason;
        }
        result.audit.push_back(std::move(rec));
    }
    spdlog::info("augmentation: {} generated, {} accepted, {} rejected", result.generated, result.accepted.size(),
                 result.audit.size());
    return result;
}

json to_json(const QACandidate& qa)
{
    return {
        {"question", qa.question},
        {"options", qa.options},
        {"answer_index", qa.answer_index},
        {"qtype", to_string(qa.qtype)},
        {"doc_id", qa.source_page.doc_id},
        {"page_index", qa.source_page.page_index},
        {"evidence", qa.evidence},
    };
}

QACandidate qa_from_json(const json& j)
{
    try {
        QACandidate qa;
        qa.question = j.at("question").get<std::string>();
        qa.options = j.at("options").get<std::vector<std::string>>();
        qa.answer_index = j.at("answer_index").get<int>();
        qa.qtype = parse_question_type(j.at("qtype").get<std::string>());
        qa.source_page = {j.at("doc_id").get<std::string>(), j.at("page_index").get<std::size_t>()};
        qa.evidence = j.value("evidence", std::string());
        return qa;
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("malformed QA record: ") + e.what());
    }
}

json to_json(const AuditRecord& record)
{
    return {
        {"candidate_index", record.candidate_index},
        {"doc_id", record.page.doc_id},
        {"page_index", record.page.page_index},
        {"qtype", to_string(record.qtype)},
        {"stage", record.stage},
        {"reason", record.reason},
        {"failed_gates", record.failed_gates},
        {"question", record.question},
    };
}

}  // namespace docqa

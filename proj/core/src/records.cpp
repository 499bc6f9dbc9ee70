#include "docqa/records.hpp"

#include "docqa/errors.hpp"
#include "docqa/text.hpp"

#include <spdlog/spdlog.h>

#include <istream>
#include <set>

namespace docqa {

using nlohmann::json;

namespace {

template <typename T, typename Fn>
std::vector<T> read_lines(std::istream& in, Fn&& parse)
{
    std::vector<T> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) {
            continue;
        }
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError(n, "invalid JSON");
        }
        try {
            out.push_back(parse(j));
        } catch (const ParseError& e) {
            throw ParseError(n, e.what());
        } catch (const json::exception& e) {
            throw ParseError(n, e.what());
        }
    }
    return out;
}

json ref_json(const PageRef& r)
{
    return {{"doc_id", r.doc_id}, {"page_index", r.page_index}};
}

PageRef ref_from_json(const json& j)
{
    return {j.at("doc_id").get<std::string>(), j.at("page_index").get<std::size_t>()};
}

std::optional<int> parse_gold(const json& a, std::size_t option_count)
{
    int idx = -1;
    if (a.is_number_integer()) {
        idx = a.get<int>();
    } else if (a.is_string()) {
        const std::string s(text::trim(a.get<std::string>()));
        if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z') {
            idx = s[0] - 'A';
        } else if (s.size() == 1 && s[0] >= 'a' && s[0] <= 'z') {
            idx = s[0] - 'a';
        }
    }
    if (idx < 0 || static_cast<std::size_t>(idx) >= option_count) {
        throw ParseError(0, "answer does not name one of the options");
    }
    return idx;
}

}  // namespace

QuestionRecord question_from_json(const json& j)
{
    if (!j.is_object()) {
        throw ParseError(0, "question record must be an object");
    }
    QuestionRecord q;
    q.id = j.contains("id") && j["id"].is_number_integer() ? std::to_string(j["id"].get<long long>())
                                                           : j.at("id").get<std::string>();
    q.question = j.at("question").get<std::string>();
    q.options = j.at("options").get<std::vector<std::string>>();
    if (q.options.size() < 2 || q.options.size() > 26) {
        throw ParseError(0, "a question needs between 2 and 26 options");
    }
    if (j.contains("answer") && !j["answer"].is_null()) {
        q.gold = parse_gold(j["answer"], q.options.size());
    } else if (j.contains("answer_index") && !j["answer_index"].is_null()) {
        q.gold = parse_gold(j["answer_index"], q.options.size());
    }
    if (j.contains("doc_id") && !j["doc_id"].is_null()) {
        q.doc_id = j["doc_id"].get<std::string>();
    }
    if (j.contains("category") && !j["category"].is_null()) {
        q.category = j["category"].get<std::string>();
    }
    if (j.contains("pages")) {
        for (const auto& p : j.at("pages")) {
            q.pages.push_back(ref_from_json(p));
        }
    }
    return q;
}

json to_json(const QuestionRecord& q)
{
    json j = {{"id", q.id}, {"question", q.question}, {"options", q.options}};
    if (q.gold) {
        j["answer"] = std::string(1, static_cast<char>('A' + *q.gold));
    }
    if (q.doc_id) {
        j["doc_id"] = *q.doc_id;
    }
    if (q.category) {
        j["category"] = *q.category;
    }
    if (!q.pages.empty()) {
        json pages = json::array();
        for (const auto& r : q.pages) {
            pages.push_back(ref_json(r));
        }
        j["pages"] = std::move(pages);
    }
    return j;
}

std::vector<QuestionRecord> read_questions(std::istream& in)
{
    return read_lines<QuestionRecord>(in, [](const json& j) { return question_from_json(j); });
}

VerdictRecord verdict_from_json(const json& j)
{
    VerdictRecord v;
    v.id = j.at("id").get<std::string>();
    if (j.contains("chosen") && j["chosen"].is_string()) {
        const std::string c = j["chosen"].get<std::string>();
        if (c.size() != 1) {
            throw ParseError(0, "chosen must be a single option letter");
        }
        v.chosen = c[0];
    }
    v.confidence = j.value("confidence", 0.0);
    v.responses_used = j.value("responses_used", std::size_t{0});
    v.stopped_early = j.value("stopped_early", false);
    v.tie_broken = j.value("tie_broken", false);
    if (j.contains("votes")) {
        for (const auto& [k, n] : j["votes"].items()) {
            if (k.size() == 1) {
                v.votes[k[0]] = n.get<std::size_t>();
            }
        }
    }
    if (j.contains("context")) {
        for (const auto& p : j["context"]) {
            v.context.push_back(ref_from_json(p));
        }
    }
    return v;
}

json to_json(const VerdictRecord& v)
{
    json votes = json::object();
    for (const auto& [k, n] : v.votes) {
        votes[std::string(1, k)] = n;
    }
    json context = json::array();
    for (const auto& r : v.context) {
        context.push_back(ref_json(r));
    }
    return {
        {"id", v.id},
        {"chosen", v.chosen ? json(std::string(1, *v.chosen)) : json(nullptr)},
        {"confidence", v.confidence},
        {"votes", std::move(votes)},
        {"responses_used", v.responses_used},
        {"stopped_early", v.stopped_early},
        {"tie_broken", v.tie_broken},
        {"context", std::move(context)},
    };
}

std::vector<VerdictRecord> read_verdicts(std::istream& in)
{
    return read_lines<VerdictRecord>(in, [](const json& j) { return verdict_from_json(j); });
}

// ---------------------------------------------------------------------------
// Inference

std::vector<ContextPage> gather_context(const QuestionRecord& q, const Corpus& corpus,
                                        const RetrievalIndexes& indexes, EmbeddingClient* embed_client,
                                        const InferenceOptions& options)
{
    std::vector<ContextPage> out;
    const auto add = [&](const PageRef& ref) {
        const Page* p = corpus.find(ref);
        if (p == nullptr) {
            throw ArgumentError("question " + q.id + " refers to unknown page " + to_string(ref));
        }
        out.push_back({ref, p->normalized_text, {}});
    };

    if (!q.pages.empty()) {
        for (const auto& r : q.pages) {
            add(r);
        }
    } else if (options.use_retrieval) {
        const auto result = retrieve(q.question, indexes, options.retrieval, embed_client, q.doc_id);
        for (const ScoredPage& p : result.pages) {
            add(p.ref);
        }
    } else {
        for (const Page& p : corpus.pages()) {
            if (out.size() >= options.context_pages) {
                break;
            }
            if (!q.doc_id || p.doc_id == *q.doc_id) {
                add(p.ref());
            }
        }
    }
    return out;
}

VerdictRecord answer_question(const QuestionRecord& q, const Corpus& corpus, const RetrievalIndexes& indexes,
                              EmbeddingClient* embed_client, GenerationClient& client,
                              const InferenceOptions& options)
{
    const auto context = gather_context(q, corpus, indexes, embed_client, options);
    const MultipleChoiceQuestion mc{q.question, q.options};
    const ChatRequest request = build_mc_request(mc, context);
    const EnsembleVerdict verdict = run_ensemble(request, mc, options.schedule, client, options.ensemble);

    VerdictRecord v;
    v.id = q.id;
    v.chosen = verdict.chosen_option;
    v.confidence = verdict.confidence;
    v.votes = verdict.votes;
    v.responses_used = verdict.responses_used;
    // request count depends on completion timing, so it stays out of the record
    spdlog::debug("{}: {} requests sent, {} used", q.id, verdict.dispatched, verdict.responses_used);
    v.stopped_early = verdict.stopped_early;
    v.tie_broken = verdict.tie_broken;
    for (const auto& c : context) {
        v.context.push_back(c.ref);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Evaluation

std::string canonical_category(const std::optional<std::string>& tag)
{
    if (!tag) {
        return "other";
    }
    std::string key;
    for (char c : text::trim(*tag)) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
        if (c != ' ' && c != '.' && c != '/' && c != '-' && c != '_') {
            key += c;
        }
    }
    static const std::set<std::string> yes_no = {"yn", "yesno", "boolean", "binary"};
    static const std::set<std::string> factoid = {"fact", "factoid", "factual"};
    static const std::set<std::string> numeric = {"num", "numeric", "numerical", "number"};
    if (yes_no.count(key) != 0) return "Y/N";
    if (factoid.count(key) != 0) return "Fact.";
    if (numeric.count(key) != 0) return "Num";
    return "other";
}

EvaluationReport evaluate(const std::vector<QuestionRecord>& questions, const std::vector<VerdictRecord>& verdicts)
{
    std::map<std::string, const VerdictRecord*> by_id;
    for (const auto& v : verdicts) {
        if (!by_id.emplace(v.id, &v).second) {
            throw ArgumentError("duplicate verdict for question " + v.id);
        }
    }
    std::set<std::string> ids;
    EvaluationReport r;
    for (const auto& q : questions) {
        if (!q.gold) {
            throw ArgumentError("question " + q.id + " has no gold answer");
        }
        ids.insert(q.id);
        const auto it = by_id.find(q.id);
        bool correct = false;
        if (it == by_id.end()) {
            ++r.missing;
        } else if (!it->second->chosen) {
            ++r.abstained;
        } else {
            correct = *it->second->chosen == static_cast<char>('A' + *q.gold);
        }
        CategoryScore& c = r.by_category[canonical_category(q.category)];
        ++c.total;
        ++r.overall.total;
        if (correct) {
            ++c.correct;
            ++r.overall.correct;
        }
    }
    for (const auto& v : verdicts) {
        if (ids.count(v.id) == 0) {
            throw ArgumentError("verdict " + v.id + " matches no question");
        }
    }
    return r;
}

json to_json(const EvaluationReport& report)
{
    const auto score = [](const CategoryScore& c) {
        return json{{"total", c.total}, {"correct", c.correct}, {"accuracy", c.accuracy()}};
    };
    json cats = json::object();
    for (const auto& [name, c] : report.by_category) {
        cats[name] = score(c);
    }
    return {
        {"overall", score(report.overall)},
        {"categories", std::move(cats)},
        {"abstained", report.abstained},
        {"missing", report.missing},
    };
}

}  // namespace docqa

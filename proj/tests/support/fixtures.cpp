#include "fixtures.hpp"

#include <docqa/errors.hpp>
#include <docqa/semantic_index.hpp>

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

namespace docqa::testing {

using nlohmann::json;

std::string random_word(Rng& rng, std::size_t length)
{
    std::uniform_int_distribution<int> letter('a', 'z');
    std::string w;
    for (std::size_t i = 0; i < length; ++i) {
        w.push_back(static_cast<char>(letter(rng)));
    }
    return w;
}

std::vector<std::string> unique_words(Rng& rng, std::size_t count, const std::set<std::string>& avoid)
{
    std::set<std::string> seen = avoid;
    std::vector<std::string> out;
    std::uniform_int_distribution<std::size_t> len(6, 9);
    while (out.size() < count) {
        std::string w = random_word(rng, len(rng));
        if (seen.insert(w).second) {
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::vector<std::string> split_words(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) {
        out.push_back(w);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<PageRecord> random_word_pages(Rng& rng, std::size_t max_pages, std::size_t max_tokens,
                                          std::size_t vocabulary)
{
    std::vector<std::string> vocab;
    std::set<std::string> seen;
    std::uniform_int_distribution<std::size_t> len(2, 7);
    while (vocab.size() < vocabulary) {
        std::string w = random_word(rng, len(rng));
        if (seen.insert(w).second) {
            vocab.push_back(std::move(w));
        }
    }
    const std::size_t pages = std::uniform_int_distribution<std::size_t>(1, max_pages)(rng);
    const std::size_t docs = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(3, pages))(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> tokens(0, max_tokens);

    std::vector<PageRecord> out;
    std::vector<std::size_t> next_index(docs, 0);
    for (std::size_t p = 0; p < pages; ++p) {
        const std::size_t d = p % docs;
        PageRecord r;
        r.doc_id = "doc" + std::to_string(d);
        r.page_index = next_index[d]++;
        const std::size_t n = tokens(rng);
        for (std::size_t t = 0; t < n; ++t) {
            // skewed draw so that some words are frequent
            const double x = u(rng);
            const auto idx = static_cast<std::size_t>(static_cast<double>(vocabulary) * x * x);
            if (!r.text.empty()) {
                r.text += ' ';
            }
            r.text += vocab[std::min(idx, vocabulary - 1)];
        }
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

std::vector<std::string> word_ngrams(const std::vector<std::string>& words, int n_min, int n_max)
{
    std::vector<std::string> out;
    for (int n = n_min; n <= n_max; ++n) {
        const auto un = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + un <= words.size(); ++i) {
            std::string g = words[i];
            for (std::size_t k = 1; k < un; ++k) {
                g += '\x1f';
                g += words[i + k];
            }
            out.push_back(std::move(g));
        }
    }
    return out;
}

}  // namespace

TfidfOracle::TfidfOracle(const std::vector<std::vector<std::string>>& pages, std::size_t max_features, int n_min,
                         int n_max)
    : n_min_(n_min), n_max_(n_max), n_(pages.size())
{
    std::vector<std::map<std::string, std::size_t>> counts;
    for (const auto& words : pages) {
        std::map<std::string, std::size_t> c;
        for (const auto& g : word_ngrams(words, n_min, n_max)) {
            ++c[g];
        }
        for (const auto& [g, k] : c) {
            ++df_[g];
        }
        counts.push_back(std::move(c));
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(df_.begin(), df_.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (std::size_t i = 0; i < std::min(max_features, ranked.size()); ++i) {
        features_.push_back(ranked[i].first);
        feature_set_.insert(ranked[i].first);
    }
    for (const auto& words : pages) {
        page_vectors_.push_back(weigh(words));
    }
}

std::map<std::string, long double> TfidfOracle::weigh(const std::vector<std::string>& words) const
{
    std::map<std::string, std::size_t> c;
    for (const auto& g : word_ngrams(words, n_min_, n_max_)) {
        if (feature_set_.count(g) != 0) {
            ++c[g];
        }
    }
    std::map<std::string, long double> v;
    long double norm = 0;
    for (const auto& [g, tf] : c) {
        const long double idf =
            std::log((1.0L + static_cast<long double>(n_)) / (1.0L + static_cast<long double>(df_.at(g)))) + 1.0L;
        const long double w = (1.0L + std::log(static_cast<long double>(tf))) * idf;
        v[g] = w;
        norm += w * w;
    }
    norm = std::sqrt(norm);
    if (norm > 0) {
        for (auto& [g, w] : v) {
            w /= norm;
        }
    }
    return v;
}

std::vector<long double> TfidfOracle::scores(const std::vector<std::string>& query_words) const
{
    const auto q = weigh(query_words);
    std::vector<long double> out;
    for (const auto& p : page_vectors_) {
        long double s = 0;
        for (const auto& [g, w] : q) {
            const auto it = p.find(g);
            if (it != p.end()) {
                s += w * it->second;
            }
        }
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<ScoredPage> eq3_reference(const std::vector<ScoredPage>& ranked, std::size_t m, std::size_t n, double tau)
{
    std::vector<ScoredPage> r;
    for (const ScoredPage& d : ranked) {
        if (r.size() < m || (d.s_final >= tau && r.size() < n)) {
            r.push_back(d);
        }
    }
    return r;
}

std::vector<std::vector<float>> HashedEmbeddingClient::embed_batch(const std::vector<std::string>& inputs)
{
    std::vector<std::vector<float>> out;
    out.reserve(inputs.size());
    for (const auto& s : inputs) {
        out.push_back(hashed_embedding(s, dim_));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kFiller = {
    "会社",   "売上",   "報告",   "年度",     "事業",   "計画",    "地域",   "市場",     "製品",
    "顧客",   "サービス", "管理",   "予算",     "方針",   "開発",    "技術",   "人材",     "環境",
    "annual", "review", "market", "operation", "policy", "segment", "growth", "strategy", "budget",
    "region", "staff",  "office", "program",   "survey", "outlook", "within", "overall",  "during",
};

std::string filler_sentence(Rng& rng)
{
    std::uniform_int_distribution<std::size_t> pick(0, kFiller.size() - 1);
    std::uniform_int_distribution<std::size_t> len(6, 12);
    std::string s;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            s += ' ';
        }
        s += kFiller[pick(rng)];
    }
    return s + "。";
}

std::string first_line_after(const std::string& prompt, const std::string& marker)
{
    const auto pos = prompt.find(marker);
    if (pos == std::string::npos) {
        return {};
    }
    const auto start = pos + marker.size();
    const auto end = prompt.find('\n', start);
    return prompt.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

}  // namespace

PlantedCorpus make_planted_corpus(std::uint64_t seed, std::size_t docs, std::size_t pages_per_doc,
                                  std::size_t questions)
{
    Rng rng(seed);
    PlantedCorpus out;
    const std::size_t total = docs * pages_per_doc;
    std::vector<std::vector<std::string>> sentences(total);
    for (auto& page : sentences) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(4, 7)(rng);
        for (std::size_t i = 0; i < n; ++i) {
            page.push_back(filler_sentence(rng));
        }
    }

    const std::set<std::string> avoid(kFiller.begin(), kFiller.end());
    const auto keys = unique_words(rng, 2 * questions, avoid);
    std::uniform_int_distribution<std::size_t> page_pick(0, total - 1);
    std::uniform_int_distribution<int> value(100, 999);
    for (std::size_t q = 0; q < questions; ++q) {
        PlantedQuestion pq;
        pq.id = "q" + std::to_string(q);
        const std::string& k1 = keys[2 * q];
        const std::string& k2 = keys[2 * q + 1];
        const std::size_t p = page_pick(rng);
        pq.page = {"doc" + std::string(p / pages_per_doc < 10 ? "0" : "") + std::to_string(p / pages_per_doc),
                   p % pages_per_doc};

        std::set<int> values;
        while (values.size() < 4) {
            values.insert(value(rng));
        }
        std::vector<int> vs(values.begin(), values.end());
        std::shuffle(vs.begin(), vs.end(), rng);
        for (int v : vs) {
            pq.options.push_back(std::to_string(v));
        }
        pq.correct = std::uniform_int_distribution<int>(0, 3)(rng);
        pq.query = "What is the " + k1 + " " + k2 + " value?";
        pq.answer_sentence = "The " + k1 + " " + k2 + " value is " + pq.options[static_cast<std::size_t>(pq.correct)] + ".";

        auto& page = sentences[p];
        const std::size_t at = std::uniform_int_distribution<std::size_t>(0, page.size())(rng);
        page.insert(page.begin() + static_cast<std::ptrdiff_t>(at), pq.answer_sentence);
        out.questions.push_back(std::move(pq));
    }

    for (std::size_t p = 0; p < total; ++p) {
        PageRecord r;
        r.doc_id = "doc" + std::string(p / pages_per_doc < 10 ? "0" : "") + std::to_string(p / pages_per_doc);
        r.page_index = p % pages_per_doc;
        for (const auto& s : sentences[p]) {
            r.text += (r.text.empty() ? "" : " ") + s;
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

QuestionRecord to_question_record(const PlantedQuestion& q)
{
    QuestionRecord r;
    r.id = q.id;
    r.question = q.query;
    r.options = q.options;
    r.gold = q.correct;
    r.category = "Num";
    return r;
}

MockServer::ChatResponder planted_answer_responder(const std::vector<PlantedQuestion>& questions)
{
    std::map<std::string, PlantedQuestion> by_text;
    for (const auto& q : questions) {
        by_text.emplace(q.query, q);
    }
    return [by_text = std::move(by_text)](const MockChatCall& call) -> std::optional<MockResponse> {
        const std::string text = first_line_after(call.prompt, "Question: ");
        const auto it = by_text.find(text);
        if (it == by_text.end()) {
            return std::nullopt;
        }
        const PlantedQuestion& q = it->second;
        const bool seen = call.prompt.find(q.answer_sentence) != std::string::npos;
        const int pick = seen ? q.correct : (q.correct + 1) % static_cast<int>(q.options.size());
        MockResponse r;
        r.content = std::string(seen ? "The context states the value directly." : "The context does not say; guessing.") +
                    "\nAnswer: " + static_cast<char>('A' + pick);
        return r;
    };
}

// ---------------------------------------------------------------------------

namespace {

struct ScenarioPage {
    PageRef ref;
    std::string co, k1, k2, k3, k4;
    int year = 0;
    int n1 = 0;
    int n2 = 0;
    std::string evidence;
};

std::string key(const PageRef& r, QuestionType t)
{
    return to_string(r) + "/" + std::string(to_string(t));
}

struct Draft {
    std::string question;
    std::vector<std::string> options;
    int answer = 0;
    std::string evidence;
};

Draft clean_draft(const ScenarioPage& p, QuestionType t)
{
    const std::string y = std::to_string(p.year);
    Draft d;
    d.evidence = p.evidence;
    switch (t) {
    case QuestionType::comparative:
        d.question = "In fiscal " + y + ", which " + p.co + " division recorded higher sales, " + p.k1 + " or " + p.k2 + "?";
        d.options = {"The " + p.k1 + " division", "The " + p.k2 + " division", "Both divisions recorded equal sales",
                     "Neither division reported sales"};
        d.answer = p.n1 > p.n2 ? 0 : 1;
        break;
    case QuestionType::computational:
        d.question = "What were the combined " + p.co + " sales of the " + p.k1 + " and " + p.k2 +
                     " divisions in fiscal " + y + ", in million yen?";
        d.options = {std::to_string(p.n1 + p.n2) + " million yen", std::to_string(p.n1 + p.n2 + 100) + " million yen",
                     std::to_string(std::abs(p.n1 - p.n2)) + " million yen", std::to_string(p.n1 * 3) + " million yen"};
        d.answer = 0;
        break;
    case QuestionType::conditional:
        d.question = "If " + p.k4 + " demand at " + p.co + " beats the " + y + " " + p.k3 +
                     " target, which division gets a subsidy?";
        d.options = {"The " + p.k1 + " division", "The " + p.k2 + " division", "Headquarters itself",
                     "No division gets support"};
        d.answer = 0;
        break;
    case QuestionType::causal:
        d.question = "What caused the rise in " + p.k1 + " sales at " + p.co + ", given " + p.k3 + " demand?";
        d.options = {"Stronger " + p.k3 + " demand in the domestic market", "A weaker yen against the dollar",
                     "The closure of the " + p.k2 + " division", "A new subsidy from headquarters"};
        d.answer = 0;
        break;
    case QuestionType::comprehensive:
        d.question = "Taking the " + p.k1 + " and " + p.k2 + " divisions into account, what does the " + p.co +
                     " group expect for next year?";
        d.options = {"Steady growth across both divisions", "A sharp decline in " + p.k1 + " sales",
                     "The sale of the " + p.k2 + " division", "A merger with a rival group"};
        d.answer = 0;
        break;
    }
    return d;
}

std::string draft_json(Draft d, std::size_t rotate)
{
    // vary the answer position
    const std::size_t n = d.options.size();
    const std::size_t r = rotate % n;
    std::rotate(d.options.begin(), d.options.begin() + static_cast<std::ptrdiff_t>(r), d.options.end());
    d.answer = static_cast<int>((static_cast<std::size_t>(d.answer) + n - r) % n);
    const json j = {{"question", d.question}, {"options", d.options}, {"answer_index", d.answer}, {"evidence", d.evidence}};
    return "```json\n" + j.dump() + "\n```";
}

}  // namespace

GateScenario make_gate_scenario(std::uint64_t seed, bool with_defects)
{
    Rng rng(seed);
    GateScenario s;
    const auto words = unique_words(rng, 3 * 5 * 5);
    std::size_t w = 0;
    std::map<PageRef, ScenarioPage> pages;
    for (std::size_t d = 0; d < 3; ++d) {
        const std::string doc = "report" + std::to_string(d);
        const std::string co = words[w++];
        s.records.push_back({doc, 0, "Company " + co + " annual report", {}});
        for (std::size_t i = 1; i < 5; ++i) {
            ScenarioPage p;
            p.ref = {doc, i};
            p.co = co;
            p.k1 = words[w++];
            p.k2 = words[w++];
            p.k3 = words[w++];
            p.k4 = words[w++];
            p.year = std::uniform_int_distribution<int>(2015, 2023)(rng);
            p.n1 = std::uniform_int_distribution<int>(200, 900)(rng);
            do {
                p.n2 = std::uniform_int_distribution<int>(200, 900)(rng);
            } while (p.n2 == p.n1);
            const std::string y = std::to_string(p.year);
            p.evidence = "The rise in " + p.k1 + " sales was caused by stronger " + p.k3 + " demand in the domestic market.";
            std::string text = "The " + co + " group report, part " + std::to_string(i) + ". In fiscal " + y + ", the " +
                               p.k1 + " division recorded sales of " + std::to_string(p.n1) + " million yen, while the " +
                               p.k2 + " division recorded sales of " + std::to_string(p.n2) + " million yen. " +
                               p.evidence + " If " + p.k4 + " demand at " + co + " beats the " + y + " " + p.k3 +
                               " target, the " + p.k1 + " division gets a subsidy from headquarters. Overall, the " + co +
                               " group expects steady growth across both divisions next year.";
            s.records.push_back({doc, i, text, {}});
            s.evidence.emplace_back(p.evidence, p.evidence);
            pages.emplace(p.ref, p);
        }
    }

    // Task order is the order augment() will use.
    const Corpus corpus = build_corpus(s.records);
    const auto selected = select_pages(corpus, s.quota, PageSelectionOptions{});
    struct TaskRef {
        PageRef page;
        QuestionType type;
    };
    std::vector<TaskRef> tasks;
    for (const auto& r : selected) {
        for (QuestionType t : kAllQuestionTypes) {
            tasks.push_back({r, t});
        }
    }

    std::vector<Draft> drafts;
    for (const auto& t : tasks) {
        drafts.push_back(clean_draft(pages.at(t.page), t.type));
    }
    const auto page_of = [&](std::size_t i) -> const ScenarioPage& { return pages.at(tasks[i].page); };
    if (!with_defects) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            s.generations[key(tasks[i].page, tasks[i].type)] = draft_json(drafts[i], i);
        }
        return s;
    }

    // length
    drafts[7].question = "Sum " + std::to_string(page_of(7).year) + "?";
    s.defects[7] = "length";
    {
        std::string q = drafts[33].question;
        q.pop_back();
        for (int i = 0; i < 4; ++i) {
            q += ", taking into account every statement in section " + std::to_string(i + 1) +
                 " about prices, costs and staffing";
        }
        drafts[33].question = q + "?";
        s.defects[33] = "length";
    }
    // complexity: one clause, no numbers
    drafts[12].question = "Which division gets a subsidy under the " + page_of(12).k4 + " rule";
    s.defects[12] = "complexity";
    drafts[41].question = "Which " + page_of(41).co + " division recorded higher sales in the " + page_of(41).k3 + " segment";
    s.defects[41] = "complexity";
    // answer support: the claimed option has nothing to do with the page
    for (std::size_t i : {18, 52}) {
        Draft& d = drafts[i];
        d.options[static_cast<std::size_t>(d.answer)] = "Quantum zebra migration festivals";
        s.defects[i] = "answer_support";
    }
    // option quality: duplicate option, then an extreme length ratio
    {
        Draft& d = drafts[24];
        d.options[(static_cast<std::size_t>(d.answer) + 1) % 4] = d.options[static_cast<std::size_t>(d.answer)];
        s.defects[24] = "option_quality";
    }
    {
        Draft& d = drafts[46];
        d.options[(static_cast<std::size_t>(d.answer) + 2) % 4] = "Tax";
        d.options[static_cast<std::size_t>(d.answer)] += " across several regional markets";
        s.defects[46] = "option_quality";
    }
    // dedup: repeat the question of an earlier clean candidate
    drafts[29].question = drafts[3].question;
    s.defects[29] = "dedup";
    drafts[57].question = drafts[50].question;
    s.defects[57] = "dedup";

    for (std::size_t i = 0; i < tasks.size(); ++i) {
        s.generations[key(tasks[i].page, tasks[i].type)] = draft_json(drafts[i], i);
    }
    return s;
}

MockServer::ChatResponder gate_scenario_responder(const GateScenario& scenario)
{
    return [generations = scenario.generations, evidence = scenario.evidence](const MockChatCall& call)
               -> std::optional<MockResponse> {
        static const std::regex gen_re(R"re(document (\S+), page (\d+)\)[\s\S]*?question of type "(\w+)")re");
        std::smatch m;
        if (std::regex_search(call.prompt, m, gen_re)) {
            const PageRef ref{m[1].str(), static_cast<std::size_t>(std::stoul(m[2].str()))};
            const auto it = generations.find(to_string(ref) + "/" + m[3].str());
            if (it == generations.end()) {
                return std::nullopt;
            }
            return MockResponse{200, it->second, {}};
        }
        const std::string claimed = first_line_after(call.prompt, "Claimed answer: ");
        if (claimed.empty()) {
            return std::nullopt;
        }
        std::string ev;
        for (const auto& [marker, sentence] : evidence) {
            if (call.prompt.find(marker) != std::string::npos) {
                ev = sentence;
                break;
            }
        }
        std::string out = "REASONING: The page states the relevant figures and the causal link, and the claimed option "
                          "restates them.\nANSWERABLE: yes\nANSWER: " +
                          claimed + "\nEVIDENCE: " + ev;
        return MockResponse{200, out, {}};
    };
}

std::string ResponderClient::generate(const ChatRequest& req)
{
    MockChatCall call;
    call.prompt = prompt_text(req);
    call.prompt_hash = prompt_fingerprint(call.prompt);
    call.config_id = req.config_id;
    call.temperature = req.temperature;
    call.seed = req.seed;
    for (const auto& m : req.messages) {
        for (const auto& part : m.content) {
            call.image_parts += part.kind == ContentPart::Kind::image ? 1 : 0;
        }
    }
    const auto reply = responder_(call);
    if (!reply) {
        throw EndpointError(404, 1, "unscripted request");
    }
    if (reply->status < 200 || reply->status >= 300) {
        throw EndpointError(reply->status, 1, reply->content);
    }
    return reply->content;
}

}  // namespace docqa::testing

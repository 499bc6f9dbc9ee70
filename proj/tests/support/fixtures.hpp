#pragma once

#include <docqa/augmentation.hpp>
#include <docqa/corpus.hpp>
#include <docqa/gateway.hpp>
#include <docqa/hybrid_retriever.hpp>
#include <docqa/mock_server.hpp>
#include <docqa/records.hpp>

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace docqa::testing {

using Rng = std::mt19937_64;

/// Lowercase ASCII word of `length` letters.
std::string random_word(Rng& rng, std::size_t length);
/// `count` distinct words, each at least 6 letters, none in `avoid`.
std::vector<std::string> unique_words(Rng& rng, std::size_t count, const std::set<std::string>& avoid = {});

// ---------------------------------------------------------------------------
// TF-IDF reference

/// Pages made of space-separated lowercase words drawn from a small
/// vocabulary, so that tokens are exactly the words.
std::vector<PageRecord> random_word_pages(Rng& rng, std::size_t max_pages, std::size_t max_tokens,
                                          std::size_t vocabulary);

/// Straightforward evaluation of sublinear tf, smoothed idf and cosine
/// scoring over whitespace-split words, with n-grams joined by U+001F.
class TfidfOracle {
public:
    TfidfOracle(const std::vector<std::vector<std::string>>& pages, std::size_t max_features, int n_min, int n_max);

    /// Cosine score of every page, in page order.
    std::vector<long double> scores(const std::vector<std::string>& query_words) const;
    const std::vector<std::string>& features() const noexcept { return features_; }

private:
    std::map<std::string, long double> weigh(const std::vector<std::string>& words) const;

    int n_min_;
    int n_max_;
    std::size_t n_;
    std::map<std::string, std::size_t> df_;
    std::vector<std::string> features_;
    std::set<std::string> feature_set_;
    std::vector<std::map<std::string, long double>> page_vectors_;
};

std::vector<std::string> split_words(const std::string& s);

// ---------------------------------------------------------------------------
// Adaptive selection reference

/// R = { d_i : (|R| < m) or (S(d_i) >= tau and |R| < n) }, scanned in rank order.
std::vector<ScoredPage> eq3_reference(const std::vector<ScoredPage>& ranked, std::size_t m, std::size_t n, double tau);

// ---------------------------------------------------------------------------
// Embeddings without HTTP

class HashedEmbeddingClient final : public EmbeddingClient {
public:
    explicit HashedEmbeddingClient(std::size_t dim) : dim_(dim) {}
    std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& inputs) override;
    std::size_t max_in_flight() const override { return 4; }

private:
    std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Planted retrieval corpus

struct PlantedQuestion {
    std::string id;
    std::string query;
    PageRef page;
    /// Sentence present only on the planted page.
    std::string answer_sentence;
    std::vector<std::string> options;
    int correct = 0;
};

struct PlantedCorpus {
    std::vector<PageRecord> records;
    std::vector<PlantedQuestion> questions;
};

/// `docs` documents of `pages_per_doc` filler pages; each question plants
/// "The <k1> <k2> value is <n>." on one random page.
PlantedCorpus make_planted_corpus(std::uint64_t seed, std::size_t docs, std::size_t pages_per_doc,
                                  std::size_t questions);

QuestionRecord to_question_record(const PlantedQuestion& q);

/// Chat responder answering correctly iff the planted sentence of the
/// question is in the prompt, otherwise naming the next option.
MockServer::ChatResponder planted_answer_responder(const std::vector<PlantedQuestion>& questions);

// ---------------------------------------------------------------------------
// Augmentation gate scenario

struct GateScenario {
    std::vector<PageRecord> records;
    /// Candidate JSON per (page, type), keyed by "doc#page/type".
    std::map<std::string, std::string> generations;
    /// Evidence sentence per page text marker.
    std::vector<std::pair<std::string, std::string>> evidence;
    /// Expected rejection gate by candidate index.
    std::map<std::size_t, std::string> defects;
    std::size_t quota = 12;
};

/// 3 documents of 5 pages (12 eligible), five question types per page, and
/// two seeded defects per gate: 60 candidates, 50 clean.
GateScenario make_gate_scenario(std::uint64_t seed, bool with_defects = true);

/// Serves generation prompts from the scenario table and answers
/// feasibility prompts with a well-formed verdict.
MockServer::ChatResponder gate_scenario_responder(const GateScenario& scenario);

/// In-process client forwarding the prompt to a mock responder; a missing
/// reply or a non-2xx status becomes an EndpointError.
class ResponderClient final : public GenerationClient {
public:
    explicit ResponderClient(MockServer::ChatResponder responder) : responder_(std::move(responder)) {}
    std::string generate(const ChatRequest& req) override;

private:
    MockServer::ChatResponder responder_;
};

// ---------------------------------------------------------------------------

/// One JSON line per element.
template <typename Range>
std::string jsonl(const Range& items)
{
    std::string out;
    for (const auto& item : items) {
        out += to_json(item).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

}  // namespace docqa::testing

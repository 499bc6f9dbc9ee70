#include "fixtures.hpp"

#include <docqa/errors.hpp>
#include <docqa/mock_server.hpp>
#include <docqa/semantic_index.hpp>

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

using namespace docqa;
using namespace docqa::testing;

namespace {

EmbeddingVector random_unit(Rng& rng, std::size_t dim)
{
    std::normal_distribution<float> g;
    std::vector<float> v(dim);
    for (auto& x : v) {
        x = g(rng);
    }
    return EmbeddingVector::normalized(std::move(v));
}

EndpointConfig endpoint(const MockServer& server)
{
    EndpointConfig cfg;
    cfg.base_url = server.base_url();
    cfg.model_name = "embed";
    cfg.timeout_seconds = 10;
    cfg.max_retries = 0;
    return cfg;
}

SemanticIndex random_index(Rng& rng, std::size_t pages, std::size_t dim)
{
    std::vector<PageRef> refs;
    std::vector<EmbeddingVector> vecs;
    for (std::size_t i = 0; i < pages; ++i) {
        refs.push_back({"d" + std::to_string(i / 100), i % 100});
        vecs.push_back(random_unit(rng, dim));
    }
    return SemanticIndex(dim, refs, vecs);
}

std::vector<RankedPage> brute_force(const SemanticIndex& idx, const EmbeddingVector& q, std::size_t k)
{
    std::vector<RankedPage> all;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        long double dot = 0;
        const auto v = idx.vector(i);
        for (std::size_t d = 0; d < idx.dim(); ++d) {
            dot += static_cast<long double>(v[d]) * q.values()[d];
        }
        all.push_back({idx.page_refs()[i], static_cast<double>(dot)});
    }
    sort_ranked(all);
    all.resize(std::min(k, all.size()));
    return all;
}

class CountingClient final : public EmbeddingClient {
public:
    explicit CountingClient(std::size_t dim) : inner_(dim) {}
    std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& inputs) override
    {
        const int now = ++active_;
        int seen = peak_.load();
        while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        ++calls_;
        auto out = inner_.embed_batch(inputs);
        --active_;
        return out;
    }
    std::size_t max_in_flight() const override { return 3; }
    int peak() const { return peak_.load(); }
    int calls() const { return calls_.load(); }

private:
    HashedEmbeddingClient inner_;
    std::atomic<int> active_{0};
    std::atomic<int> peak_{0};
    std::atomic<int> calls_{0};
};

}  // namespace

TEST(EmbeddingVector, NormalizesAndRejectsZero)
{
    const auto v = EmbeddingVector::normalized({3.0f, 4.0f});
    EXPECT_FLOAT_EQ(v.values()[0], 0.6f);
    EXPECT_FLOAT_EQ(v.values()[1], 0.8f);
    EXPECT_THROW(EmbeddingVector::normalized({0.0f, 0.0f}), ContractError);
    EXPECT_THROW(EmbeddingVector::normalized({NAN, 1.0f}), ContractError);
}

TEST(CosineSim, SelfOrthogonalAndMismatch)
{
    Rng rng(1);
    const auto a = random_unit(rng, 64);
    EXPECT_NEAR(cosine_sim(a, a), 1.0, 1e-6);
    const auto e0 = EmbeddingVector::normalized({1, 0, 0});
    const auto e1 = EmbeddingVector::normalized({0, 1, 0});
    EXPECT_DOUBLE_EQ(cosine_sim(e0, e1), 0.0);
    EXPECT_THROW(cosine_sim(a, e0), ArgumentError);
}

TEST(CosineSim, MatchesExtendedPrecisionDot)
{
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const auto a = random_unit(rng, 1024);
        const auto b = random_unit(rng, 1024);
        long double ref = 0;
        for (std::size_t i = 0; i < 1024; ++i) {
            ref += static_cast<long double>(a.values()[i]) * b.values()[i];
        }
        EXPECT_NEAR(cosine_sim(a, b), static_cast<double>(ref), 1e-12);
        EXPECT_LE(std::abs(cosine_sim(a, b)), 1.0 + 1e-6);
    }
}

TEST(SemanticSearch, SelfIsTopAndMatchesBruteForce)
{
    Rng rng(3);
    const auto idx = random_index(rng, 300, 128);
    for (std::size_t i = 0; i < idx.size(); i += 37) {
        const auto q = EmbeddingVector::from_unit({idx.vector(i).begin(), idx.vector(i).end()});
        const auto top = idx.search(q, 10);
        ASSERT_EQ(top.size(), 10u);
        EXPECT_EQ(top[0].ref, idx.page_refs()[i]);
        EXPECT_NEAR(top[0].score, 1.0, 1e-5);
    }
    for (int t = 0; t < 20; ++t) {
        const auto q = random_unit(rng, 128);
        const auto top = idx.search(q, 10);
        const auto ref = brute_force(idx, q, 10);
        ASSERT_EQ(top.size(), ref.size());
        for (std::size_t k = 0; k < top.size(); ++k) {
            EXPECT_EQ(top[k].ref, ref[k].ref);
            EXPECT_NEAR(top[k].score, ref[k].score, 1e-9);
        }
    }
}

TEST(SemanticSearch, KClampAndErrors)
{
    Rng rng(4);
    const auto idx = random_index(rng, 5, 16);
    const auto q = random_unit(rng, 16);
    EXPECT_EQ(idx.search(q, 50).size(), 5u);
    EXPECT_EQ(idx.score_all(q).size(), 5u);
    EXPECT_EQ(idx.search(q, 50), idx.score_all(q));
    EXPECT_THROW(idx.search(q, 0), ArgumentError);
    EXPECT_THROW(idx.search(random_unit(rng, 8), 3), ArgumentError);
    EXPECT_TRUE(SemanticIndex(16).search(q, 3).empty());
}

TEST(SemanticIndex, ConstructorValidates)
{
    Rng rng(5);
    EXPECT_THROW(SemanticIndex(8, {{"a", 0}}, {}), ArgumentError);
    EXPECT_THROW(SemanticIndex(8, {{"a", 0}}, {random_unit(rng, 4)}), ArgumentError);
}

TEST(SemanticIndex, PersistenceIsBitExact)
{
    Rng rng(6);
    const auto idx = random_index(rng, 40, 32);
    std::stringstream a;
    idx.write(a);
    const std::string bytes = a.str();
    std::stringstream in(bytes);
    const auto back = SemanticIndex::read(in);
    ASSERT_EQ(back.size(), idx.size());
    EXPECT_EQ(back.page_refs(), idx.page_refs());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        EXPECT_TRUE(std::equal(idx.vector(i).begin(), idx.vector(i).end(), back.vector(i).begin()));
    }
    std::stringstream again;
    back.write(again);
    EXPECT_EQ(again.str(), bytes);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 7));
    EXPECT_THROW(SemanticIndex::read(truncated), CorruptionError);
}

TEST(Embed, BatchesAndRespectsInFlightLimit)
{
    CountingClient client(32);
    std::vector<std::string> texts;
    for (int i = 0; i < 70; ++i) {
        texts.push_back("text number " + std::to_string(i));
    }
    EmbedOptions opts;
    opts.dim = 32;
    opts.batch_size = 8;
    const auto vecs = embed(texts, client, opts);
    ASSERT_EQ(vecs.size(), 70u);
    EXPECT_EQ(client.calls(), 9);
    EXPECT_LE(client.peak(), 3);
    HashedEmbeddingClient plain(32);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto expected = EmbeddingVector::normalized(hashed_embedding(texts[i], 32));
        EXPECT_EQ(vecs[i], expected);
    }
    EXPECT_THROW(embed({}, client, opts), ArgumentError);
}

TEST(Embed, ThroughMockServer)
{
    MockServer server({.threads = 8, .embedding_dim = 64, .default_content = std::nullopt});
    HttpEmbeddingClient client(endpoint(server));
    EmbedOptions opts;
    opts.dim = 64;
    opts.batch_size = 4;
    std::vector<std::string> texts = {"e1", "alpha beta", "東京タワー", "x", "y", "z"};
    const auto vecs = embed(texts, client, opts);
    ASSERT_EQ(vecs.size(), texts.size());
    EXPECT_EQ(vecs[0], EmbeddingVector::normalized(hashed_embedding("e1", 64)));
    std::size_t embedding_requests = 0;
    for (const auto& e : server.request_log()) {
        embedding_requests += e.endpoint == "embeddings" ? 1 : 0;
    }
    EXPECT_EQ(embedding_requests, 2u);
}

TEST(Embed, CustomResponderPassesThrough)
{
    MockServer server({.threads = 4, .embedding_dim = 4, .default_content = std::nullopt});
    server.set_embedding_responder([](const std::string& s) {
        return s == "e1" ? std::vector<float>{1, 0, 0, 0} : std::vector<float>{0, 1, 0, 0};
    });
    HttpEmbeddingClient client(endpoint(server));
    const auto vecs = embed({"e1", "e2"}, client, {.dim = 4, .batch_size = 32, .max_in_flight = 0, .prefix = ""});
    EXPECT_EQ(vecs[0], EmbeddingVector::normalized({1, 0, 0, 0}));
    EXPECT_EQ(vecs[1], EmbeddingVector::normalized({0, 1, 0, 0}));
}

TEST(Embed, WrongDimensionIsContractError)
{
    MockServer server({.threads = 4, .embedding_dim = 512, .default_content = std::nullopt});
    HttpEmbeddingClient client(endpoint(server));
    EXPECT_THROW(embed({"a"}, client, {.dim = 1024, .batch_size = 32, .max_in_flight = 0, .prefix = ""}),
                 ContractError);
}

TEST(Embed, ServerErrorPropagatesAsTransport)
{
    MockServer server({.threads = 4, .embedding_dim = 16, .default_content = std::nullopt});
    server.fail_embeddings(10, 503);
    HttpEmbeddingClient client(endpoint(server));
    try {
        embed({"a"}, client, {.dim = 16, .batch_size = 32, .max_in_flight = 0, .prefix = ""});
        FAIL();
    } catch (const EndpointError& e) {
        EXPECT_EQ(e.status(), 503);
        EXPECT_EQ(e.category(), ErrorCategory::transport);
    }
}

TEST(SemanticIndex, BuildUsesPassagePrefix)
{
    std::vector<std::string> seen;
    std::mutex mu;
    class Recorder final : public EmbeddingClient {
    public:
        Recorder(std::vector<std::string>& s, std::mutex& m) : seen_(s), mu_(m) {}
        std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& inputs) override
        {
            std::lock_guard lock(mu_);
            seen_.insert(seen_.end(), inputs.begin(), inputs.end());
            std::vector<std::vector<float>> out;
            for (const auto& s : inputs) {
                out.push_back(hashed_embedding(s, 8));
            }
            return out;
        }

    private:
        std::vector<std::string>& seen_;
        std::mutex& mu_;
    } rec(seen, mu);
    const Corpus c = build_corpus({{"a", 0, "first page", {}}, {"a", 1, "second", {}}});
    const auto idx = SemanticIndex::build(c, rec, {.dim = 8, .batch_size = 32, .max_in_flight = 0, .prefix = ""});
    EXPECT_EQ(idx.size(), 2u);
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(seen, (std::vector<std::string>{"passage: first page", "passage: second"}));
}

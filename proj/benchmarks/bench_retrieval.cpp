#include <docqa/corpus.hpp>
#include <docqa/hybrid_retriever.hpp>
#include <docqa/lexical_index.hpp>
#include <docqa/semantic_index.hpp>
#include <docqa/text.hpp>
#include <docqa/tokenizer.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace docqa;

namespace {

std::string filler(std::mt19937_64& rng, std::size_t words)
{
    static const char* vocab[] = {"revenue", "growth", "segment", "margin", "売上", "営業利益", "fiscal", "2023",
                                  "12.5%",   "株式会社", "dividend", "capital", "東京", "supply", "demand"};
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        out += vocab[rng() % std::size(vocab)];
        out += ' ';
    }
    return out;
}

Corpus make_corpus(std::size_t pages)
{
    std::mt19937_64 rng(1);
    std::vector<PageRecord> records;
    for (std::size_t i = 0; i < pages; ++i) {
        PageRecord r;
        r.doc_id = "doc" + std::to_string(i / 20);
        r.page_index = i % 20;
        r.text = filler(rng, 300);
        records.push_back(std::move(r));
    }
    return build_corpus(records);
}

void BM_Tokenize(benchmark::State& state)
{
    std::mt19937_64 rng(2);
    const std::string text = normalize_text(filler(rng, 300));
    for (auto _ : state) {
        benchmark::DoNotOptimize(tokenize(text));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Tokenize);

void BM_LexicalBuild(benchmark::State& state)
{
    const Corpus c = make_corpus(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(LexicalIndex::build(c));
    }
}
BENCHMARK(BM_LexicalBuild)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_LexicalScore(benchmark::State& state)
{
    const Corpus c = make_corpus(static_cast<std::size_t>(state.range(0)));
    const auto idx = LexicalIndex::build(c);
    for (auto _ : state) {
        benchmark::DoNotOptimize(idx.score("営業利益 growth in the fiscal 2023 segment"));
    }
}
BENCHMARK(BM_LexicalScore)->Arg(100)->Arg(400);

void BM_SemanticSearch(benchmark::State& state)
{
    const auto pages = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const auto unit = [&] {
        std::vector<float> v(kDefaultEmbeddingDim);
        for (auto& x : v) {
            x = static_cast<float>(g(rng));
        }
        return EmbeddingVector::normalized(std::move(v));
    };
    std::vector<PageRef> refs;
    std::vector<EmbeddingVector> vectors;
    for (std::size_t i = 0; i < pages; ++i) {
        refs.push_back({"d", i});
        vectors.push_back(unit());
    }
    const SemanticIndex index(kDefaultEmbeddingDim, refs, vectors);
    const auto q = unit();
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.search(q, 10));
    }
}
BENCHMARK(BM_SemanticSearch)->Arg(1000)->Arg(10000);

void BM_FuseAndSelect(benchmark::State& state)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RankedPage> lex;
    std::vector<RankedPage> sem;
    for (std::size_t i = 0; i < 1000; ++i) {
        lex.push_back({{"d", i}, u(rng)});
        sem.push_back({{"d", (i * 7) % 1000}, u(rng)});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(select_adaptive(fuse(lex, sem, {}), {}));
    }
}
BENCHMARK(BM_FuseAndSelect);

}  // namespace

BENCHMARK_MAIN();

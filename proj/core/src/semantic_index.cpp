#include "docqa/semantic_index.hpp"

#include "binary_io.hpp"
#include "docqa/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace docqa {
namespace {

constexpr char kMagic[5] = "DQSV";

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::vector<float> values)
{
    double sq = 0.0;
    for (float x : values) {
        if (!std::isfinite(x)) {
            throw ContractError("embedding contains a non-finite value");
        }
        sq += static_cast<double>(x) * static_cast<double>(x);
    }
    if (sq == 0.0) {
        throw ContractError("embedding is the zero vector");
    }
    const double norm = std::sqrt(sq);
    for (float& x : values) {
        x = static_cast<float>(static_cast<double>(x) / norm);
    }
    return EmbeddingVector(std::move(values));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values)
{
    return EmbeddingVector(std::move(values));
}

double cosine_sim(std::span<const float> q, std::span<const float> d)
{
    if (q.size() != d.size()) {
        throw ArgumentError("dimension mismatch: " + std::to_string(q.size()) + " vs " + std::to_string(d.size()));
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        dot += static_cast<double>(q[i]) * static_cast<double>(d[i]);
    }
    return std::clamp(dot, -1.0, 1.0);
}

std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts, EmbeddingClient& client,
                                   const EmbedOptions& options)
{
    if (texts.empty()) {
        throw ArgumentError("embed called with no texts");
    }
    if (options.batch_size == 0 || options.dim == 0) {
        throw ArgumentError("embed batch_size and dim must be positive");
    }
    const std::size_t n_batches = (texts.size() + options.batch_size - 1) / options.batch_size;
    std::vector<std::vector<EmbeddingVector>> results(n_batches);
    std::vector<std::exception_ptr> errors(n_batches);

    const auto run_batch = [&](std::size_t b) {
        const std::size_t begin = b * options.batch_size;
        const std::size_t end = std::min(texts.size(), begin + options.batch_size);
        std::vector<std::string> inputs;
        inputs.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            inputs.push_back(options.prefix + texts[i]);
        }
        auto raw = client.embed_batch(inputs);
        if (raw.size() != inputs.size()) {
            throw ContractError("embedding endpoint returned " + std::to_string(raw.size()) + " vectors for " +
                                std::to_string(inputs.size()) + " inputs");
        }
        std::vector<EmbeddingVector> out;
        out.reserve(raw.size());
        for (auto& v : raw) {
            if (v.size() != options.dim) {
                throw ContractError("embedding dimension " + std::to_string(v.size()) + ", expected " +
                                    std::to_string(options.dim));
            }
            out.push_back(EmbeddingVector::normalized(std::move(v)));
        }
        results[b] = std::move(out);
    };

    std::size_t workers = options.max_in_flight != 0 ? options.max_in_flight : client.max_in_flight();
    workers = std::clamp<std::size_t>(workers, 1, n_batches);
    if (workers == 1) {
        for (std::size_t b = 0; b < n_batches; ++b) {
            run_batch(b);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t b = next++; b < n_batches; b = next++) {
                    try {
                        run_batch(b);
                    } catch (...) {
                        errors[b] = std::current_exception();
                    }
                }
            });
        }
        pool.clear();
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& batch : results) {
        for (auto& v : batch) {
            out.push_back(std::move(v));
        }
    }
    return out;
}

SemanticIndex::SemanticIndex(std::size_t dim, std::vector<PageRef> refs, const std::vector<EmbeddingVector>& vectors)
    : dim_(dim), refs_(std::move(refs))
{
    if (refs_.size() != vectors.size()) {
        throw ArgumentError("page_refs and vectors differ in length");
    }
    data_.reserve(vectors.size() * dim_);
    for (const EmbeddingVector& v : vectors) {
        if (v.dim() != dim_) {
            throw ArgumentError("vector of dimension " + std::to_string(v.dim()) + " in index of dimension " +
                                std::to_string(dim_));
        }
        data_.insert(data_.end(), v.values().begin(), v.values().end());
    }
}

SemanticIndex SemanticIndex::build(const Corpus& corpus, EmbeddingClient& client, const EmbedOptions& options,
                                   const PrefixConvention& prefixes)
{
    std::vector<std::string> texts;
    std::vector<PageRef> refs;
    texts.reserve(corpus.page_count());
    for (const Page& p : corpus.pages()) {
        texts.push_back(p.normalized_text);
        refs.push_back(p.ref());
    }
    EmbedOptions opt = options;
    opt.prefix = prefixes.passage;
    return SemanticIndex(options.dim, std::move(refs), embed(texts, client, opt));
}

std::span<const float> SemanticIndex::vector(std::size_t i) const
{
    if (i >= refs_.size()) {
        throw ArgumentError("semantic index position out of range");
    }
    return std::span<const float>(data_).subspan(i * dim_, dim_);
}

std::vector<RankedPage> SemanticIndex::score_all(const EmbeddingVector& q) const
{
    if (q.dim() != dim_) {
        throw ArgumentError("query dimension " + std::to_string(q.dim()) + ", index dimension " +
                            std::to_string(dim_));
    }
    std::vector<RankedPage> out;
    out.reserve(refs_.size());
    for (std::size_t i = 0; i < refs_.size(); ++i) {
        out.push_back({refs_[i], cosine_sim(q.values(), vector(i))});
    }
    sort_ranked(out);
    return out;
}

std::vector<RankedPage> SemanticIndex::search(const EmbeddingVector& q, std::size_t k) const
{
    if (k == 0) {
        throw ArgumentError("search k must be >= 1");
    }
    if (q.dim() != dim_) {
        throw ArgumentError("query dimension " + std::to_string(q.dim()) + ", index dimension " +
                            std::to_string(dim_));
    }
    std::vector<RankedPage> scored;
    scored.reserve(refs_.size());
    for (std::size_t i = 0; i < refs_.size(); ++i) {
        scored.push_back({refs_[i], cosine_sim(q.values(), vector(i))});
    }
    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), ranks_before);
    scored.resize(keep);
    return scored;
}

void SemanticIndex::write(std::ostream& out) const
{
    detail::write_magic(out, kMagic);
    detail::write_le<std::uint32_t>(out, kSemanticFormatVersion);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
    detail::write_le<std::uint64_t>(out, refs_.size());
    for (float x : data_) {
        detail::write_f32(out, x);
    }
    for (const PageRef& r : refs_) {
        detail::write_string(out, r.doc_id);
        detail::write_le<std::uint64_t>(out, r.page_index);
    }
}

SemanticIndex SemanticIndex::read(std::istream& in)
{
    detail::expect_magic(in, kMagic, "vector");
    const auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kSemanticFormatVersion) {
        throw VersionError("unsupported vector file version " + std::to_string(version));
    }
    const auto dim = detail::read_le<std::uint32_t>(in, "dim");
    const auto count = detail::read_le<std::uint64_t>(in, "count");
    if (dim == 0 || dim > (1u << 20) || count > (1ull << 32)) {
        throw CorruptionError("implausible vector file header");
    }
    SemanticIndex index(dim);
    index.data_.reserve(static_cast<std::size_t>(count) * dim);
    for (std::uint64_t i = 0; i < count * dim; ++i) {
        index.data_.push_back(detail::read_f32(in, "vector data"));
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        PageRef r;
        r.doc_id = detail::read_string(in, "doc_id");
        r.page_index = detail::read_le<std::uint64_t>(in, "page_index");
        index.refs_.push_back(std::move(r));
    }
    return index;
}

void save_semantic_index(const SemanticIndex& index, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    index.write(out);
    out.flush();
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

SemanticIndex load_semantic_index(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return SemanticIndex::read(in);
}

}  // namespace docqa

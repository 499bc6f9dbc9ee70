#include "docqa/lexical_index.hpp"

#include "binary_io.hpp"
#include "docqa/errors.hpp"
#include "docqa/text.hpp"
#include "docqa/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace docqa {
namespace {

constexpr char kMagic[5] = "DQLX";

using TermCounts = std::unordered_map<std::string, std::uint32_t>;

TermCounts count_features(std::string_view normalized, const LexicalOptions& opt)
{
    TermCounts counts;
    for (std::string& gram : ngrams(content_tokens(normalized), opt.n_min, opt.n_max)) {
        ++counts[std::move(gram)];
    }
    return counts;
}

void l2_normalize(SparseVector& v)
{
    double sq = 0.0;
    for (const auto& [id, w] : v) {
        sq += w * w;
    }
    if (sq <= 0.0) {
        v.clear();
        return;
    }
    const double norm = std::sqrt(sq);
    for (auto& [id, w] : v) {
        w /= norm;
    }
}

void validate(const LexicalOptions& opt)
{
    if (opt.max_features == 0) {
        throw ArgumentError("max_features must be positive");
    }
    if (opt.n_min < 1 || opt.n_max < opt.n_min) {
        throw ArgumentError("invalid n-gram range");
    }
}

}  // namespace

double sublinear_tf(std::uint32_t tf)
{
    return 1.0 + std::log(static_cast<double>(tf));
}

double smoothed_idf(std::size_t page_count, std::uint32_t df)
{
    return std::log((1.0 + static_cast<double>(page_count)) / (1.0 + static_cast<double>(df))) + 1.0;
}

Vocabulary::Vocabulary(std::vector<std::string> features, std::vector<std::uint32_t> df)
    : features_(std::move(features)), df_(std::move(df))
{
    if (features_.size() != df_.size()) {
        throw ArgumentError("vocabulary feature/df size mismatch");
    }
    ids_.reserve(features_.size());
    for (std::uint32_t i = 0; i < features_.size(); ++i) {
        if (!ids_.emplace(features_[i], i).second) {
            throw CorruptionError("duplicate vocabulary feature");
        }
    }
}

std::optional<std::uint32_t> Vocabulary::id(std::string_view feature) const
{
    const auto it = ids_.find(std::string(feature));
    if (it == ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

LexicalIndex::LexicalIndex(LexicalOptions options, Vocabulary vocabulary, std::vector<PageRef> refs,
                           std::vector<SparseVector> vectors)
    : options_(options), vocabulary_(std::move(vocabulary)), page_refs_(std::move(refs)),
      doc_vectors_(std::move(vectors))
{
    idf_.resize(vocabulary_.size());
    for (std::uint32_t i = 0; i < vocabulary_.size(); ++i) {
        idf_[i] = smoothed_idf(page_refs_.size(), vocabulary_.df(i));
    }
    build_postings();
}

void LexicalIndex::build_postings()
{
    postings_.assign(vocabulary_.size(), {});
    for (std::uint32_t page = 0; page < doc_vectors_.size(); ++page) {
        for (const auto& [id, w] : doc_vectors_[page]) {
            postings_[id].emplace_back(page, w);
        }
    }
}

LexicalIndex LexicalIndex::build(const Corpus& corpus, const LexicalOptions& options)
{
    validate(options);
    const std::size_t n_pages = corpus.page_count();

    std::vector<TermCounts> page_counts;
    page_counts.reserve(n_pages);
    std::unordered_map<std::string, std::uint32_t> df;
    for (const Page& page : corpus.pages()) {
        page_counts.push_back(count_features(page.normalized_text, options));
        for (const auto& [gram, tf] : page_counts.back()) {
            ++df[gram];
        }
    }

    std::vector<std::pair<std::string, std::uint32_t>> ranked(df.begin(), df.end());
    const auto by_df = [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    };
    const std::size_t keep = std::min(options.max_features, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), by_df);
    ranked.resize(keep);

    std::vector<std::string> features;
    std::vector<std::uint32_t> dfs;
    features.reserve(keep);
    dfs.reserve(keep);
    for (auto& [gram, count] : ranked) {
        features.push_back(std::move(gram));
        dfs.push_back(count);
    }
    Vocabulary vocab(std::move(features), std::move(dfs));

    std::vector<PageRef> refs;
    std::vector<SparseVector> vectors;
    refs.reserve(n_pages);
    vectors.reserve(n_pages);
    for (std::size_t p = 0; p < n_pages; ++p) {
        refs.push_back(corpus.pages()[p].ref());
        SparseVector v;
        for (const auto& [gram, tf] : page_counts[p]) {
            if (const auto id = vocab.id(gram)) {
                v.emplace_back(*id, sublinear_tf(tf) * smoothed_idf(n_pages, vocab.df(*id)));
            }
        }
        std::sort(v.begin(), v.end());
        l2_normalize(v);
        vectors.push_back(std::move(v));
    }
    return LexicalIndex(options, std::move(vocab), std::move(refs), std::move(vectors));
}

SparseVector LexicalIndex::vectorize(std::string_view text) const
{
    const TermCounts counts = count_features(normalize_text(text), options_);
    SparseVector v;
    for (const auto& [gram, tf] : counts) {
        if (const auto id = vocabulary_.id(gram)) {
            v.emplace_back(*id, sublinear_tf(tf) * idf_[*id]);
        }
    }
    std::sort(v.begin(), v.end());
    l2_normalize(v);
    return v;
}

std::vector<RankedPage> LexicalIndex::score(std::string_view query_text) const
{
    const SparseVector q = vectorize(query_text);
    if (q.empty()) {
        return {};
    }
    std::map<std::uint32_t, double> acc;
    for (const auto& [id, qw] : q) {
        for (const auto& [page, dw] : postings_[id]) {
            acc[page] += qw * dw;
        }
    }
    std::vector<RankedPage> out;
    out.reserve(acc.size());
    for (const auto& [page, s] : acc) {
        if (s > 0.0) {
            out.push_back({page_refs_[page], std::min(1.0, s)});
        }
    }
    sort_ranked(out);
    return out;
}

void LexicalIndex::write(std::ostream& out) const
{
    detail::write_magic(out, kMagic);
    detail::write_le<std::uint32_t>(out, kLexicalFormatVersion);
    detail::write_le<std::uint64_t>(out, page_refs_.size());
    detail::write_le<std::uint64_t>(out, vocabulary_.size());
    detail::write_le<std::uint64_t>(out, options_.max_features);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(options_.n_min));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(options_.n_max));
    for (std::uint32_t i = 0; i < vocabulary_.size(); ++i) {
        detail::write_string(out, vocabulary_.feature(i));
        detail::write_le<std::uint32_t>(out, vocabulary_.df(i));
    }
    for (std::size_t p = 0; p < page_refs_.size(); ++p) {
        detail::write_string(out, page_refs_[p].doc_id);
        detail::write_le<std::uint64_t>(out, page_refs_[p].page_index);
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(doc_vectors_[p].size()));
        for (const auto& [id, w] : doc_vectors_[p]) {
            detail::write_le<std::uint32_t>(out, id);
            detail::write_f64(out, w);
        }
    }
}

LexicalIndex LexicalIndex::read(std::istream& in)
{
    detail::expect_magic(in, kMagic, "lexical index");
    const auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kLexicalFormatVersion) {
        throw VersionError("unsupported lexical index version " + std::to_string(version));
    }
    const auto n_pages = detail::read_le<std::uint64_t>(in, "page count");
    const auto vocab_size = detail::read_le<std::uint64_t>(in, "vocabulary size");
    LexicalOptions opt;
    opt.max_features = detail::read_le<std::uint64_t>(in, "max_features");
    opt.n_min = static_cast<int>(detail::read_le<std::uint32_t>(in, "n_min"));
    opt.n_max = static_cast<int>(detail::read_le<std::uint32_t>(in, "n_max"));
    try {
        validate(opt);
    } catch (const ArgumentError& e) {
        throw CorruptionError(std::string("lexical index header: ") + e.what());
    }
    if (vocab_size > opt.max_features) {
        throw CorruptionError("vocabulary larger than max_features");
    }

    std::vector<std::string> features;
    std::vector<std::uint32_t> dfs;
    for (std::uint64_t i = 0; i < vocab_size; ++i) {
        features.push_back(detail::read_string(in, "feature"));
        const auto df = detail::read_le<std::uint32_t>(in, "df");
        if (df == 0 || df > n_pages) {
            throw CorruptionError("document frequency out of range");
        }
        dfs.push_back(df);
    }
    Vocabulary vocab(std::move(features), std::move(dfs));

    std::vector<PageRef> refs;
    std::vector<SparseVector> vectors;
    for (std::uint64_t p = 0; p < n_pages; ++p) {
        PageRef ref;
        ref.doc_id = detail::read_string(in, "doc_id");
        ref.page_index = detail::read_le<std::uint64_t>(in, "page_index");
        const auto nnz = detail::read_le<std::uint32_t>(in, "vector length");
        if (nnz > vocab_size) {
            throw CorruptionError("sparse vector longer than vocabulary");
        }
        SparseVector v;
        v.reserve(nnz);
        for (std::uint32_t k = 0; k < nnz; ++k) {
            const auto id = detail::read_le<std::uint32_t>(in, "feature id");
            const double w = detail::read_f64(in, "weight");
            if (id >= vocab_size || !(w > 0.0)) {
                throw CorruptionError("invalid sparse vector entry");
            }
            v.emplace_back(id, w);
        }
        refs.push_back(std::move(ref));
        vectors.push_back(std::move(v));
    }
    return LexicalIndex(opt, std::move(vocab), std::move(refs), std::move(vectors));
}

void save_lexical_index(const LexicalIndex& index, const std::filesystem::path& path)
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

LexicalIndex load_lexical_index(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return LexicalIndex::read(in);
}

}  // namespace docqa

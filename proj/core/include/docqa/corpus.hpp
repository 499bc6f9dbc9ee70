#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace docqa {

/// (doc_id, page_index) identifies a page. Ordering is the tie-break used by
/// every ranked list in the engine.
struct PageRef {
    std::string doc_id;
    std::size_t page_index = 0;

    friend auto operator<=>(const PageRef&, const PageRef&) = default;
    friend bool operator==(const PageRef&, const PageRef&) = default;
};

std::string to_string(const PageRef& ref);

/// One input line of the ingest stream, before normalization.
struct PageRecord {
    std::string doc_id;
    std::size_t page_index = 0;
    std::string text;
    /// Opaque image payload (URL or data URI) forwarded to the vision model.
    std::string image;
};

struct Page {
    std::string doc_id;
    std::size_t page_index = 0;
    std::string raw_text;
    std::string normalized_text;
    std::size_t char_count = 0;
    std::size_t numeric_token_count = 0;

    PageRef ref() const { return {doc_id, page_index}; }

    friend bool operator==(const Page&, const Page&) = default;
};

Page make_page(std::string doc_id, std::size_t page_index, std::string raw_text);

/// Immutable, validated page collection sorted by PageRef.
class Corpus {
public:
    /// Throws EmptyCorpusError, ConflictError (duplicate key) or GapError
    /// (page indices of a document not contiguous from 0).
    explicit Corpus(std::vector<Page> pages);

    const std::vector<Page>& pages() const noexcept { return pages_; }
    std::size_t page_count() const noexcept { return pages_.size(); }
    std::size_t doc_count() const noexcept { return doc_ids_.size(); }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }

    /// Number of pages of `doc_id`, 0 when unknown.
    std::size_t pages_in_doc(const std::string& doc_id) const;
    const Page* find(const PageRef& ref) const;
    /// Position of `ref` in pages(), if present.
    std::optional<std::size_t> position(const PageRef& ref) const;

    friend bool operator==(const Corpus& a, const Corpus& b) { return a.pages_ == b.pages_; }

private:
    std::vector<Page> pages_;
    std::vector<std::string> doc_ids_;
    std::vector<std::size_t> doc_offsets_;
};

/// Parses line-delimited JSON records {"doc_id", "page_index", "text"[, "image"]}.
/// Blank lines are skipped. Throws ParseError carrying the 1-based line number.
std::vector<PageRecord> read_page_records(std::istream& in);

Corpus build_corpus(const std::vector<PageRecord>& records);
Corpus ingest(std::istream& in);

inline constexpr int kCorpusFormatVersion = 1;

void write_corpus(const Corpus& corpus, std::ostream& out);
Corpus read_corpus(std::istream& in);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace docqa

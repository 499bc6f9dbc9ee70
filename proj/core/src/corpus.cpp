#include "docqa/corpus.hpp"

#include "docqa/errors.hpp"
#include "docqa/text.hpp"
#include "docqa/tokenizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

namespace docqa {

using nlohmann::json;

namespace {

constexpr const char* kCorpusFormatName = "docqa-corpus";

std::string dump_line(const json& j)
{
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace

std::string to_string(const PageRef& ref)
{
    return ref.doc_id + "#" + std::to_string(ref.page_index);
}

Page make_page(std::string doc_id, std::size_t page_index, std::string raw_text)
{
    Page page;
    page.doc_id = std::move(doc_id);
    page.page_index = page_index;
    page.normalized_text = normalize_text(raw_text);
    page.raw_text = std::move(raw_text);
    page.char_count = text::code_point_length(page.normalized_text);
    for (const Token& t : tokenize(page.normalized_text)) {
        if (t.kind == TokenKind::number) {
            ++page.numeric_token_count;
        }
    }
    return page;
}

Corpus::Corpus(std::vector<Page> pages) : pages_(std::move(pages))
{
    if (pages_.empty()) {
        throw EmptyCorpusError("corpus has no pages");
    }
    std::sort(pages_.begin(), pages_.end(),
              [](const Page& a, const Page& b) { return a.ref() < b.ref(); });

    for (std::size_t i = 1; i < pages_.size(); ++i) {
        if (pages_[i - 1].ref() == pages_[i].ref()) {
            throw ConflictError("duplicate page " + to_string(pages_[i].ref()));
        }
    }

    std::size_t expected = 0;
    for (std::size_t i = 0; i < pages_.size(); ++i) {
        const Page& p = pages_[i];
        if (i == 0 || p.doc_id != pages_[i - 1].doc_id) {
            doc_ids_.push_back(p.doc_id);
            doc_offsets_.push_back(i);
            expected = 0;
        }
        if (p.page_index != expected) {
            throw GapError("document '" + p.doc_id + "' is missing page " + std::to_string(expected));
        }
        ++expected;
    }
    doc_offsets_.push_back(pages_.size());
}

std::size_t Corpus::pages_in_doc(const std::string& doc_id) const
{
    const auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), doc_id);
    if (it == doc_ids_.end() || *it != doc_id) {
        return 0;
    }
    const auto d = static_cast<std::size_t>(it - doc_ids_.begin());
    return doc_offsets_[d + 1] - doc_offsets_[d];
}

std::optional<std::size_t> Corpus::position(const PageRef& ref) const
{
    const auto it = std::lower_bound(pages_.begin(), pages_.end(), ref,
                                     [](const Page& p, const PageRef& r) { return p.ref() < r; });
    if (it == pages_.end() || it->doc_id != ref.doc_id || it->page_index != ref.page_index) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - pages_.begin());
}

const Page* Corpus::find(const PageRef& ref) const
{
    const auto pos = position(ref);
    return pos ? &pages_[*pos] : nullptr;
}

std::vector<PageRecord> read_page_records(std::istream& in)
{
    std::vector<PageRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) {
            throw ParseError(line_no, "record is not an object");
        }
        const auto doc = j.find("doc_id");
        const auto idx = j.find("page_index");
        const auto txt = j.find("text");
        if (doc == j.end() || !doc->is_string() || doc->get_ref<const std::string&>().empty()) {
            throw ParseError(line_no, "missing or empty string field 'doc_id'");
        }
        if (idx == j.end() || !idx->is_number_integer() || idx->get<long long>() < 0) {
            throw ParseError(line_no, "missing or negative integer field 'page_index'");
        }
        if (txt == j.end() || !txt->is_string()) {
            throw ParseError(line_no, "missing string field 'text'");
        }
        PageRecord rec;
        rec.doc_id = doc->get<std::string>();
        rec.page_index = idx->get<std::size_t>();
        rec.text = txt->get<std::string>();
        if (const auto img = j.find("image"); img != j.end() && img->is_string()) {
            rec.image = img->get<std::string>();
        }
        records.push_back(std::move(rec));
    }
    return records;
}

Corpus build_corpus(const std::vector<PageRecord>& records)
{
    std::vector<Page> pages;
    pages.reserve(records.size());
    for (const PageRecord& r : records) {
        pages.push_back(make_page(r.doc_id, r.page_index, r.text));
    }
    return Corpus(std::move(pages));
}

Corpus ingest(std::istream& in)
{
    return build_corpus(read_page_records(in));
}

void write_corpus(const Corpus& corpus, std::ostream& out)
{
    json header = {
        {"format", kCorpusFormatName},
        {"version", kCorpusFormatVersion},
        {"page_count", corpus.page_count()},
    };
    out << dump_line(header) << '\n';
    for (const Page& p : corpus.pages()) {
        json rec = {
            {"doc_id", p.doc_id},
            {"page_index", p.page_index},
            {"raw_text", p.raw_text},
            {"normalized_text", p.normalized_text},
            {"char_count", p.char_count},
            {"numeric_token_count", p.numeric_token_count},
        };
        out << dump_line(rec) << '\n';
    }
}

Corpus read_corpus(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw CorruptionError("corpus file is empty");
    }
    json header;
    try {
        header = json::parse(line);
    } catch (const json::parse_error&) {
        throw CorruptionError("corpus header is not valid JSON");
    }
    if (!header.is_object() || header.value("format", "") != kCorpusFormatName) {
        throw CorruptionError("not a corpus file");
    }
    const auto version = header.find("version");
    if (version == header.end() || !version->is_number_integer()) {
        throw CorruptionError("corpus header has no version");
    }
    if (version->get<int>() != kCorpusFormatVersion) {
        throw VersionError("unsupported corpus format version " + std::to_string(version->get<int>()));
    }
    const auto count_it = header.find("page_count");
    if (count_it == header.end() || !count_it->is_number_unsigned()) {
        throw CorruptionError("corpus header has no page_count");
    }
    const auto page_count = count_it->get<std::size_t>();

    std::vector<Page> pages;
    pages.reserve(page_count);
    for (std::size_t i = 0; i < page_count; ++i) {
        if (!std::getline(in, line)) {
            throw CorruptionError("corpus truncated: expected " + std::to_string(page_count) +
                                  " pages, found " + std::to_string(i));
        }
        try {
            const json rec = json::parse(line);
            Page p;
            p.doc_id = rec.at("doc_id").get<std::string>();
            p.page_index = rec.at("page_index").get<std::size_t>();
            p.raw_text = rec.at("raw_text").get<std::string>();
            p.normalized_text = rec.at("normalized_text").get<std::string>();
            p.char_count = rec.at("char_count").get<std::size_t>();
            p.numeric_token_count = rec.at("numeric_token_count").get<std::size_t>();
            if (p.char_count != text::code_point_length(p.normalized_text)) {
                throw CorruptionError("char_count mismatch for " + to_string(p.ref()));
            }
            pages.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw CorruptionError("corrupt page record " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    while (std::getline(in, line)) {
        if (!text::trim(line).empty()) {
            throw CorruptionError("trailing data after " + std::to_string(page_count) + " pages");
        }
    }
    return Corpus(std::move(pages));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_corpus(corpus, out);
    out.flush();
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

Corpus load_corpus(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_corpus(in);
}

}  // namespace docqa

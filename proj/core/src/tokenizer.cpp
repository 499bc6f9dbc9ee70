#include "docqa/tokenizer.hpp"

#include "docqa/errors.hpp"
#include "docqa/text.hpp"

#include <algorithm>

namespace docqa {

std::string_view to_string(TokenKind kind)
{
    switch (kind) {
    case TokenKind::cjk_gram: return "cjk_gram";
    case TokenKind::latin_word: return "latin_word";
    case TokenKind::number: return "number";
    case TokenKind::symbol: return "symbol";
    }
    return "unknown";
}

namespace {

void emit_cjk_run(std::u32string_view run, std::vector<Token>& out)
{
    if (run.size() == 1) {
        out.push_back({text::encode_utf8(run), TokenKind::cjk_gram});
        return;
    }
    for (std::size_t i = 0; i + 1 < run.size(); ++i) {
        out.push_back({text::encode_utf8(run.substr(i, 2)), TokenKind::cjk_gram});
    }
    if (run.size() == 3 || run.size() == 4) {
        out.push_back({text::encode_utf8(run), TokenKind::cjk_gram});
    }
}

}  // namespace

std::vector<Token> tokenize(std::string_view normalized_text)
{
    const std::u32string cps = text::decode_utf8(normalized_text);
    const std::u32string_view s = cps;
    const std::size_t n = s.size();
    std::vector<Token> out;

    std::size_t i = 0;
    while (i < n) {
        const char32_t cp = s[i];
        if (text::is_whitespace(cp)) {
            ++i;
            continue;
        }

        if (text::is_cjk(cp)) {
            std::size_t j = i;
            while (j < n && text::is_cjk(s[j])) {
                ++j;
            }
            emit_cjk_run(s.substr(i, j - i), out);
            i = j;
            continue;
        }

        if (text::is_word_char(cp)) {
            std::size_t j = i;
            while (j < n && text::is_word_char(s[j])) {
                ++j;
            }
            const bool all_digits =
                std::all_of(s.begin() + i, s.begin() + j, [](char32_t c) { return text::is_ascii_digit(c); });
            if (all_digits) {
                if (j + 1 < n && s[j] == U'.' && text::is_ascii_digit(s[j + 1])) {
                    j += 1;
                    while (j < n && text::is_ascii_digit(s[j])) {
                        ++j;
                    }
                }
                if (j < n && s[j] == U'%') {
                    ++j;
                }
                out.push_back({text::encode_utf8(s.substr(i, j - i)), TokenKind::number});
            } else {
                std::string word;
                for (std::size_t k = i; k < j; ++k) {
                    text::append_utf8(word, text::to_lower(s[k]));
                }
                out.push_back({std::move(word), TokenKind::latin_word});
            }
            i = j;
            continue;
        }

        std::string sym;
        text::append_utf8(sym, cp);
        out.push_back({std::move(sym), TokenKind::symbol});
        ++i;
    }
    return out;
}

std::vector<std::string> ngrams(const std::vector<Token>& tokens, int n_min, int n_max)
{
    if (n_min < 1 || n_max < n_min) {
        throw ArgumentError("invalid n-gram range [" + std::to_string(n_min) + ", " +
                            std::to_string(n_max) + "]");
    }
    std::vector<std::string> grams;
    const std::size_t t = tokens.size();
    for (std::size_t len = static_cast<std::size_t>(n_min); len <= static_cast<std::size_t>(n_max) && len <= t;
         ++len) {
        for (std::size_t start = 0; start + len <= t; ++start) {
            std::string gram = tokens[start].text;
            for (std::size_t k = start + 1; k < start + len; ++k) {
                gram.append(kGramSeparator);
                gram.append(tokens[k].text);
            }
            grams.push_back(std::move(gram));
        }
    }
    return grams;
}

std::vector<Token> content_tokens(std::string_view normalized_text)
{
    std::vector<Token> tokens = tokenize(normalized_text);
    std::erase_if(tokens, [](const Token& t) { return t.kind == TokenKind::symbol; });
    return tokens;
}

}  // namespace docqa

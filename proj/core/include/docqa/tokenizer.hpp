#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace docqa {

enum class TokenKind {
    cjk_gram,
    latin_word,
    number,
    symbol,
};

std::string_view to_string(TokenKind kind);

struct Token {
    std::string text;
    TokenKind kind;

    friend bool operator==(const Token&, const Token&) = default;
};

/// Joins the tokens of an n-gram. U+001F is stripped by normalize_text, so it
/// never occurs inside a token.
inline constexpr std::string_view kGramSeparator = "\x1f";

/// Splits normalized text into tokens, in source order.
///
///   - maximal alphanumeric runs containing a letter -> latin_word (lowercased)
///   - digit runs, optionally with ".digits" and a trailing '%' -> number
///   - CJK runs -> overlapping character bigrams, followed by the whole run
///     when it is 3 or 4 characters long (a 1-character run is emitted as
///     itself; a 2-character run is its single bigram)
///   - any other non-whitespace code point -> symbol
std::vector<Token> tokenize(std::string_view normalized_text);

/// Contiguous n-grams for every n in [n_min, n_max], grouped by n ascending
/// and by position within each group. Throws ArgumentError unless
/// 1 <= n_min <= n_max.
std::vector<std::string> ngrams(const std::vector<Token>& tokens, int n_min, int n_max);

/// Tokens with kind != symbol; this is the stream the lexical features and
/// overlap gates are built from.
std::vector<Token> content_tokens(std::string_view normalized_text);

}  // namespace docqa

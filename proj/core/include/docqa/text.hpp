#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace docqa {

/// Canonical text form shared by every index and gate.
///
/// Steps, in order: ASCII/Unicode line and tab controls become spaces, the
/// remaining control and zero-width characters are dropped, the result is
/// NFKC-normalized (this folds full-width ASCII and the ideographic space to
/// their half-width forms), and whitespace runs are collapsed to one space
/// with both ends trimmed. Invalid UTF-8 decodes to U+FFFD. The function is
/// total and idempotent.
std::string normalize_text(std::string_view raw);

namespace text {

std::u32string decode_utf8(std::string_view utf8);
std::string encode_utf8(std::u32string_view code_points);
void append_utf8(std::string& out, char32_t cp);

/// Length in Unicode code points.
std::size_t code_point_length(std::string_view utf8);

bool is_whitespace(char32_t cp);
bool is_ascii_digit(char32_t cp);
/// Han, kana (including the prolonged sound mark and iteration marks) and Hangul.
bool is_cjk(char32_t cp);
/// Alphabetic or numeric characters outside the CJK ranges.
bool is_word_char(char32_t cp);
char32_t to_lower(char32_t cp);

std::string_view trim(std::string_view s);
/// Splits on '\n'; a trailing '\r' is removed from each line.
std::vector<std::string_view> split_lines(std::string_view s);

}  // namespace text
}  // namespace docqa

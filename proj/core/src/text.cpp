#include "docqa/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/uscript.h>

#include <stdexcept>

namespace docqa {
namespace {

bool is_line_or_tab_control(char32_t cp)
{
    switch (cp) {
    case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0x2028: case 0x2029:
        return true;
    default:
        return false;
    }
}

bool is_dropped(char32_t cp)
{
    switch (cp) {
    case 0x00AD:  // soft hyphen
    case 0x200B: case 0x200C: case 0x200D:
    case 0x2060: case 0xFEFF:
        return true;
    default:
        return u_charType(static_cast<UChar32>(cp)) == U_CONTROL_CHAR;
    }
}

const icu::Normalizer2& nfkc()
{
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status) || n == nullptr) {
        throw std::runtime_error("ICU NFKC normalizer unavailable");
    }
    return *n;
}

}  // namespace

std::string normalize_text(std::string_view raw)
{
    if (raw.empty()) {
        return {};
    }

    std::u32string cleaned;
    cleaned.reserve(raw.size());
    for (char32_t cp : text::decode_utf8(raw)) {
        if (is_line_or_tab_control(cp)) {
            cleaned.push_back(U' ');
        } else if (!is_dropped(cp)) {
            cleaned.push_back(cp);
        }
    }

    icu::UnicodeString src = icu::UnicodeString::fromUTF32(
        reinterpret_cast<const UChar32*>(cleaned.data()), static_cast<int32_t>(cleaned.size()));
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString folded = nfkc().normalize(src, status);
    if (U_FAILURE(status)) {
        throw std::runtime_error("NFKC normalization failed");
    }

    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (int32_t i = 0; i < folded.length();) {
        const UChar32 cp = folded.char32At(i);
        i += U16_LENGTH(cp);
        if (u_isUWhiteSpace(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        text::append_utf8(out, static_cast<char32_t>(cp));
    }
    return out;
}

namespace text {

std::u32string decode_utf8(std::string_view utf8)
{
    std::u32string out;
    out.reserve(utf8.size());
    const auto* s = reinterpret_cast<const unsigned char*>(utf8.data());
    const std::size_t n = utf8.size();
    std::size_t i = 0;
    while (i < n) {
        const unsigned char c = s[i];
        char32_t cp = 0;
        std::size_t len = 0;
        char32_t min = 0;
        if (c < 0x80) {
            out.push_back(c);
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F; len = 2; min = 0x80;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F; len = 3; min = 0x800;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07; len = 4; min = 0x10000;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        std::size_t k = 1;
        for (; k < len && i + k < n; ++k) {
            if ((s[i + k] & 0xC0) != 0x80) {
                break;
            }
            cp = (cp << 6) | (s[i + k] & 0x3F);
        }
        if (k != len || cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            out.push_back(0xFFFD);
            i += k;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void append_utf8(std::string& out, char32_t cp)
{
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode_utf8(std::u32string_view code_points)
{
    std::string out;
    out.reserve(code_points.size());
    for (char32_t cp : code_points) {
        append_utf8(out, cp);
    }
    return out;
}

std::size_t code_point_length(std::string_view utf8)
{
    std::size_t count = 0;
    for (unsigned char c : utf8) {
        if ((c & 0xC0) != 0x80) {
            ++count;
        }
    }
    return count;
}

bool is_whitespace(char32_t cp)
{
    return u_isUWhiteSpace(static_cast<UChar32>(cp));
}

bool is_ascii_digit(char32_t cp)
{
    return cp >= U'0' && cp <= U'9';
}

bool is_cjk(char32_t cp)
{
    switch (cp) {
    case 0x3005: case 0x3006: case 0x3007: case 0x303B:
    case 0x30FC: case 0xFF70:
        return true;
    default:
        break;
    }
    UErrorCode status = U_ZERO_ERROR;
    const UScriptCode script = uscript_getScript(static_cast<UChar32>(cp), &status);
    if (U_FAILURE(status)) {
        return false;
    }
    return script == USCRIPT_HAN || script == USCRIPT_HIRAGANA || script == USCRIPT_KATAKANA ||
           script == USCRIPT_HANGUL;
}

bool is_word_char(char32_t cp)
{
    if (cp < 0x80) {
        return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || is_ascii_digit(cp);
    }
    return !is_cjk(cp) && u_isalnum(static_cast<UChar32>(cp));
}

char32_t to_lower(char32_t cp)
{
    if (cp < 0x80) {
        return (cp >= U'A' && cp <= U'Z') ? cp + 32 : cp;
    }
    return static_cast<char32_t>(u_tolower(static_cast<UChar32>(cp)));
}

std::string_view trim(std::string_view s)
{
    const auto is_space = [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    };
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_lines(std::string_view s)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t end = s.find('\n', start);
        if (end == std::string_view::npos) {
            end = s.size();
        }
        std::string_view line = s.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        if (end == s.size()) {
            break;
        }
        start = end + 1;
    }
    return lines;
}

}  // namespace text
}  // namespace docqa

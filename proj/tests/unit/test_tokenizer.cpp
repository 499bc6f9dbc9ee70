#include <docqa/errors.hpp>
#include <docqa/text.hpp>
#include <docqa/tokenizer.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace docqa;

namespace {

std::vector<Token> toks(std::initializer_list<std::pair<const char*, TokenKind>> list)
{
    std::vector<Token> out;
    for (const auto& [t, k] : list) {
        out.push_back({t, k});
    }
    return out;
}

std::vector<Token> words(std::initializer_list<const char*> list)
{
    std::vector<Token> out;
    for (const char* w : list) {
        out.push_back({w, TokenKind::latin_word});
    }
    return out;
}

}  // namespace

TEST(Tokenize, LatinWordAndPercentNumber)
{
    EXPECT_EQ(tokenize("GDP 12.5%"), toks({{"gdp", TokenKind::latin_word}, {"12.5%", TokenKind::number}}));
}

TEST(Tokenize, Empty)
{
    EXPECT_TRUE(tokenize("").empty());
}

TEST(Tokenize, ShortCjkRunGivesBigramsAndWholeRun)
{
    EXPECT_EQ(tokenize("東京都"),
              toks({{"東京", TokenKind::cjk_gram}, {"京都", TokenKind::cjk_gram}, {"東京都", TokenKind::cjk_gram}}));
}

TEST(Tokenize, LongCjkRunGivesOnlyBigrams)
{
    const auto t = tokenize("株式会社日本");
    ASSERT_EQ(t.size(), 5u);
    for (const auto& tok : t) {
        EXPECT_EQ(tok.kind, TokenKind::cjk_gram);
        EXPECT_EQ(text::code_point_length(tok.text), 2u);
    }
}

TEST(Tokenize, SingleCjkCharacterAndSymbols)
{
    EXPECT_EQ(tokenize("円、"), toks({{"円", TokenKind::cjk_gram}, {"、", TokenKind::symbol}}));
}

TEST(Tokenize, MixedAlphanumericIdentifierIsOneWord)
{
    EXPECT_EQ(tokenize("iPhone15 v2"), words({"iphone15", "v2"}));
}

TEST(Tokenize, MixedScriptsSplitAtScriptBoundaries)
{
    const auto t = tokenize("売上高は120億円でGDPの3%");
    std::vector<std::string> texts;
    for (const auto& tok : t) {
        texts.push_back(tok.text);
    }
    EXPECT_NE(std::find(texts.begin(), texts.end(), "120"), texts.end());
    EXPECT_NE(std::find(texts.begin(), texts.end(), "gdp"), texts.end());
    EXPECT_NE(std::find(texts.begin(), texts.end(), "3%"), texts.end());
    EXPECT_NE(std::find(texts.begin(), texts.end(), "億円"), texts.end());
}

TEST(Ngrams, UnigramsAndBigrams)
{
    const auto g = ngrams(words({"a", "b", "c"}), 1, 2);
    const std::string sep(kGramSeparator);
    EXPECT_EQ(g, (std::vector<std::string>{"a", "b", "c", "a" + sep + "b", "b" + sep + "c"}));
}

TEST(Ngrams, ShortInput)
{
    EXPECT_EQ(ngrams(words({"a"}), 1, 5), std::vector<std::string>{"a"});
}

TEST(Ngrams, CountFollowsArithmeticSeries)
{
    std::vector<Token> t;
    for (int i = 0; i < 10; ++i) {
        t.push_back({"w" + std::to_string(i), TokenKind::latin_word});
    }
    EXPECT_EQ(ngrams(t, 1, 5).size(), 40u);
    for (std::size_t n = 0; n <= 12; ++n) {
        std::vector<Token> ts(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(n, 10)));
        for (int k = 1; k <= 6; ++k) {
            std::size_t expected = 0;
            for (std::size_t m = 1; m <= std::min<std::size_t>(static_cast<std::size_t>(k), ts.size()); ++m) {
                expected += ts.size() - m + 1;
            }
            EXPECT_EQ(ngrams(ts, 1, k).size(), expected);
        }
    }
}

TEST(Ngrams, InvalidRangeThrows)
{
    EXPECT_THROW(ngrams(words({"a"}), 0, 2), ArgumentError);
    EXPECT_THROW(ngrams(words({"a"}), 3, 2), ArgumentError);
}

TEST(TokenizeProperty, CoverageAndWellFormedTokens)
{
    const std::vector<std::string> pool = {"東", "京", "都", "の", "カ", "ー", "ド", "A", "b", "7", "%", ".",
                                           " ", "、", "(", "年", "度", "x", "9", "▲", "한", "국", "é"};
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<std::size_t> len(0, 30);
    for (int trial = 0; trial < 1000; ++trial) {
        std::string raw;
        const std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) {
            raw += pool[pick(rng)];
        }
        const std::string norm = normalize_text(raw);
        const auto tokens = tokenize(norm);
        EXPECT_EQ(tokens, tokenize(norm));

        std::u32string covered;
        for (const auto& t : tokens) {
            ASSERT_FALSE(t.text.empty());
            EXPECT_EQ(t.text.find(' '), std::string::npos);
            EXPECT_EQ(t.text.find('\x1f'), std::string::npos);
            covered += text::decode_utf8(t.text);
        }
        for (char32_t cp : text::decode_utf8(norm)) {
            if (text::is_whitespace(cp)) {
                continue;
            }
            const char32_t lowered = text::to_lower(cp);
            EXPECT_TRUE(covered.find(cp) != std::u32string::npos || covered.find(lowered) != std::u32string::npos)
                << "character lost from '" << norm << "'";
        }
    }
}

TEST(ContentTokens, DropsSymbols)
{
    for (const auto& t : content_tokens("東京、2024年!")) {
        EXPECT_NE(t.kind, TokenKind::symbol);
    }
}

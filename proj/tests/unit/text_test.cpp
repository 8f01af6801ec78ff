#include <doctest.h>

#include "llmref/gateway.hpp"
#include "llmref/text.hpp"

using namespace llmref;

TEST_SUITE("text") {
  TEST_CASE("whitespace normalisation") {
    CHECK(text::normalize_whitespace("  a \t b\n\nc  ") == "a b c");
    CHECK(text::normalize("Direct  S2ST\nModels") == "direct s2st models");
    CHECK(text::trim("\n x \t") == "x");
  }

  TEST_CASE("sentence splitting keeps abbreviations and initials together") {
    auto s = text::split_sentences("Jia et al. proposed it. See Fig. 2 for details. J. Smith agreed! (Yes.) Done");
    REQUIRE(s.size() == 5);
    CHECK(s[0] == "Jia et al. proposed it.");
    CHECK(s[1] == "See Fig. 2 for details.");
    CHECK(s[2] == "J. Smith agreed!");
    CHECK(s[3] == "(Yes.)");
    CHECK(s[4] == "Done");
  }

  TEST_CASE("sentence spans index the original text") {
    std::string t = "First one.  Second [3] here.";
    auto spans = text::sentence_spans(t);
    REQUIRE(spans.size() == 2);
    CHECK(t.substr(spans[1].begin, spans[1].end - spans[1].begin) == "Second [3] here.");
  }

  TEST_CASE("words, n-grams and jaccard") {
    CHECK(text::words("HuBERT-based units, 2021!") == std::vector<std::string>{"hubert", "based", "units", "2021"});
    auto a = text::word_ngrams("a b c d", 2);
    CHECK(a.size() == 3);
    CHECK(text::jaccard(a, a) == 1.0);
    CHECK(text::jaccard(text::word_ngrams("a b", 1), text::word_ngrams("b c", 1)) == doctest::Approx(1.0 / 3));
    CHECK(text::jaccard({}, {}) == 0.0);
  }

  TEST_CASE("word-boundary search") {
    CHECK(text::contains_word_icase("Lee, A. and Jia, Y.", "jia"));
    CHECK_FALSE(text::contains_word_icase("Jiang, X.", "Jia"));
  }

  TEST_CASE("truncate at word boundary") {
    CHECK(text::truncate_words("alpha beta gamma", 12) == "alpha beta");
    CHECK(text::truncate_words("short", 10) == "short");
    CHECK(text::truncate_words("alpha beta gamma", 12).size() <= 12);
  }

  TEST_CASE("token estimate is ceil(code points / 4)") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("abc") == 1);
    CHECK(estimate_tokens("abcd") == 1);
    CHECK(estimate_tokens("abcde") == 2);
    CHECK(estimate_tokens("ééé") == 1);  // 3 code points, 6 bytes
    CHECK(estimate_tokens(std::string(880, 'x')) == 220);
  }
}

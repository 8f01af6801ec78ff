#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "llmref/corpus.hpp"
#include "llmref/error.hpp"
#include "llmref/ingest.hpp"
#include "scripted.hpp"

using namespace llmref;

TEST_SUITE("corpus") {
  TEST_CASE("minimal fixture loads and validates") {
    Corpus c = load_corpus(std::filesystem::path(LLMREF_FIXTURES) / "minimal_corpus.json");
    REQUIRE(c.documents.size() == 1);
    CHECK(c.paragraph_count() == 1);
    const Paragraph& p = get_paragraph(c, "d1/0/1");
    REQUIRE(p.markers.size() == 1);
    CHECK(p.markers[0].cited == std::vector<ReferenceKey>{1});
    CHECK(c.summaries.at("d1/0/1").summary_text == "Units help.");
    validate(c);
  }

  TEST_CASE("json round trip is lossless") {
    auto f = llmref::testing::sample_fixture();
    Corpus back = corpus_from_json_string(corpus_to_json_string(f.corpus));
    CHECK(back == f.corpus);
  }

  TEST_CASE("save then load") {
    auto path = std::filesystem::temp_directory_path() / "llmref_corpus_test.json";
    auto f = llmref::testing::sample_fixture();
    save_corpus(f.corpus, path);
    CHECK(load_corpus(path) == f.corpus);
    std::filesystem::remove(path);
  }

  TEST_CASE("para ids") {
    CHECK(make_para_id("abc", "0.2.1", 3) == "abc/0.2.1/3");
    CHECK(doc_id_of("abc/0.2.1/3") == "abc");
  }

  TEST_CASE("lookup errors") {
    Corpus c;
    CHECK(find_paragraph(c, "x/0/1") == nullptr);
    CHECK_THROWS_AS(get_paragraph(c, "x/0/1"), Error);
    try {
      get_paragraph(c, "x/0/1");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::not_found);
    }
  }

  TEST_CASE("validation catches broken invariants") {
    auto f = llmref::testing::sample_fixture();
    SUBCASE("duplicate document") {
      f.corpus.documents.push_back(f.corpus.documents.front());
    }
    SUBCASE("summary for unknown paragraph") {
      f.corpus.summaries["nope/0/1"] = ParagraphSummary{"nope/0/1", "s", "m", "t", 1};
    }
    SUBCASE("blank summary") {
      f.corpus.summaries.begin()->second.summary_text = "  ";
    }
    SUBCASE("summary keyed under another id") {
      auto s = f.corpus.summaries.begin()->second;
      f.corpus.summaries.erase(f.corpus.summaries.begin());
      f.corpus.summaries["lee2021a/0/99"] = s;
    }
    CHECK_THROWS_AS(validate(f.corpus), Error);
  }

  TEST_CASE("bad files") {
    auto path = std::filesystem::temp_directory_path() / "llmref_bad_corpus.json";
    {
      std::ofstream(path) << "{ not json";
    }
    CHECK_THROWS_AS(load_corpus(path), Error);
    {
      std::ofstream(path) << R"({"schema_version": 99, "corpus_id": "x", "documents": [], "summaries": []})";
    }
    try {
      load_corpus(path);
      FAIL("expected schema error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::schema_version);
    }
    std::filesystem::remove(path);
  }

  TEST_CASE("enumerated gaps") {
    SourceDocument d;
    d.references = {make_reference(1, "a"), make_reference(2, "b"), make_reference(5, "c")};
    CHECK(reference_gaps(d) == std::vector<int>{3, 4});
  }
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "llmref/error.hpp"
#include "llmref/ingest.hpp"
#include "llmref/mock_backend.hpp"
#include "synthetic_article.hpp"

using namespace llmref;
namespace fs = std::filesystem;

namespace {

std::string article(std::uint32_t seed, NotationStyle style = NotationStyle::enumerated) {
  llmref::testing::ArticleSpec spec;
  spec.seed = seed;
  spec.paragraphs = 5;
  spec.style = style;
  return llmref::testing::make_article(spec).pdf;
}

fs::path temp(const std::string& name) { return fs::temp_directory_path() / name; }

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("content ids are stable") {
    CHECK(content_doc_id("abc") == content_doc_id("abc"));
    CHECK(content_doc_id("abc") != content_doc_id("abd"));
    CHECK(content_doc_id("abc").size() == 16);
    // SHA-256("abc") starts with ba7816bf8f01cfea.
    CHECK(content_doc_id("abc") == "ba7816bf8f01cfea");
  }

  TEST_CASE("summaries: short paragraphs stand alone, long ones shrink") {
    auto b = std::make_shared<MockBackend>();
    Gateway gw(b);
    IngestOptions opt;
    Paragraph shortp{"d/0/1", "Units are discrete.", {1, 1}, {}, 0};
    auto s = summarize_paragraph(shortp, gw, opt);
    CHECK(s.summary_text == "Units are discrete.");
    CHECK(b->calls() == 0);

    std::string longtext;
    for (int i = 0; i < 12; ++i) longtext += "Sentence number " + std::to_string(i) + " talks about discrete units. ";
    Paragraph longp{"d/0/2", longtext, {1, 1}, {}, 0};
    auto l = summarize_paragraph(longp, gw, opt);
    CHECK(b->calls() == 1);
    CHECK(l.token_estimate < estimate_tokens(longtext));
    CHECK(gw.ledger().count(Stage::summarize) == 1);
  }

  TEST_CASE("a reply that is not shorter is cut") {
    auto b = std::make_shared<MockBackend>();
    std::string longtext(400, 'a');
    for (std::size_t i = 5; i < longtext.size(); i += 6) longtext[i] = ' ';
    b->when_contains("Summarize the following paragraph", longtext + " and even more words");
    Gateway gw(b);
    Paragraph p{"d/0/1", longtext, {1, 1}, {}, 0};
    auto s = summarize_paragraph(p, gw, {});
    CHECK(s.token_estimate < estimate_tokens(longtext));
    CHECK_FALSE(s.summary_text.empty());
  }

  TEST_CASE("ingest is idempotent on identical bytes") {
    auto b = std::make_shared<MockBackend>();
    Gateway gw(b);
    std::string pdf = article(3);
    auto r1 = ingest_document(pdf, Corpus{}, gw, {}, "a.pdf");
    CHECK(r1.added);
    CHECK(r1.doc_id == content_doc_id(pdf));
    REQUIRE(r1.corpus.documents.size() == 1);
    CHECK(r1.corpus.documents[0].origin == "a.pdf");
    CHECK(r1.corpus.summaries.size() == r1.corpus.paragraph_count());
    validate(r1.corpus);
    auto calls = b->calls();
    auto r2 = ingest_document(pdf, r1.corpus, gw, {}, "a.pdf");
    CHECK_FALSE(r2.added);
    CHECK(r2.corpus == r1.corpus);
    CHECK(b->calls() == calls);
  }

  TEST_CASE("documents keep ingest order") {
    Gateway gw(std::make_shared<MockBackend>());
    Corpus c;
    std::vector<std::string> ids;
    for (std::uint32_t seed : {5u, 2u, 9u}) {
      auto r = ingest_document(article(seed), c, gw, {});
      c = r.corpus;
      ids.push_back(r.doc_id);
    }
    REQUIRE(c.documents.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(c.documents[i].doc_id == ids[i]);
  }

  TEST_CASE("ingest_files saves once and fails atomically") {
    Gateway gw(std::make_shared<MockBackend>());
    auto corpus = temp("llmref_ingest_corpus.json");
    auto a = temp("llmref_ingest_a.pdf"), bad = temp("llmref_ingest_bad.pdf");
    fs::remove(corpus);
    std::ofstream(a, std::ios::binary) << article(4, NotationStyle::named);
    std::ofstream(bad, std::ios::binary) << "not a pdf";
    auto ids = ingest_files(corpus, {a}, gw, {});
    REQUIRE(ids.size() == 1);
    auto before = read_file(corpus);
    try {
      ingest_files(corpus, {a, bad}, gw, {});
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unsupported_document);
      CHECK(std::string(e.what()).find("llmref_ingest_bad.pdf") != std::string::npos);
    }
    CHECK(read_file(corpus) == before);
    CHECK(load_corpus(corpus).documents.size() == 1);
    for (const auto& p : {corpus, a, bad}) fs::remove(p);
  }

  TEST_CASE("backend failure during ingest names the paragraph") {
    auto b = std::make_shared<MockBackend>();
    GatewayOptions o;
    o.backoff = std::chrono::milliseconds(0);
    o.max_retries = 0;
    Gateway gw(b, o);
    b->fail_next(100);
    CHECK_THROWS_AS(ingest_document(article(6), Corpus{}, gw, {}), Error);
  }
}

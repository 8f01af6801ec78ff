#include <doctest.h>

#include <random>

#include "llmref/error.hpp"
#include "llmref/mock_backend.hpp"
#include "llmref/retriever.hpp"
#include "scripted.hpp"

using namespace llmref;

namespace {

Corpus small_corpus() {
  return llmref::testing::make_flat_corpus(
      {{3, 2}, [](const std::string& id, int i) { return "Text " + std::to_string(i) + " of <" + id + ">."; }});
}

std::shared_ptr<MockBackend> verdicts(const std::set<std::string>& yes) {
  auto b = std::make_shared<MockBackend>();
  b->use_offline_fallback(false);
  b->add_rule([yes](const std::string& p) -> std::optional<std::string> {
    auto open = p.find('<');
    auto close = p.find('>', open);
    if (open == std::string::npos) return std::nullopt;
    return yes.count(p.substr(open + 1, close - open - 1)) ? "True" : "False";
  });
  return b;
}

}  // namespace

TEST_SUITE("retriever") {
  TEST_CASE("returns positives in document order with original text") {
    auto c = small_corpus();
    Gateway gw(verdicts({"doc2/0/1", "doc1/0/3", "doc1/0/1"}));
    auto got = retrieve("q", c, gw);
    REQUIRE(got.size() == 3);
    CHECK(got[0].para_id == "doc1/0/1");
    CHECK(got[1].para_id == "doc1/0/3");
    CHECK(got[2].para_id == "doc2/0/1");
    CHECK(got[2].doc_id == "doc2");
    CHECK(got[2].paragraph.text == "Text 3 of <doc2/0/1>.");
    CHECK(got[1].rank == 1);
    CHECK(gw.ledger().count(Stage::retrieve) == 5);
  }

  TEST_CASE("judges the summary, not the paragraph") {
    auto c = small_corpus();
    c.summaries["doc1/0/2"].summary_text = "Short <doc1/0/2> summary.";
    auto b = verdicts({"doc1/0/2"});
    Gateway gw(b);
    retrieve("q", c, gw);
    bool saw = false;
    for (const auto& p : b->prompts()) saw = saw || p.find("Paragraph: Short <doc1/0/2> summary.") != std::string::npos;
    CHECK(saw);
  }

  TEST_CASE("forced includes are still judged") {
    auto c = small_corpus();
    Gateway gw(verdicts({}));
    RetrieveOptions o;
    o.forced_include = {"doc1/0/2"};
    auto got = retrieve("q", c, gw, o);
    REQUIRE(got.size() == 1);
    CHECK(got[0].verdict_source == VerdictSource::forced_include);
    CHECK(gw.ledger().count(Stage::retrieve) == 5);
  }

  TEST_CASE("empty corpus") {
    Gateway gw(std::make_shared<MockBackend>());
    try {
      retrieve("q", Corpus{}, gw);
      FAIL("expected empty_corpus");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_corpus);
    }
  }

  TEST_CASE("random verdict maps match the oracle") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
      int docs = std::uniform_int_distribution<int>(1, 3)(rng);
      std::vector<int> per(static_cast<std::size_t>(docs));
      for (auto& n : per) n = std::uniform_int_distribution<int>(2, 7)(rng);
      auto c = llmref::testing::make_flat_corpus(
          {per, [](const std::string& id, int) { return "About <" + id + ">."; }});
      std::set<std::string> yes;
      std::vector<std::string> oracle;
      for (const auto& d : c.documents)
        for (const auto* p : paragraphs_in_order(d))
          if (rng() % 2) {
            yes.insert(p->para_id);
            oracle.push_back(p->para_id);
          }
      Gateway gw(verdicts(yes));
      std::vector<std::string> ids;
      for (const auto& r : retrieve("q", c, gw)) ids.push_back(r.para_id);
      CHECK(ids == oracle);
      CHECK(gw.ledger().count(Stage::retrieve) == static_cast<std::int64_t>(c.paragraph_count()));
    }
  }

  TEST_CASE("a paragraph whose judge keeps failing aborts retrieval") {
    auto c = small_corpus();
    auto b = std::make_shared<MockBackend>();
    GatewayOptions o;
    o.backoff = std::chrono::milliseconds(0);
    o.max_retries = 1;
    Gateway gw(b, o);
    b->fail_next(1000);
    CHECK_THROWS_AS(retrieve("q", c, gw), Error);
  }
}

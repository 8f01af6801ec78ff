#include <doctest.h>

#include "llmref/error.hpp"
#include "llmref/mock_backend.hpp"
#include "llmref/pipeline.hpp"
#include "scripted.hpp"

using namespace llmref;

namespace {

const char* kQuery = "How does direct speech translation work?";

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("coarse grain with the offline responder") {
    auto f = llmref::testing::sample_fixture();
    auto b = std::make_shared<MockBackend>();
    Gateway gw(b);
    QueryOptions qo;
    qo.grain = Grain::coarse;
    QueryResponse r = answer_query(kQuery, f.corpus, gw, qo);
    REQUIRE_FALSE(r.contexts.empty());
    CHECK_FALSE(r.answer.empty());
    CHECK(r.annotated_answer == r.answer);
    CHECK(r.references.grain == Grain::coarse);
    CHECK(r.rounds == static_cast<int>(r.contexts.size()));
    CHECK_FALSE(r.references.primary.empty());
    CHECK(r.usage.count(Stage::retrieve) == static_cast<std::int64_t>(f.corpus.summaries.size()));
    CHECK(r.usage.count(Stage::synthesize) >= static_cast<std::int64_t>(r.contexts.size()));
    CHECK(r.usage.count(Stage::align) == 0);
    CHECK(r.usage.size() == gw.ledger().size());
    for (const auto& p : r.contributing_para_ids) {
      bool retrieved = false;
      for (const auto& c : r.contexts) retrieved |= c.para_id == p;
      CHECK(retrieved);
    }
  }

  TEST_CASE("fine grain with a scripted alignment") {
    auto f = llmref::testing::sample_fixture();
    auto b = std::make_shared<MockBackend>();
    b->when_contains("Corresponding Source Line", f.alignment_reply);
    Gateway gw(b);
    QueryOptions qo;
    qo.grain = Grain::fine;
    QueryResponse r = answer_query(kQuery, f.corpus, gw, qo);
    CHECK(r.references.grain == Grain::fine);
    CHECK(r.usage.count(Stage::align) >= 1);
    CHECK(r.annotated_answer.find('[') != std::string::npos);

    auto j = r.to_json(qo.prices);
    CHECK(j["query"] == kQuery);
    CHECK(j["references"]["grain"] == "fine");
    CHECK(j["usage"]["calls"].get<std::int64_t>() == static_cast<std::int64_t>(r.usage.size()));
    CHECK(j.contains("truncation_events"));
    CHECK(j.contains("unresolved_markers"));
    std::string text = r.to_text();
    CHECK(text.find(r.annotated_answer) == 0);
    CHECK(text.find("References:") != std::string::npos);
  }

  TEST_CASE("usage is per query") {
    auto f = llmref::testing::sample_fixture();
    Gateway gw(std::make_shared<MockBackend>());
    QueryOptions qo;
    qo.grain = Grain::coarse;
    auto a = answer_query(kQuery, f.corpus, gw, qo);
    auto c = answer_query("What do discrete units learned with HuBERT predict?", f.corpus, gw, qo);
    CHECK(gw.ledger().size() == a.usage.size() + c.usage.size());
  }

  TEST_CASE("a query that matches nothing") {
    auto f = llmref::testing::sample_fixture();
    auto b = std::make_shared<MockBackend>();
    b->use_offline_fallback(false);
    b->set_default_reply("False");
    Gateway gw(b);
    QueryResponse r = answer_query("Which bird sings loudest?", f.corpus, gw, {});
    CHECK(r.contexts.empty());
    CHECK(r.references.size() == 0);
    CHECK(r.to_text().find("no relevant context") != std::string::npos);
  }

  TEST_CASE("an empty corpus is an error") {
    Gateway gw(std::make_shared<MockBackend>());
    Corpus empty;
    CHECK_THROWS_AS(answer_query(kQuery, empty, gw, {}), Error);
  }

  TEST_CASE("answer_items fills only unanswered items") {
    auto f = llmref::testing::sample_fixture();
    Gateway gw(std::make_shared<MockBackend>());
    std::vector<EvalItem> items(2);
    items[0].question = kQuery;
    items[1].question = kQuery;
    items[1].answer = "Already answered.";
    QueryOptions qo;
    qo.grain = Grain::coarse;
    answer_items(items, f.corpus, gw, qo);
    CHECK_FALSE(items[0].answer.empty());
    CHECK_FALSE(items[0].retrieved_contexts.empty());
    CHECK(items[1].answer == "Already answered.");
    CHECK(items[1].retrieved_contexts.empty());
  }
}

#include <doctest.h>

#include <random>

#include "llmref/error.hpp"
#include "llmref/mock_backend.hpp"
#include "llmref/ragas.hpp"
#include "scripted.hpp"

using namespace llmref;

namespace {

std::shared_ptr<MockBackend> strict() {
  auto b = std::make_shared<MockBackend>();
  b->use_offline_fallback(false);
  b->set_default_reply("False");
  return b;
}

// Direct definition: mean over relevant ranks k of (relevant in top k) / k.
double ap_oracle(const std::vector<bool>& v) {
  double sum = 0;
  int rel = 0;
  for (std::size_t k = 1; k <= v.size(); ++k) {
    if (!v[k - 1]) continue;
    ++rel;
    sum += static_cast<double>(std::count(v.begin(), v.begin() + static_cast<long>(k), true)) / static_cast<double>(k);
  }
  return rel ? sum / rel : 0.0;
}

}  // namespace

TEST_SUITE("ragas") {
  TEST_CASE("harmonic mean of the four components") {
    CHECK(ragas_score(0.629, 0.948, 0.268, 0.705) == doctest::Approx(0.513).epsilon(0.004));
    CHECK(ragas_score(0.547, 0.598, 0.049, 0.697) == doctest::Approx(0.158).epsilon(0.01));
    CHECK(ragas_score(0.5, 0.5, 0.5, 0.5) == doctest::Approx(0.5));
    CHECK(ragas_score(0, 1, 1, 1) == 0.0);
    CHECK_THROWS_AS(ragas_score(1.2, 1, 1, 1), Error);
    CHECK_THROWS_AS(ragas_score(std::nan(""), 1, 1, 1), Error);
  }

  TEST_CASE("average precision by hand and against the definition") {
    CHECK(average_precision({}) == 0.0);
    CHECK(average_precision({false, false}) == 0.0);
    CHECK(average_precision({true, false, true}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK(average_precision({false, true}) == doctest::Approx(0.5));
    std::mt19937 rng(1);
    for (int i = 0; i < 300; ++i) {
      std::vector<bool> v(static_cast<std::size_t>(rng() % 13));
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = rng() & 1;
      CHECK(average_precision(v) == doctest::Approx(ap_oracle(v)).epsilon(1e-12));
    }
  }

  TEST_CASE("line lists") {
    CHECK(parse_line_list("1. First\n2) Second\n- Third\n* Fourth\n• Fifth\n\n  Sixth  ") ==
          std::vector<std::string>{"First", "Second", "Third", "Fourth", "Fifth", "Sixth"});
  }

  TEST_CASE("faithfulness is NCS / TS") {
    auto b = strict();
    b->when_contains("Break the answer below", "A one.\nB two.\nC three.\nD four.\nE five.");
    b->when_contains("Statement: A one", "True");
    b->when_contains("Statement: C three", "True");
    Gateway gw(b);
    auto ff = faithfulness("q", "answer text", {"c1"}, gw, {});
    CHECK(ff.statements.size() == 5);
    CHECK(*ff.score == 2.0 / 5.0);
    CHECK(ff.supported == std::vector<bool>{true, false, true, false, false});
  }

  TEST_CASE("zero statements leave faithfulness undefined") {
    auto b = strict();
    b->when_contains("Break the answer below", "");
    Gateway gw(b);
    CHECK_FALSE(faithfulness("q", "a", {"c"}, gw, {}).score.has_value());
  }

  TEST_CASE("answer relevancy averages clamped cosines over NPQ questions") {
    auto b = strict();
    b->when_contains("different questions", "Q one?\nQ two?\nQ three?\nQ four?");
    b->set_embedding("question", {1, 0});
    b->set_embedding("Q one?", {1, 0});
    b->set_embedding("Q two?", {0, 1});
    b->set_embedding("Q three?", {-1, 0});
    Gateway gw(b);
    auto ar = answer_relevancy("question", "answer", gw, {});
    CHECK(ar.pseudo_questions.size() == 3);
    CHECK(ar.cosines == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(*ar.score == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("context precision uses rank order") {
    auto b = strict();
    b->when_contains("Context: second", "True");
    Gateway gw(b);
    auto cp = context_precision("q", {"first", "second"}, gw, {});
    CHECK(*cp.score == 0.5);
  }

  TEST_CASE("answer correctness combines F1 and similarity") {
    auto b = strict();
    b->when_contains("Answer: ANSWER", "Claim one.\nClaim two.");
    b->when_contains("Answer: TRUTH", "Fact one.\nFact two.\nFact three.\nFact four.");
    b->when_contains("Statement: Claim one", "True");
    b->when_contains("Statement: Fact one", "True");
    b->when_contains("Statement: Fact two", "True");
    b->set_embedding("ANSWER", {1, 0});
    b->set_embedding("TRUTH", {1, 0});
    Gateway gw(b);
    auto ac = answer_correctness("q", "ANSWER", "TRUTH", gw, {});
    // precision 1/2, recall 2/4, f1 1/2; similarity 1.
    CHECK(*ac.f1 == doctest::Approx(0.5));
    CHECK(ac.similarity == doctest::Approx(1.0));
    CHECK(*ac.score == doctest::Approx(0.75 * 0.5 + 0.25 * 1.0));
  }

  TEST_CASE("run summary: means skip undefined scores") {
    MetricBundle a, b;
    a.item_id = "b";
    a.faithfulness = 0.5;
    a.answer_relevancy = 1.0;
    a.context_relevancy = 0.25;
    a.context_recall = 1.0;
    b.item_id = "a";
    b.answer_relevancy = 0.5;
    b.context_relevancy = 0.75;
    b.context_recall = 0.0;
    auto r = summarize_run({a, b}, {});
    CHECK(r.per_item[0].item_id == "a");
    CHECK(r.means.at("faithfulness") == 0.5);
    CHECK(r.exclusions.at("faithfulness") == 1);
    CHECK(r.means.at("context_relevancy") == 0.5);
    CHECK(*r.ragas_score == doctest::Approx(ragas_score(0.5, 0.75, 0.5, 0.5)));
    CHECK(r.means.count("answer_correctness") == 0);
    auto table = r.to_table();
    CHECK(table.find("Ragas Score") != std::string::npos);
    CHECK(table.find("n/a") != std::string::npos);
    CHECK(r.to_json()["means"]["faithfulness"] == 0.5);
    CHECK_THROWS_AS(summarize_run({}, {}), Error);
  }

  TEST_CASE("end to end with the offline responder") {
    auto f = llmref::testing::sample_fixture();
    EvalItem item;
    item.id = "s1";
    item.question = "How do discrete units change direct speech translation?";
    item.ground_truth = "Discrete units learned with HuBERT allow direct translation without text.";
    for (const auto& c : f.contexts) item.retrieved_contexts.push_back(c.paragraph.text);
    item.answer = f.answer;
    Gateway gw(std::make_shared<MockBackend>());
    auto report = evaluate_run({item}, gw, {});
    REQUIRE(report.per_item.size() == 1);
    for (const char* name : kMetricNames) {
      CAPTURE(name);
      REQUIRE(report.means.count(name));
      CHECK(report.means.at(name) >= 0.0);
      CHECK(report.means.at(name) <= 1.0);
    }
    CHECK(gw.ledger().count(Stage::judge) > 0);
    CHECK(report.per_item[0].to_json()["breakdown"]["TS"].get<int>() > 0);
    CHECK_THROWS_AS(evaluate_run({}, gw, {}), Error);
  }

  TEST_CASE("dataset replies in python literal form") {
    auto batch = parse_dataset_reply(R"(Here you go:
data = [
    {
        'question': "What is 'unit' discovery?",
        "context": ['Ctx one.', "Ctx two."],
        "ground_truth": 'Units come from clustering.',
    },
    {"question": "Broken", "context": None},
    {"question": "Q3?", "context": ["c"], "ground_truth": "G3", "extra": True},
])");
    REQUIRE(batch.items.size() == 2);
    CHECK(batch.skipped == 1);
    CHECK(batch.items[0].question == "What is 'unit' discovery?");
    CHECK(batch.items[0].gt_contexts == std::vector<std::string>{"Ctx one.", "Ctx two."});
    CHECK(batch.items[1].ground_truth == "G3");
    CHECK_THROWS_AS(parse_dataset_reply("no list at all"), Error);
  }

  TEST_CASE("dataset generation deduplicates and stops on stale batches") {
    auto f = llmref::testing::sample_fixture();
    auto b = strict();
    b->when_contains("You are an expert research scientist.",
                     std::vector<std::string>{
                         R"(data = [{"question": "A?", "context": ["x"], "ground_truth": "a"},
                                    {"question": "B?", "context": ["y"], "ground_truth": "b"}])",
                         R"(data = [{"question": "a?", "context": ["x"], "ground_truth": "a"}])"});
    Gateway gw(b);
    auto items = generate_dataset(f.corpus, 5, gw, {});
    REQUIRE(items.size() == 2);
    CHECK(items[0].id == "q1");
    CHECK(gw.ledger().count(Stage::dataset_gen) == 4);  // 1 productive + 3 stale
    auto back = dataset_from_json(dataset_to_json(items));
    CHECK(back.size() == 2);
    CHECK(back[1].question == "B?");
  }

  TEST_CASE("dataset generation gives up after repeated parse failures") {
    auto f = llmref::testing::sample_fixture();
    auto b = strict();
    b->when_contains("You are an expert research scientist.", "sorry");
    Gateway gw(b);
    try {
      generate_dataset(f.corpus, 5, gw, {});
      FAIL("expected dataset_generation");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::dataset_generation);
      CHECK(e.detail() == "sorry");
    }
    CHECK(gw.ledger().count(Stage::dataset_gen) == 3);
  }

  TEST_CASE("offline dataset generation yields the requested count") {
    auto f = llmref::testing::sample_fixture();
    Gateway gw(std::make_shared<MockBackend>());
    auto items = generate_dataset(f.corpus, 7, gw, {});
    CHECK(items.size() == 7);
  }
}

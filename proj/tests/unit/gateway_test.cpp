#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "llmref/error.hpp"
#include "llmref/gateway.hpp"
#include "llmref/mock_backend.hpp"
#include "llmref/parallel.hpp"
#include "scripted.hpp"

using namespace llmref;

namespace {

GatewayOptions fast() {
  GatewayOptions o;
  o.backoff = std::chrono::milliseconds(0);
  return o;
}

// Counts concurrent calls.
class SlowBackend : public Backend {
 public:
  std::atomic<int> now{0}, peak{0};
  Completion complete(const std::string&, const GenerationParams&) override {
    int n = ++now;
    int p = peak.load();
    while (n > p && !peak.compare_exchange_weak(p, n)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --now;
    return {"True", std::nullopt, std::nullopt};
  }
  std::vector<double> embed(const std::string&) override { return {1.0}; }
  std::string name() const override { return "slow"; }
};

}  // namespace

TEST_SUITE("gateway") {
  TEST_CASE("cost scenario replay") {
    UsageLedger l = llmref::testing::replay_cost_scenario();
    CHECK(l.total_input() == 42360);
    CHECK(l.total_output() == 1942);
    auto rep = cost_report(l, PriceSheet{0.150, 0.600});
    CHECK(rep.cost == doctest::Approx(0.15e-6 * 42360 + 0.6e-6 * 1942));
    CHECK(rep.cost == doctest::Approx(0.0075).epsilon(0.02));
    auto stages = l.by_stage();
    CHECK(stages[Stage::retrieve].input_tokens == 14000);
    CHECK(stages[Stage::synthesize].input_tokens == 2880);
    CHECK(stages[Stage::synthesize].output_tokens == 1500);
    CHECK(stages[Stage::align].input_tokens == 392 * 65);
  }

  TEST_CASE("every call is recorded with its stage") {
    auto b = std::make_shared<MockBackend>();
    b->when_contains("hello", "world wide");
    Gateway gw(b, fast());
    CHECK(gw.complete("hello there", {}, Stage::synthesize) == "world wide");
    auto recs = gw.ledger().records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].stage == Stage::synthesize);
    CHECK(recs[0].input_tokens == estimate_tokens("hello there"));
    CHECK(recs[0].output_tokens == estimate_tokens("world wide"));
    CHECK(recs[0].call_index == 0);
    CHECK_FALSE(recs[0].timestamp.empty());
  }

  TEST_CASE("prompts over the window fail before the call") {
    auto b = std::make_shared<MockBackend>();
    Gateway gw(b, fast());
    GenerationParams p;
    p.context_window_tokens = 100;
    p.max_output_tokens = 20;
    try {
      gw.complete(std::string(400, 'x'), p, Stage::retrieve);
      FAIL("expected budget error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::budget_exceeded);
    }
    CHECK(b->calls() == 0);
    CHECK(gw.ledger().size() == 0);
  }

  TEST_CASE("transient failures are retried then surface") {
    auto b = std::make_shared<MockBackend>();
    b->set_default_reply("ok");
    b->use_offline_fallback(false);
    Gateway gw(b, fast());
    b->fail_next(2);
    CHECK(gw.complete("x", {}, Stage::judge) == "ok");
    CHECK(gw.ledger().size() == 1);
    b->fail_next(3);
    try {
      gw.complete("x", {}, Stage::judge);
      FAIL("expected backend error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::backend_unavailable);
    }
    CHECK(gw.ledger().size() == 1);
  }

  TEST_CASE("verdict parsing") {
    CHECK(parse_verdict("True") == true);
    CHECK(parse_verdict("  false.") == false);
    CHECK(parse_verdict("**TRUE**, because") == true);
    CHECK_FALSE(parse_verdict("Yes").has_value());
    CHECK_FALSE(parse_verdict("").has_value());
  }

  TEST_CASE("deviant verdicts are retried once then count as false") {
    auto b = std::make_shared<MockBackend>();
    b->use_offline_fallback(false);
    b->when_contains("q1", std::vector<std::string>{"maybe", "True"});
    b->when_contains("q2", "perhaps");
    Gateway gw(b, fast());
    CHECK(gw.judge_boolean("q1", {}, Stage::retrieve));
    CHECK_FALSE(gw.judge_boolean("q2", {}, Stage::retrieve));
    CHECK(gw.deviant_verdicts() == 1);
    CHECK(gw.ledger().count(Stage::retrieve) == 4);
  }

  TEST_CASE("tee ledgers see only their calls") {
    auto b = std::make_shared<MockBackend>();
    Gateway gw(b, fast());
    gw.complete("a", {}, Stage::judge);
    UsageLedger mine;
    Gateway teed = gw.with_tee(mine);
    teed.complete("b", {}, Stage::judge);
    CHECK(gw.ledger().size() == 2);
    CHECK(mine.size() == 1);
  }

  TEST_CASE("parallelism cap") {
    auto b = std::make_shared<SlowBackend>();
    GatewayOptions o = fast();
    o.parallelism = 3;
    Gateway gw(b, o);
    parallel_for(30, 8, [&](std::size_t) { gw.complete("x", {}, Stage::retrieve); });
    CHECK(b->peak.load() <= 3);
    CHECK(gw.ledger().size() == 30);
    auto recs = gw.ledger().records();
    std::set<std::int64_t> idx;
    for (const auto& r : recs) idx.insert(r.call_index);
    CHECK(idx.size() == 30);
  }

  TEST_CASE("ledger persists as json lines") {
    UsageLedger l;
    l.append({Stage::align, 65, 1, 0, "2026-01-01T00:00:00.000Z"});
    l.append({Stage::judge, 10, 2, 1, "2026-01-01T00:00:01.000Z"});
    auto back = UsageLedger::from_jsonl(l.to_jsonl());
    CHECK(back.records() == l.records());
    auto path = std::filesystem::temp_directory_path() / "llmref_ledger_test.jsonl";
    std::filesystem::remove(path);
    l.append_to_file(path);
    l.append_to_file(path);
    CHECK(UsageLedger::load_file(path).size() == 4);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(UsageLedger::from_jsonl("{\"stage\": \"nope\"}\n"), Error);
  }

  TEST_CASE("usage summary json") {
    UsageLedger l;
    l.append({Stage::retrieve, 1000000, 0, 0, "t"});
    auto j = usage_summary_json(l, PriceSheet{0.15, 0.6});
    CHECK(j["input_tokens"] == 1000000);
    CHECK(j["cost"].get<double>() == doctest::Approx(0.15));
    CHECK(j["stages"]["retrieve"]["calls"] == 1);
  }

  TEST_CASE("parameter validation") {
    GenerationParams p;
    p.validate();
    p.max_output_tokens = p.context_window_tokens;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.temperature = -1;
    CHECK_THROWS_AS(p.validate(), Error);
  }

  TEST_CASE("mock backend embeddings") {
    auto v = hashed_embedding("discrete speech units");
    auto w = hashed_embedding("discrete speech units");
    CHECK(v == w);
    CHECK(cosine(v, w) == doctest::Approx(1.0));
    CHECK(cosine(v, hashed_embedding("speech units")) > cosine(v, hashed_embedding("banana bread recipe")));
  }
}

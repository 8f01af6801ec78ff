#include <doctest.h>

#include <algorithm>
#include <cctype>

#include "llmref/error.hpp"
#include "llmref/mock_backend.hpp"
#include "llmref/prompts.hpp"
#include "llmref/synthesizer.hpp"
#include "scripted.hpp"

using namespace llmref;
using llmref::testing::EchoBackend;
using llmref::testing::make_contexts;

namespace {

std::string sentences(int n, const std::string& tag) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (s.empty() ? "" : " ") + std::string("Units improve direct translation quality ") + tag + ".";
  return s;
}

std::string no_spaces(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  return s;
}

}  // namespace

TEST_SUITE("synthesizer") {
  TEST_CASE("budget shares") {
    Gateway gw(std::make_shared<EchoBackend>());
    GenerationParams p;
    auto b = compute_budget(p, gw);
    CHECK(b.window == 16000);
    CHECK(b.paragraph == 8000);
    CHECK(b.draft == 4000);
    CHECK(b.output == 2400);
    CHECK(b.overhead == 1600);
    p.max_output_tokens = 3000;
    try {
      compute_budget(p, gw);
      FAIL("expected budget_config");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::budget_config);
    }
    p = {};
    p.context_window_tokens = 800;  // overhead share too small for the templates
    p.max_output_tokens = 50;
    CHECK_THROWS_AS(compute_budget(p, gw), Error);
  }

  TEST_CASE("splitting respects the budget and loses nothing") {
    Gateway gw(std::make_shared<EchoBackend>());
    std::string text = sentences(40, "[CTX:x]") + " " + std::string(300, 'z') + " tail words here.";
    for (std::int64_t budget : {10, 25, 60, 1000}) {
      auto chunks = split_to_budget(text, budget, gw);
      std::string joined;
      for (const auto& c : chunks) {
        CHECK(gw.estimate(c) <= budget);
        joined += c;
      }
      CHECK(no_spaces(joined) == no_spaces(text));
    }
    CHECK(split_to_budget("one. two.", 100, gw).size() == 1);
  }

  TEST_CASE("echo synthesis keeps every sentinel") {
    auto echo = std::make_shared<EchoBackend>();
    Gateway gw(echo);
    auto ctx = make_contexts({"First [CTX:a] point.", "Second [CTX:b] point.", "Third [CTX:c] point."});
    std::vector<std::pair<int, int>> progress;
    SynthesisOptions o;
    o.on_progress = [&](int d, int t) { progress.emplace_back(d, t); };
    auto r = synthesize("q", ctx, gw, o);
    CHECK(r.answer_text == "[CTX:a] [CTX:b] [CTX:c]");
    CHECK(r.rounds == 3);
    CHECK(r.contributing_para_ids == std::vector<std::string>{"d/0/1", "d/0/2", "d/0/3"});
    CHECK(progress == std::vector<std::pair<int, int>>{{1, 3}, {2, 3}, {3, 3}});
    auto ps = echo->prompts();
    REQUIRE(ps.size() == 3);
    CHECK(prompts::classify(ps[0]) == prompts::Kind::synthesis_initial);
    CHECK(prompts::classify(ps[1]) == prompts::Kind::synthesis_refine);
    CHECK(gw.ledger().count(Stage::synthesize) == 3);
  }

  TEST_CASE("oversize paragraphs are split and the draft is condensed") {
    auto echo = std::make_shared<EchoBackend>();
    std::string pad;
    for (int i = 0; i < 900; ++i) pad += "word ";  // ~1125 tokens, over the 1000-token draft share
    echo->padding = pad;
    Gateway gw(echo);
    GenerationParams p;
    p.context_window_tokens = 4000;
    p.max_output_tokens = 400;
    std::string big = sentences(300, "x");  // ~3x the paragraph share
    big.insert(big.size() / 2, " [CTX:big] ");
    auto ctx = make_contexts({"Small [CTX:s] one.", big, "Last [CTX:l] one."});
    SynthesisOptions o;
    o.params = p;
    auto r = synthesize("What changes?", ctx, gw, o);
    for (const char* s : {"[CTX:s]", "[CTX:big]", "[CTX:l]"}) CHECK(r.answer_text.find(s) != std::string::npos);
    bool split = false, condensed = false;
    for (const auto& e : r.truncation_events) {
      split = split || (e.para_id == "d/0/2" && e.reason.rfind("split:", 0) == 0);
      condensed = condensed || e.reason == "condensed";
    }
    CHECK(split);
    CHECK(condensed);
    for (const auto& prompt : echo->prompts()) CHECK(estimate_tokens(prompt) + p.max_output_tokens <= p.context_window_tokens);
    CHECK(r.rounds == gw.ledger().count(Stage::synthesize));
  }

  TEST_CASE("no contexts, no calls") {
    auto echo = std::make_shared<EchoBackend>();
    Gateway gw(echo);
    auto r = synthesize("q", {}, gw);
    CHECK(r.rounds == 0);
    CHECK(r.answer_text.empty());
    CHECK(echo->prompts().empty());
  }

  TEST_CASE("failure carries the partial draft") {
    auto b = std::make_shared<MockBackend>();
    b->use_offline_fallback(false);
    b->when_contains("**Paragraph**:", "Draft so far.");
    GatewayOptions o;
    o.backoff = std::chrono::milliseconds(0);
    o.max_retries = 0;
    b->add_rule([](const std::string& p) -> std::optional<std::string> {
      if (p.find("**New Paragraph**:") != std::string::npos) throw TransientError("down");
      return std::nullopt;
    });
    Gateway gw(b, o);
    try {
      synthesize("q", make_contexts({"One.", "Two."}), gw);
      FAIL("expected synthesis_failed");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::synthesis_failed);
      CHECK(e.detail() == "Draft so far.");
    }
  }

  TEST_CASE("a query that fills the paragraph share is rejected") {
    Gateway gw(std::make_shared<EchoBackend>());
    GenerationParams p;
    p.context_window_tokens = 4000;
    p.max_output_tokens = 400;
    SynthesisOptions o;
    o.params = p;
    CHECK_THROWS_AS(synthesize(std::string(9000, 'q'), make_contexts({"x."}), gw, o), Error);
  }
}

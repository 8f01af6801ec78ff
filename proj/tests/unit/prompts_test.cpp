#include <doctest.h>

#include "llmref/error.hpp"
#include "llmref/prompts.hpp"

using namespace llmref;
using prompts::Kind;

TEST_SUITE("prompts") {
  TEST_CASE("relevance template is verbatim") {
    std::string p = prompts::relevance("What are units?", "Units are discrete.");
    CHECK(p.find("Paragraph: Units are discrete.\nQuery: What are units?\n") != std::string::npos);
    CHECK(p.rfind("You are an experienced researcher tasked with identifying relevant information.", 0) == 0);
    CHECK(p.find("respond with 'True'. If it is not relevant, respond with 'False'.") != std::string::npos);
  }

  TEST_CASE("render then match recovers values") {
    for (Kind k : prompts::kAllKinds) {
      if (k == Kind::dataset) continue;
      std::map<std::string, std::string> values;
      std::string tmpl(prompts::template_for(k));
      for (std::size_t i = tmpl.find('{'); i != std::string::npos; i = tmpl.find('{', i + 1)) {
        auto j = tmpl.find('}', i);
        std::string name = tmpl.substr(i + 1, j - i - 1);
        bool ident = !name.empty() && name.find_first_not_of("abcdefghijklmnopqrstuvwxyz_") == std::string::npos;
        if (ident) values[name] = "value of " + name + " {with braces}";
      }
      std::string rendered = prompts::render(k, values);
      CAPTURE(prompts::name_of(k));
      auto back = prompts::match(prompts::template_for(k), rendered);
      REQUIRE(back.has_value());
      CHECK(*back == values);
      CHECK(prompts::classify(rendered) == k);
    }
  }

  TEST_CASE("placeholders in values are not expanded") {
    std::string p = prompts::synthesis_initial("{paragraph}", "text");
    CHECK(p.find("**Query**: {paragraph}") != std::string::npos);
  }

  TEST_CASE("missing values are an error") {
    CHECK_THROWS_AS(prompts::render(Kind::relevance, {{"query", "q"}}), Error);
  }

  TEST_CASE("dataset prompt carries the documents") {
    std::string p = prompts::dataset(10, {"first doc", "second doc"});
    CHECK(prompts::classify(p) == Kind::dataset);
    CHECK(p.find("Create a list of 10 questions") != std::string::npos);
    CHECK(p.find("Document 2:\nsecond doc") != std::string::npos);
  }

  TEST_CASE("overhead text has no placeholders left") {
    for (Kind k : prompts::kAllKinds) CHECK(prompts::overhead_text(k).size() < prompts::template_for(k).size());
  }
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "llmref/config.hpp"
#include "llmref/error.hpp"
#include "llmref/mock_backend.hpp"

using namespace llmref;

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    AppConfig c = parse_config("");
    CHECK(c.backend == "mock");
    CHECK(c.params.context_window_tokens == 16000);
    CHECK(c.params.max_output_tokens == 1024);
    CHECK(c.npq == 3);
    CHECK(c.align_accounting == AlignmentAccounting::single_call);
  }

  TEST_CASE("keys are applied") {
    AppConfig c = parse_config(R"(
# comment line
backend = mock
model_id = gpt-test
temperature = 0.2
max_output_tokens = 512     # trailing comment
context_window_tokens = 8000
price.input_per_1m = 0.5
price.output_per_1m = 1.5
parallelism = 2
extractor.gap_factor = 1.6
eval.npq = 5
eval.ragas_components = cp
align.accounting = per_pair
job_threshold_seconds = 0.5
)");
    CHECK(c.params.model_id == "gpt-test");
    CHECK(c.params.temperature == doctest::Approx(0.2));
    CHECK(c.params.max_output_tokens == 512);
    CHECK(c.params.context_window_tokens == 8000);
    CHECK(c.prices.input_per_1m == doctest::Approx(0.5));
    CHECK(c.prices.output_per_1m == doctest::Approx(1.5));
    CHECK(c.parallelism == 2);
    CHECK(c.extractor.gap_factor == doctest::Approx(1.6));
    CHECK(c.ragas_components == RagasComponents::context_precision);
    CHECK(c.align_accounting == AlignmentAccounting::per_pair);
    CHECK(c.job_threshold_seconds == doctest::Approx(0.5));
    EvalConfig e = c.eval_config();
    CHECK(e.npq == 5);
    CHECK(e.components == RagasComponents::context_precision);
    CHECK(c.gateway_options().parallelism == 2);
  }

  TEST_CASE("errors name the line") {
    auto message = [](std::string_view text) {
      try {
        parse_config(text);
      } catch (const Error& e) {
        CHECK(e.code() == Errc::validation);
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("backend = mock\nbogus = 1\n").find("line 2") != std::string::npos);
    CHECK(message("bogus = 1").find("bogus") != std::string::npos);
    CHECK(message("\n\nparallelism = two").find("line 3") != std::string::npos);
    CHECK(message("backend = claude").find("claude") != std::string::npos);
    CHECK(message("just words").find("line 1") != std::string::npos);
    CHECK(message("parallelism = 0").find("parallelism") != std::string::npos);
    CHECK(message("max_output_tokens = 4000\ncontext_window_tokens = 4000") != "");
  }

  TEST_CASE("mock backend with a script relative to the config file") {
    auto dir = std::filesystem::temp_directory_path() / "llmref_config_test";
    std::filesystem::create_directories(dir);
    {
      std::ofstream(dir / "rules.json") << R"({"rules":[{"contains":"ping","reply":"pong"}],"offline_fallback":false,)"
                                        << R"("default_reply":"nothing"})";
      std::ofstream(dir / "llmref.conf") << "mock.script = rules.json\n";
    }
    AppConfig c = load_config(dir / "llmref.conf");
    CHECK(std::filesystem::path(c.mock_script) == dir / "rules.json");
    auto b = make_backend(c);
    CHECK(b->name() == "mock");
    CHECK(b->complete("say ping", {}).text == "pong");
    CHECK(b->complete("other", {}).text == "nothing");
    std::filesystem::remove_all(dir);
  }
}

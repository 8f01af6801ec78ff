#include "llmref/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "llmref/error.hpp"
#include "llmref/ingest.hpp"
#include "llmref/mock_backend.hpp"
#include "llmref/text.hpp"

namespace llmref {

namespace {

double to_double(const std::string& v) {
  std::size_t used = 0;
  double d = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument(v);
  return d;
}

int to_int(const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument(v);
  return out;
}

}  // namespace

EvalConfig AppConfig::eval_config() const {
  EvalConfig e;
  e.params = params;
  e.npq = npq;
  e.correctness_f1_weight = correctness_f1_weight;
  e.correctness_similarity_weight = correctness_similarity_weight;
  e.components = ragas_components;
  e.prices = prices;
  return e;
}

GatewayOptions AppConfig::gateway_options() const {
  GatewayOptions g;
  g.parallelism = parallelism;
  g.max_retries = max_retries;
  g.backoff = std::chrono::milliseconds(retry_backoff_ms);
  return g;
}

AppConfig parse_config(std::string_view text) {
  AppConfig c;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"backend",
       [&](const std::string& v) {
         if (v != "mock" && v != "openai") throw std::invalid_argument(v);
         c.backend = v;
       }},
      {"model_id", [&](const std::string& v) { c.params.model_id = v; }},
      {"temperature", [&](const std::string& v) { c.params.temperature = to_double(v); }},
      {"max_output_tokens", [&](const std::string& v) { c.params.max_output_tokens = to_int(v); }},
      {"context_window_tokens", [&](const std::string& v) { c.params.context_window_tokens = to_int(v); }},
      {"price.input_per_1m", [&](const std::string& v) { c.prices.input_per_1m = to_double(v); }},
      {"price.output_per_1m", [&](const std::string& v) { c.prices.output_per_1m = to_double(v); }},
      {"api_key_env", [&](const std::string& v) { c.openai.api_key_env = v; }},
      {"api_base", [&](const std::string& v) { c.openai.api_base = v; }},
      {"embedding_model", [&](const std::string& v) { c.openai.embedding_model = v; }},
      {"timeout_seconds", [&](const std::string& v) { c.openai.timeout_seconds = to_int(v); }},
      {"parallelism", [&](const std::string& v) { c.parallelism = to_int(v); }},
      {"max_retries", [&](const std::string& v) { c.max_retries = to_int(v); }},
      {"retry_backoff_ms", [&](const std::string& v) { c.retry_backoff_ms = to_int(v); }},
      {"extractor.gap_factor", [&](const std::string& v) { c.extractor.gap_factor = to_double(v); }},
      {"extractor.indent_factor", [&](const std::string& v) { c.extractor.indent_factor = to_double(v); }},
      {"extractor.style_vote", [&](const std::string& v) { c.extractor.style_vote = to_double(v); }},
      {"extractor.column_mass", [&](const std::string& v) { c.extractor.column_mass = to_double(v); }},
      {"mock.script", [&](const std::string& v) { c.mock_script = v; }},
      {"eval.npq", [&](const std::string& v) { c.npq = to_int(v); }},
      {"eval.correctness_f1_weight", [&](const std::string& v) { c.correctness_f1_weight = to_double(v); }},
      {"eval.correctness_similarity_weight",
       [&](const std::string& v) { c.correctness_similarity_weight = to_double(v); }},
      {"eval.ragas_components",
       [&](const std::string& v) {
         if (v == "cxr") c.ragas_components = RagasComponents::context_relevancy;
         else if (v == "cp") c.ragas_components = RagasComponents::context_precision;
         else throw std::invalid_argument(v);
       }},
      {"align.accounting",
       [&](const std::string& v) {
         if (v == "single_call") c.align_accounting = AlignmentAccounting::single_call;
         else if (v == "per_pair") c.align_accounting = AlignmentAccounting::per_pair;
         else throw std::invalid_argument(v);
       }},
      {"ledger_path", [&](const std::string& v) { c.ledger_path = v; }},
      {"ui_dir", [&](const std::string& v) { c.ui_dir = v; }},
      {"job_threshold_seconds", [&](const std::string& v) { c.job_threshold_seconds = to_double(v); }},
  };

  int line_no = 0;
  for (const auto& raw : text::split_lines(text)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw Error(Errc::validation, where + ": expected key = value");
    std::string key(text::trim(line.substr(0, eq)));
    std::string value(text::trim(line.substr(eq + 1)));
    auto it = setters.find(key);
    if (it == setters.end()) throw Error(Errc::validation, where + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const std::exception&) {
      throw Error(Errc::validation, where + ": bad value '" + value + "' for " + key);
    }
  }
  c.params.validate();
  if (c.parallelism < 1) throw Error(Errc::validation, "parallelism must be at least 1");
  if (c.npq < 1) throw Error(Errc::validation, "eval.npq must be at least 1");
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  AppConfig c = parse_config(read_file(path));
  // Relative script paths are taken from the config file's directory.
  if (!c.mock_script.empty() && std::filesystem::path(c.mock_script).is_relative()) {
    c.mock_script = (path.parent_path() / c.mock_script).string();
  }
  return c;
}

std::shared_ptr<Backend> make_backend(const AppConfig& config) {
  if (config.backend == "openai") return std::make_shared<OpenAIBackend>(config.openai);
  auto mock = std::make_shared<MockBackend>();
  if (!config.mock_script.empty()) mock->load_script_file(config.mock_script);
  return mock;
}

}  // namespace llmref

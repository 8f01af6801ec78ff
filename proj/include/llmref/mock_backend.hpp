#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmref/gateway.hpp"

namespace llmref {

// Bag-of-words feature hashing over lowercase word tokens, L2-normalised.
// Deterministic; texts sharing vocabulary get positive cosine.
std::vector<double> hashed_embedding(std::string_view text, int dims = 64);

// Deterministic stand-in for a chat model: recognises every prompt template
// and answers from the prompt's own content (word overlap verdicts, leading
// sentences as summaries, best-overlap sentence alignment).
class OfflineResponder {
 public:
  std::string respond(const std::string& prompt);

 private:
  std::atomic<int> dataset_batches_{0};
};

class MockBackend : public Backend {
 public:
  // Returns a reply, or nullopt to fall through to the next rule.
  using Rule = std::function<std::optional<std::string>(const std::string& prompt)>;

  MockBackend();

  // Rules are consulted in insertion order; the first that answers wins.
  void add_rule(Rule rule);
  void when_contains(std::string needle, std::string reply);
  // Successive matching calls get successive replies; the last repeats.
  void when_contains(std::string needle, std::vector<std::string> replies);
  void set_embedding(std::string text, std::vector<double> vector);
  // The next `n` calls (complete or embed) throw TransientError.
  void fail_next(int n) { fail_next_ = n; }
  // Unmatched prompts use the offline responder unless disabled, in which
  // case they get `default_reply`.
  void use_offline_fallback(bool on) { offline_ = on; }
  void set_default_reply(std::string reply) { default_reply_ = std::move(reply); }

  // {"rules":[{"contains":s,"reply":r}|{"contains":s,"replies":[...]}],
  //  "embeddings":{"text":[...]}}
  void load_script(const nlohmann::json& script);
  void load_script_file(const std::filesystem::path& path);

  Completion complete(const std::string& prompt, const GenerationParams& params) override;
  std::vector<double> embed(const std::string& text) override;
  std::string name() const override { return "mock"; }

  std::vector<std::string> prompts() const;
  std::size_t calls() const;

  int dims = 64;

 private:
  mutable std::mutex mu_;
  std::vector<Rule> rules_;
  std::map<std::string, std::vector<double>> embeddings_;
  std::vector<std::string> log_;
  std::atomic<int> fail_next_{0};
  bool offline_ = true;
  std::string default_reply_;
  OfflineResponder offline_responder_;
};

}  // namespace llmref

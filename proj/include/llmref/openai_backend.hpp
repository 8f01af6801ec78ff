#pragma once

#include <string>

#include "llmref/gateway.hpp"

namespace llmref {

struct OpenAIOptions {
  std::string api_base = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string embedding_model = "text-embedding-3-small";
  int timeout_seconds = 120;
};

// OpenAI-compatible chat/completions and embeddings client. The API key
// is read from the environment at construction; a missing variable throws
// Error(auth_missing).
class OpenAIBackend : public Backend {
 public:
  explicit OpenAIBackend(OpenAIOptions options);

  Completion complete(const std::string& prompt, const GenerationParams& params) override;
  std::vector<double> embed(const std::string& text) override;
  std::string name() const override { return "openai"; }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  OpenAIOptions options_;
  std::string api_key_;
  std::string host_;         // scheme://host[:port]
  std::string path_prefix_;  // "/v1"
};

}  // namespace llmref

#include "llmref/openai_backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "llmref/error.hpp"

namespace llmref {

OpenAIBackend::OpenAIBackend(OpenAIOptions options) : options_(std::move(options)) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (!key || !*key) {
    throw Error(Errc::auth_missing, "environment variable " + options_.api_key_env + " is not set");
  }
  api_key_ = key;
  std::string base = options_.api_base;
  while (!base.empty() && base.back() == '/') base.pop_back();
  auto scheme = base.find("://");
  if (scheme == std::string::npos) throw Error(Errc::validation, "api_base must include a scheme: " + base);
  auto slash = base.find('/', scheme + 3);
  host_ = base.substr(0, slash);
  path_prefix_ = slash == std::string::npos ? "" : base.substr(slash);
}

nlohmann::json OpenAIBackend::post(const std::string& path, const nlohmann::json& body) {
  httplib::Client client(host_);
  client.set_read_timeout(options_.timeout_seconds, 0);
  client.set_connection_timeout(30, 0);
  client.set_bearer_token_auth(api_key_);
  auto res = client.Post(path_prefix_ + path, body.dump(), "application/json");
  if (!res) throw TransientError("request to " + host_ + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("HTTP " + std::to_string(res->status) + " from " + host_);
  }
  if (res->status != 200) {
    throw Error(Errc::backend_unavailable, "HTTP " + std::to_string(res->status) + " from " + host_, res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::backend_unavailable, std::string("unparseable backend response: ") + e.what(), res->body);
  }
}

Completion OpenAIBackend::complete(const std::string& prompt, const GenerationParams& params) {
  nlohmann::json body = {{"model", params.model_id},
                         {"temperature", params.temperature},
                         {"max_tokens", params.max_output_tokens},
                         {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  nlohmann::json j = post("/chat/completions", body);
  Completion c;
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    c.text = content.is_string() ? content.get<std::string>() : "";
    if (j.contains("usage")) {
      c.input_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
      c.output_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::backend_unavailable, std::string("unexpected completion payload: ") + e.what(), j.dump());
  }
  return c;
}

std::vector<double> OpenAIBackend::embed(const std::string& text) {
  nlohmann::json j = post("/embeddings", {{"model", options_.embedding_model}, {"input", text}});
  try {
    return j.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::backend_unavailable, std::string("unexpected embedding payload: ") + e.what(), j.dump());
  }
}

}  // namespace llmref

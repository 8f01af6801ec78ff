#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "llmref/extractor.hpp"
#include "llmref/gateway.hpp"
#include "llmref/openai_backend.hpp"
#include "llmref/ragas.hpp"
#include "llmref/references.hpp"

namespace llmref {

// Settings file: one "key = value" per line, '#' starts a comment.
//
//   backend = mock | openai
//   model_id, temperature, max_output_tokens, context_window_tokens
//   price.input_per_1m, price.output_per_1m
//   api_key_env, api_base, embedding_model, timeout_seconds
//   parallelism, max_retries, retry_backoff_ms
//   extractor.gap_factor, extractor.indent_factor, extractor.style_vote,
//   extractor.column_mass
//   mock.script          JSON rules for the mock backend
//   eval.npq, eval.correctness_f1_weight, eval.correctness_similarity_weight,
//   eval.ragas_components = cxr | cp
//   align.accounting = single_call | per_pair
//   ledger_path, ui_dir, job_threshold_seconds
struct AppConfig {
  std::string backend = "mock";
  GenerationParams params;
  PriceSheet prices;
  OpenAIOptions openai;
  int parallelism = 4;
  int max_retries = 2;
  int retry_backoff_ms = 250;
  ExtractorConfig extractor;
  std::string mock_script;
  int npq = 3;
  double correctness_f1_weight = 0.75;
  double correctness_similarity_weight = 0.25;
  RagasComponents ragas_components = RagasComponents::context_relevancy;
  AlignmentAccounting align_accounting = AlignmentAccounting::single_call;
  std::string ledger_path;
  std::string ui_dir;
  double job_threshold_seconds = 10.0;

  EvalConfig eval_config() const;
  GatewayOptions gateway_options() const;
};

// Throws Error(validation) naming the line for unknown keys or bad values.
AppConfig parse_config(std::string_view text);
AppConfig load_config(const std::filesystem::path& path);

std::shared_ptr<Backend> make_backend(const AppConfig& config);

}  // namespace llmref

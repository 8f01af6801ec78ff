#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "llmref/gateway.hpp"
#include "llmref/retriever.hpp"

namespace llmref {

struct TruncationEvent {
  std::string para_id;
  std::string reason;  // "split:<n>", "condensed", "draft_truncated"
};

struct SynthesisResult {
  std::string answer_text;
  std::vector<std::string> contributing_para_ids;
  int rounds = 0;  // synthesize-stage gateway calls
  std::vector<TruncationEvent> truncation_events;
};

// Shares of the context window. Query and paragraph share `paragraph`.
struct BudgetSplit {
  double paragraph = 0.50;
  double draft = 0.25;
  double output = 0.15;
  double overhead = 0.10;
};

struct Budget {
  std::int64_t window = 0;
  std::int64_t paragraph = 0;  // query + paragraph chunk
  std::int64_t draft = 0;
  std::int64_t output = 0;
  std::int64_t overhead = 0;
};

// Throws Error(budget_config) when max_output_tokens exceeds the output
// share or the largest synthesis template exceeds the overhead share.
Budget compute_budget(const GenerationParams& params, const Gateway& gateway, const BudgetSplit& split = {});

// Greedy sentence packing so that each chunk costs at most `max_tokens`;
// sentences that are too long alone fall back to word packing.
std::vector<std::string> split_to_budget(std::string_view text, std::int64_t max_tokens, const Gateway& gateway);

std::string synthesize_initial(std::string_view query, std::string_view paragraph, Gateway& gateway,
                               const GenerationParams& params);
std::string synthesize_refine(std::string_view draft, std::string_view paragraph, std::string_view query,
                              Gateway& gateway, const GenerationParams& params);

struct SynthesisOptions {
  GenerationParams params;
  BudgetSplit split;
  // Called after each contributing context: (contexts done, contexts total).
  std::function<void(int, int)> on_progress;
};

// Sequential over contexts in the given order. A gateway failure surfaces as
// Error(synthesis_failed) whose detail() is the partial draft.
SynthesisResult synthesize(std::string_view query, const std::vector<RetrievedContext>& contexts, Gateway& gateway,
                           const SynthesisOptions& options = {});

}  // namespace llmref

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmref/corpus.hpp"
#include "llmref/gateway.hpp"
#include "llmref/ragas.hpp"
#include "llmref/references.hpp"
#include "llmref/retriever.hpp"
#include "llmref/synthesizer.hpp"

namespace llmref {

struct QueryOptions {
  Grain grain = Grain::fine;
  GenerationParams params;
  BudgetSplit split;
  AlignmentAccounting align_accounting = AlignmentAccounting::single_call;
  PriceSheet prices;
  // (contexts integrated, contexts retrieved)
  std::function<void(int, int)> on_progress;
};

struct QueryResponse {
  std::string query;
  std::string answer;
  std::string annotated_answer;
  ReferenceBundle references;
  std::vector<std::string> contributing_para_ids;
  int rounds = 0;
  std::vector<RetrievedContext> contexts;
  std::vector<TruncationEvent> truncation_events;
  std::vector<UnresolvedMarker> unresolved;
  UsageLedger usage;  // this query's calls only

  // {answer, annotated_answer, references:{grain, primary[], secondary[]},
  //  contributing_para_ids, rounds, usage}
  nlohmann::json to_json(const PriceSheet& prices) const;
  // Annotated answer followed by the numbered reference list.
  std::string to_text() const;
};

// Retrieve, synthesize, attach references. Read-only on the corpus.
QueryResponse answer_query(std::string_view query, const Corpus& corpus, Gateway& gateway,
                           const QueryOptions& options = {});

// Runs the pipeline for items that carry no answer yet, filling `answer`
// and `retrieved_contexts`.
void answer_items(std::vector<EvalItem>& items, const Corpus& corpus, Gateway& gateway, const QueryOptions& options);

}  // namespace llmref

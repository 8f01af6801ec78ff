#pragma once

#include <set>
#include <string>
#include <vector>

#include "llmref/corpus.hpp"
#include "llmref/gateway.hpp"

namespace llmref {

enum class VerdictSource { llm_judge, forced_include };

std::string_view to_string(VerdictSource v);

struct RetrievedContext {
  std::string para_id;
  std::string doc_id;
  Paragraph paragraph;  // the original, not the summary
  VerdictSource verdict_source = VerdictSource::llm_judge;
  int rank = 0;  // position in document order, gapless from 0
};

struct RetrieveOptions {
  GenerationParams params;
  // Included even when the judge says no. They are still judged so the
  // call count stays one per paragraph.
  std::set<std::string> forced_include;
};

bool is_relevant(std::string_view query, std::string_view summary, Gateway& gateway, const GenerationParams& params);

// Judges every paragraph once (against its summary, or its text when no
// summary exists) and returns every positive in document order. Throws
// Error(empty_corpus) when there is nothing to judge.
std::vector<RetrievedContext> retrieve(std::string_view query, const Corpus& corpus, Gateway& gateway,
                                       const RetrieveOptions& options = {});

}  // namespace llmref

#include "llmref/pipeline.hpp"

#include "llmref/parallel.hpp"
#include "llmref/text.hpp"

namespace llmref {

nlohmann::json QueryResponse::to_json(const PriceSheet& prices) const {
  nlohmann::json j;
  j["query"] = query;
  j["answer"] = answer;
  j["annotated_answer"] = annotated_answer;
  j["references"] = references.to_json();
  j["contributing_para_ids"] = contributing_para_ids;
  j["rounds"] = rounds;
  j["usage"] = usage_summary_json(usage, prices);
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : truncation_events) events.push_back({{"para_id", e.para_id}, {"reason", e.reason}});
  j["truncation_events"] = events;
  nlohmann::json unresolved_json = nlohmann::json::array();
  for (const auto& u : unresolved) unresolved_json.push_back({{"para_id", u.para_id}, {"marker", u.raw}});
  j["unresolved_markers"] = unresolved_json;
  return j;
}

std::string QueryResponse::to_text() const {
  std::string out = annotated_answer.empty() ? "(no relevant context found)\n" : annotated_answer + "\n";
  if (references.size() > 0) out += "\nReferences:\n" + references.render();
  return out;
}

QueryResponse answer_query(std::string_view query, const Corpus& corpus, Gateway& gateway,
                           const QueryOptions& options) {
  QueryResponse r;
  r.query = std::string(text::trim(query));
  Gateway g = gateway.with_tee(r.usage);

  RetrieveOptions ro;
  ro.params = options.params;
  r.contexts = retrieve(r.query, corpus, g, ro);

  SynthesisOptions so;
  so.params = options.params;
  so.split = options.split;
  so.on_progress = options.on_progress;
  SynthesisResult s = synthesize(r.query, r.contexts, g, so);
  r.answer = s.answer_text;
  r.rounds = s.rounds;
  r.contributing_para_ids = s.contributing_para_ids;
  r.truncation_events = s.truncation_events;

  if (r.contexts.empty() || text::trim(r.answer).empty()) {
    r.references.grain = options.grain;
    r.annotated_answer = r.answer;
    return r;
  }
  if (options.grain == Grain::coarse) {
    CoarseResult c = coarse_references(r.contexts, corpus);
    r.references = std::move(c.bundle);
    r.unresolved = std::move(c.unresolved);
    r.annotated_answer = r.answer;
  } else {
    AlignOptions ao;
    ao.params = options.params;
    ao.accounting = options.align_accounting;
    FineResult f = fine_references(r.answer, r.contexts, corpus, g, ao);
    r.references = std::move(f.bundle);
    r.unresolved = std::move(f.unresolved);
    r.annotated_answer = std::move(f.annotated_answer);
  }
  return r;
}

void answer_items(std::vector<EvalItem>& items, const Corpus& corpus, Gateway& gateway, const QueryOptions& options) {
  parallel_for(items.size(), gateway.parallelism(), [&](std::size_t i) {
    EvalItem& it = items[i];
    if (!text::trim(it.answer).empty()) return;
    QueryResponse r = answer_query(it.question, corpus, gateway, options);
    it.answer = r.answer;
    it.retrieved_contexts.clear();
    for (const auto& c : r.contexts) it.retrieved_contexts.push_back(c.paragraph.text);
  });
}

}  // namespace llmref

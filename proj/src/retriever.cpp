#include "llmref/retriever.hpp"

#include "llmref/error.hpp"
#include "llmref/parallel.hpp"
#include "llmref/prompts.hpp"
#include "llmref/text.hpp"

namespace llmref {

std::string_view to_string(VerdictSource v) {
  return v == VerdictSource::llm_judge ? "llm_judge" : "forced_include";
}

bool is_relevant(std::string_view query, std::string_view summary, Gateway& gateway, const GenerationParams& params) {
  if (text::trim(query).empty()) throw Error(Errc::validation, "query is empty");
  if (text::trim(summary).empty()) throw Error(Errc::validation, "summary is empty");
  return gateway.judge_boolean(prompts::relevance(query, summary), params, Stage::retrieve);
}

std::vector<RetrievedContext> retrieve(std::string_view query, const Corpus& corpus, Gateway& gateway,
                                       const RetrieveOptions& options) {
  if (corpus.documents.empty() || corpus.summaries.empty()) {
    throw Error(Errc::empty_corpus, "corpus has no summarized paragraphs");
  }
  if (text::trim(query).empty()) throw Error(Errc::validation, "query is empty");

  struct Item {
    const SourceDocument* doc;
    const Paragraph* para;
  };
  std::vector<Item> items;
  for (const auto& doc : corpus.documents) {
    for (const Paragraph* p : paragraphs_in_order(doc)) items.push_back({&doc, p});
  }

  std::vector<char> verdicts(items.size(), 0);
  parallel_for(items.size(), gateway.parallelism(), [&](std::size_t i) {
    auto it = corpus.summaries.find(items[i].para->para_id);
    std::string_view judged = it != corpus.summaries.end() ? std::string_view(it->second.summary_text)
                                                           : std::string_view(items[i].para->text);
    verdicts[i] = is_relevant(query, judged, gateway, options.params) ? 1 : 0;
  });

  std::vector<RetrievedContext> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    bool forced = options.forced_include.count(items[i].para->para_id) > 0;
    if (!verdicts[i] && !forced) continue;
    RetrievedContext c;
    c.para_id = items[i].para->para_id;
    c.doc_id = items[i].doc->doc_id;
    c.paragraph = *items[i].para;
    c.verdict_source = verdicts[i] ? VerdictSource::llm_judge : VerdictSource::forced_include;
    c.rank = static_cast<int>(out.size());
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace llmref

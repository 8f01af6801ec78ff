#include "llmref/synthesizer.hpp"

#include <algorithm>
#include <cmath>

#include "llmref/error.hpp"
#include "llmref/prompts.hpp"
#include "llmref/text.hpp"

namespace llmref {

namespace {

std::int64_t share(std::int64_t window, double fraction) {
  return static_cast<std::int64_t>(std::floor(static_cast<double>(window) * fraction));
}

// Appends pieces to chunks while their joined cost stays under the limit.
void pack(const std::vector<std::string>& pieces, std::int64_t max_tokens, const Gateway& gateway,
          std::vector<std::string>& out, bool words_fallback);

void pack_words(std::string_view sentence, std::int64_t max_tokens, const Gateway& gateway,
                std::vector<std::string>& out) {
  std::vector<std::string> ws;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[j]))) ++j;
    if (j > i) ws.emplace_back(sentence.substr(i, j - i));
    i = j;
  }
  // A single word longer than the budget is cut by characters.
  std::vector<std::string> pieces;
  for (auto& w : ws) {
    while (gateway.estimate(w) > max_tokens) {
      std::size_t cut = static_cast<std::size_t>(max_tokens) * 4;
      while (cut > 0 && (static_cast<unsigned char>(w[cut]) & 0xC0) == 0x80) --cut;
      if (cut == 0) cut = 1;
      pieces.push_back(w.substr(0, cut));
      w.erase(0, cut);
    }
    if (!w.empty()) pieces.push_back(std::move(w));
  }
  pack(pieces, max_tokens, gateway, out, false);
}

void pack(const std::vector<std::string>& pieces, std::int64_t max_tokens, const Gateway& gateway,
          std::vector<std::string>& out, bool words_fallback) {
  std::string current;
  for (const auto& piece : pieces) {
    std::string candidate = current.empty() ? piece : current + " " + piece;
    if (gateway.estimate(candidate) <= max_tokens) {
      current = std::move(candidate);
      continue;
    }
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
    if (gateway.estimate(piece) <= max_tokens) {
      current = piece;
    } else if (words_fallback) {
      pack_words(piece, max_tokens, gateway, out);
    } else {
      out.push_back(piece);  // only reached for pieces already cut to size
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
}

}  // namespace

Budget compute_budget(const GenerationParams& params, const Gateway& gateway, const BudgetSplit& split) {
  params.validate();
  Budget b;
  b.window = params.context_window_tokens;
  b.paragraph = share(b.window, split.paragraph);
  b.draft = share(b.window, split.draft);
  b.overhead = share(b.window, split.overhead);
  b.output = b.window - b.paragraph - b.draft - b.overhead;
  if (params.max_output_tokens > b.output) {
    throw Error(Errc::budget_config, "max_output_tokens " + std::to_string(params.max_output_tokens) +
                                         " exceeds the output share of " + std::to_string(b.output) + " tokens");
  }
  std::int64_t overhead = 0;
  for (auto kind : {prompts::Kind::synthesis_initial, prompts::Kind::synthesis_refine, prompts::Kind::condense}) {
    overhead = std::max(overhead, gateway.estimate(prompts::overhead_text(kind)));
  }
  if (overhead > b.overhead) {
    throw Error(Errc::budget_config, "synthesis template needs " + std::to_string(overhead) +
                                         " tokens, over the overhead share of " + std::to_string(b.overhead));
  }
  return b;
}

std::vector<std::string> split_to_budget(std::string_view text, std::int64_t max_tokens, const Gateway& gateway) {
  if (max_tokens < 1) throw Error(Errc::budget_config, "no room left for paragraph text");
  std::vector<std::string> out;
  if (gateway.estimate(text) <= max_tokens) {
    out.emplace_back(text::trim(text));
    return out;
  }
  pack(text::split_sentences(text), max_tokens, gateway, out, true);
  return out;
}

std::string synthesize_initial(std::string_view query, std::string_view paragraph, Gateway& gateway,
                               const GenerationParams& params) {
  return std::string(text::trim(gateway.complete(prompts::synthesis_initial(query, paragraph), params, Stage::synthesize)));
}

std::string synthesize_refine(std::string_view draft, std::string_view paragraph, std::string_view query,
                              Gateway& gateway, const GenerationParams& params) {
  return std::string(
      text::trim(gateway.complete(prompts::synthesis_refine(query, draft, paragraph), params, Stage::synthesize)));
}

SynthesisResult synthesize(std::string_view query, const std::vector<RetrievedContext>& contexts, Gateway& gateway,
                           const SynthesisOptions& options) {
  SynthesisResult r;
  if (contexts.empty()) return r;
  const auto& params = options.params;
  Budget b = compute_budget(params, gateway, options.split);
  std::int64_t query_tokens = gateway.estimate(query);
  std::int64_t chunk_budget = b.paragraph - query_tokens;
  if (chunk_budget < 1) {
    throw Error(Errc::budget_exceeded, "query alone uses " + std::to_string(query_tokens) +
                                           " tokens of a " + std::to_string(b.paragraph) + "-token paragraph share");
  }

  std::string draft;
  auto fail = [&](const Error& e, const std::string& where) {
    throw Error(Errc::synthesis_failed, "synthesis failed at " + where + ": " + e.what(), draft);
  };
  auto keep_draft_in_budget = [&](const std::string& para_id) {
    if (gateway.estimate(draft) <= b.draft) return;
    // The condense prompt has no paragraph, so a draft up to draft+paragraph
    // share still fits; anything beyond is cut first.
    std::int64_t condense_room = b.draft + b.paragraph - query_tokens;
    if (gateway.estimate(draft) > condense_room) {
      draft = text::truncate_words(draft, static_cast<std::size_t>(condense_room * 4));
      r.truncation_events.push_back({para_id, "draft_truncated"});
    }
    try {
      draft = std::string(text::trim(gateway.complete(prompts::condense(query, draft), params, Stage::synthesize)));
    } catch (const Error& e) {
      fail(e, para_id + " (condense)");
    }
    ++r.rounds;
    r.truncation_events.push_back({para_id, "condensed"});
    if (gateway.estimate(draft) > b.draft) {
      draft = text::truncate_words(draft, static_cast<std::size_t>(b.draft * 4));
      r.truncation_events.push_back({para_id, "draft_truncated"});
    }
  };

  int done = 0;
  for (const auto& ctx : contexts) {
    auto chunks = split_to_budget(ctx.paragraph.text, chunk_budget, gateway);
    if (chunks.size() > 1) r.truncation_events.push_back({ctx.para_id, "split:" + std::to_string(chunks.size())});
    for (const auto& chunk : chunks) {
      try {
        draft = r.rounds == 0 ? synthesize_initial(query, chunk, gateway, params)
                              : synthesize_refine(draft, chunk, query, gateway, params);
      } catch (const Error& e) {
        fail(e, ctx.para_id);
      }
      ++r.rounds;
      keep_draft_in_budget(ctx.para_id);
    }
    if (std::find(r.contributing_para_ids.begin(), r.contributing_para_ids.end(), ctx.para_id) ==
        r.contributing_para_ids.end()) {
      r.contributing_para_ids.push_back(ctx.para_id);
    }
    ++done;
    if (options.on_progress) options.on_progress(done, static_cast<int>(contexts.size()));
  }
  r.answer_text = draft;
  return r;
}

}  // namespace llmref

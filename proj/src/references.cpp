#include "llmref/references.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

#include "llmref/citations.hpp"
#include "llmref/error.hpp"
#include "llmref/prompts.hpp"
#include "llmref/text.hpp"

namespace llmref {

std::string_view to_string(Grain g) { return g == Grain::coarse ? "coarse" : "fine"; }

std::optional<Grain> grain_from_string(std::string_view s) {
  if (s == "coarse") return Grain::coarse;
  if (s == "fine") return Grain::fine;
  return std::nullopt;
}

std::string_view to_string(MatchMethod m) {
  switch (m) {
    case MatchMethod::exact: return "exact";
    case MatchMethod::normalized: return "normalized";
    case MatchMethod::ngram_overlap: return "ngram_overlap";
    case MatchMethod::unattributed: return "unattributed";
  }
  return "unattributed";
}

std::optional<int> ReferenceBundle::number_of_document(std::string_view doc_id) const {
  for (const auto& p : primary) {
    if (p.doc_id == doc_id) return p.number;
  }
  return std::nullopt;
}

std::string ReferenceBundle::render() const {
  std::string out;
  for (const auto& p : primary) out += std::to_string(p.number) + ". " + (p.title.empty() ? p.doc_id : p.title) + "\n";
  for (const auto& s : secondary) out += std::to_string(s.number) + ". " + s.entry.raw + "\n";
  return out;
}

nlohmann::json ReferenceBundle::to_json() const {
  nlohmann::json j;
  j["grain"] = std::string(to_string(grain));
  j["primary"] = nlohmann::json::array();
  for (const auto& p : primary) {
    j["primary"].push_back({{"number", p.number}, {"doc_id", p.doc_id}, {"title", p.title}, {"origin", p.origin}});
  }
  j["secondary"] = nlohmann::json::array();
  for (const auto& s : secondary) {
    j["secondary"].push_back(
        {{"number", s.number}, {"doc_id", s.doc_id}, {"key", key_label(s.entry.key)}, {"text", s.entry.raw}});
  }
  return j;
}

namespace {

const SourceDocument& document_of(const Corpus& corpus, const std::string& doc_id) {
  const SourceDocument* d = corpus.find_document(doc_id);
  if (!d) throw Error(Errc::not_found, "context refers to unknown document " + doc_id);
  return *d;
}

// Numbers primaries (corpus order) before any secondary is added.
class BundleBuilder {
 public:
  BundleBuilder(const Corpus& corpus, Grain grain) : corpus_(corpus) { bundle_.grain = grain; }

  void set_primaries(const std::set<std::string>& doc_ids) {
    for (const auto& doc : corpus_.documents) {
      if (!doc_ids.count(doc.doc_id)) continue;
      bundle_.primary.push_back({static_cast<int>(bundle_.primary.size()) + 1, doc.doc_id, doc.title, doc.origin});
    }
  }

  int add_secondary(const ReferenceEntry& entry, const std::string& doc_id) {
    auto it = by_text_.find(entry.normalized);
    if (it != by_text_.end()) return it->second;
    int n = static_cast<int>(bundle_.size()) + 1;
    bundle_.secondary.push_back({n, entry, doc_id});
    by_text_[entry.normalized] = n;
    return n;
  }

  // Adds the marker's resolved entries; returns their output numbers.
  std::vector<int> add_marker(const CitationMarker& m, const SourceDocument& doc, const std::string& para_id,
                              std::vector<UnresolvedMarker>& unresolved) {
    std::vector<int> out;
    if (m.unresolved) {
      unresolved.push_back({para_id, m.raw});
      return out;
    }
    for (const auto& key : m.resolved_keys) {
      if (const ReferenceEntry* e = find_reference(doc, key)) out.push_back(add_secondary(*e, doc.doc_id));
    }
    return out;
  }

  int primary_number(const std::string& doc_id) const { return *bundle_.number_of_document(doc_id); }

  ReferenceBundle take() { return std::move(bundle_); }

 private:
  const Corpus& corpus_;
  ReferenceBundle bundle_;
  std::map<std::string, int> by_text_;
};

// Lowercased, whitespace-collapsed copy of `s` with a map from each output
// byte back to its source byte.
struct MappedText {
  std::string text;
  std::vector<std::size_t> origin;
};

MappedText normalize_mapped(std::string_view s) {
  MappedText m;
  bool pending_space = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      pending_space = !m.text.empty();
      continue;
    }
    if (pending_space) {
      m.text.push_back(' ');
      m.origin.push_back(i - 1);
      pending_space = false;
    }
    m.text.push_back(text::is_ascii_upper(static_cast<char>(c)) ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    m.origin.push_back(i);
  }
  return m;
}

std::set<std::string> grams_for(std::string_view s, std::size_t n) {
  return text::words(s).size() >= n ? text::word_ngrams(s, n) : text::word_ngrams(s, 1);
}

double overlap(std::string_view a, std::string_view b) {
  std::size_t n = std::min(text::words(a).size(), text::words(b).size()) >= 3 ? 3 : 1;
  return text::jaccard(grams_for(a, n), grams_for(b, n));
}

struct Located {
  std::optional<std::size_t> context;
  MatchMethod method = MatchMethod::unattributed;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::string strip_quotes(std::string s) {
  auto t = std::string(text::trim(s));
  while (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
    t = std::string(text::trim(std::string_view(t).substr(1, t.size() - 2)));
  }
  return t;
}

Located locate_source(std::string_view source_line, const std::vector<RetrievedContext>& contexts) {
  Located best;
  std::string src = strip_quotes(std::string(source_line));
  if (src.empty()) return best;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    std::size_t pos = contexts[i].paragraph.text.find(src);
    if (pos != std::string::npos) return {i, MatchMethod::exact, pos, pos + src.size()};
  }
  std::string nsrc = text::normalize(src);
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    MappedText m = normalize_mapped(contexts[i].paragraph.text);
    std::size_t pos = m.text.find(nsrc);
    if (pos != std::string::npos && !nsrc.empty()) {
      return {i, MatchMethod::normalized, m.origin[pos], m.origin[pos + nsrc.size() - 1] + 1};
    }
  }
  double best_score = 0;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const std::string& para = contexts[i].paragraph.text;
    for (const auto& span : text::sentence_spans(para)) {
      double j = overlap(src, std::string_view(para).substr(span.begin, span.end - span.begin));
      if (j >= 0.5 && j > best_score) {
        best_score = j;
        best = {i, MatchMethod::ngram_overlap, span.begin, span.end};
      }
    }
  }
  return best;
}

std::optional<std::size_t> locate_answer_line(std::string_view synthesized, const std::vector<std::string>& lines) {
  std::string s = strip_quotes(std::string(synthesized));
  std::string ns = text::normalize(s);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]) == s) return i;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string nl = text::normalize(lines[i]);
    if (!ns.empty() && (nl == ns || nl.find(ns) != std::string::npos || ns.find(nl) != std::string::npos)) return i;
  }
  std::optional<std::size_t> best;
  double best_score = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    double j = overlap(s, lines[i]);
    if (j >= 0.5 && j > best_score) {
      best_score = j;
      best = i;
    }
  }
  return best;
}

// Removes markdown emphasis, list bullets and a trailing enumerator that
// belongs to the next pair ("... source text.\n2.").
std::string clean_value(std::string_view v) {
  std::string s(text::trim(v));
  static const std::regex trailing_enum(R"((\s|^)(\d+[.)]|[-*•])\s*$)");
  for (int i = 0; i < 3; ++i) {
    std::string before = s;
    while (!s.empty() && (s.back() == '*' || s.back() == '#')) s.pop_back();
    s = std::regex_replace(s, trailing_enum, "");
    s = std::string(text::trim(s));
    while (!s.empty() && (s.front() == '*' || s.front() == ':')) s.erase(0, 1);
    s = std::string(text::trim(s));
    // Quotes around the whole value, straight or curly.
    for (auto [open, close] : {std::pair<std::string_view, std::string_view>{"\"", "\""}, {"\u201c", "\u201d"}}) {
      if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
        s = std::string(text::trim(s.substr(open.size(), s.size() - open.size() - close.size())));
      }
    }
    if (s == before) break;
  }
  return text::normalize_whitespace(s);
}

}  // namespace

std::vector<AlignmentPair> parse_alignment_reply(std::string_view reply) {
  std::vector<AlignmentPair> pairs;
  if (text::trim(reply).empty()) return pairs;
  std::string lower = text::to_lower(reply);
  static const std::string kSynth = "synthesized line";
  static const std::string kSource = "source line";

  auto after_colon = [&](std::size_t label_end) {
    std::size_t i = label_end;
    // Tolerates "Synthesized Line 2:" and "**Synthesized Line**:".
    while (i < lower.size() && lower[i] != ':' && lower[i] != '\n' && i - label_end < 8) ++i;
    return i < lower.size() && lower[i] == ':' ? i + 1 : label_end;
  };

  std::size_t pos = lower.find(kSynth);
  while (pos != std::string::npos) {
    std::size_t synth_begin = after_colon(pos + kSynth.size());
    std::size_t src_label = lower.find(kSource, synth_begin);
    std::size_t next_synth = lower.find(kSynth, synth_begin);
    if (src_label == std::string::npos || (next_synth != std::string::npos && next_synth < src_label)) {
      pos = next_synth;
      continue;
    }
    // Back up over "Corresponding" so it does not leak into the value.
    std::size_t synth_end = src_label;
    std::size_t corr = lower.rfind("corresponding", src_label);
    if (corr != std::string::npos && corr >= synth_begin && src_label - corr <= 14) synth_end = corr;
    std::size_t src_begin = after_colon(src_label + kSource.size());
    std::size_t src_end = next_synth == std::string::npos ? lower.size() : next_synth;
    AlignmentPair p{clean_value(reply.substr(synth_begin, synth_end - synth_begin)),
                    clean_value(reply.substr(src_begin, src_end - src_begin))};
    if (!p.synthesized.empty() && !p.source.empty()) pairs.push_back(std::move(p));
    pos = next_synth;
  }
  if (pairs.empty()) throw Error(Errc::alignment_parse, "alignment reply has no line pairs", std::string(reply));
  return pairs;
}

std::vector<LineAlignment> match_alignments(std::string_view answer_text, const std::vector<AlignmentPair>& pairs,
                                            const std::vector<RetrievedContext>& contexts) {
  auto lines = text::split_sentences(answer_text);
  std::vector<std::vector<LineAlignment>> per_line(lines.size());
  for (const auto& pair : pairs) {
    // A pair may quote several answer sentences at once.
    auto pieces = text::split_sentences(pair.synthesized);
    if (pieces.empty()) pieces.push_back(pair.synthesized);
    Located loc = locate_source(pair.source, contexts);
    std::set<std::size_t> seen;
    for (const auto& piece : pieces) {
      auto idx = locate_answer_line(piece, lines);
      if (!idx || !seen.insert(*idx).second) continue;
      LineAlignment a;
      a.answer_index = *idx;
      a.answer_line = lines[*idx];
      a.source_line = pair.source;
      a.method = loc.method;
      if (loc.context) {
        a.para_id = contexts[*loc.context].para_id;
        a.source_begin = loc.begin;
        a.source_end = loc.end;
      }
      per_line[*idx].push_back(std::move(a));
    }
  }
  std::vector<LineAlignment> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    bool any = false;
    for (auto& a : per_line[i]) {
      if (a.method == MatchMethod::unattributed) continue;
      out.push_back(std::move(a));
      any = true;
    }
    if (!any) {
      LineAlignment a;
      a.answer_index = i;
      a.answer_line = lines[i];
      if (!per_line[i].empty()) a.source_line = per_line[i].front().source_line;
      out.push_back(std::move(a));
    }
  }
  return out;
}

std::vector<LineAlignment> align_lines(std::string_view answer_text, const std::vector<RetrievedContext>& contexts,
                                       Gateway& gateway, const AlignOptions& options) {
  if (text::trim(answer_text).empty()) throw Error(Errc::validation, "answer is empty");
  const auto& params = options.params;
  std::vector<AlignmentPair> pairs;
  std::size_t replies = 0, unparsed = 0;
  std::string last_raw;
  auto consume = [&](const std::string& reply) {
    ++replies;
    try {
      auto got = parse_alignment_reply(reply);
      pairs.insert(pairs.end(), got.begin(), got.end());
    } catch (const Error& e) {
      if (e.code() != Errc::alignment_parse) throw;
      ++unparsed;
      last_raw = reply;
    }
  };

  if (options.accounting == AlignmentAccounting::per_pair) {
    for (const auto& line : text::split_sentences(answer_text)) {
      for (const auto& ctx : contexts) {
        consume(gateway.complete(prompts::alignment(line, ctx.paragraph.text), params, Stage::align));
      }
    }
  } else {
    // Contexts are packed into as few prompts as fit the window.
    std::int64_t room = params.context_window_tokens - params.max_output_tokens -
                        gateway.estimate(prompts::overhead_text(prompts::Kind::alignment)) - gateway.estimate(answer_text);
    if (room < 16) {
      throw Error(Errc::budget_exceeded, "answer leaves no room for alignment context");
    }
    std::vector<std::string> groups;
    std::string current;
    for (const auto& ctx : contexts) {
      std::string para = ctx.paragraph.text;
      if (gateway.estimate(para) > room) para = text::truncate_words(para, static_cast<std::size_t>(room) * 4);
      std::string candidate = current.empty() ? para : current + "\n\n" + para;
      if (!current.empty() && gateway.estimate(candidate) > room) {
        groups.push_back(std::move(current));
        current = para;
      } else {
        current = std::move(candidate);
      }
    }
    if (!current.empty()) groups.push_back(std::move(current));
    for (const auto& g : groups) consume(gateway.complete(prompts::alignment(answer_text, g), params, Stage::align));
  }
  if (replies > 0 && unparsed == replies) {
    throw Error(Errc::alignment_parse, "alignment reply has no line pairs", last_raw);
  }
  return match_alignments(answer_text, pairs, contexts);
}

CoarseResult coarse_references(const std::vector<RetrievedContext>& contexts, const Corpus& corpus) {
  CoarseResult r;
  BundleBuilder builder(corpus, Grain::coarse);
  std::set<std::string> docs;
  for (const auto& c : contexts) docs.insert(c.doc_id);
  builder.set_primaries(docs);
  for (const auto& c : contexts) {
    const SourceDocument& doc = document_of(corpus, c.doc_id);
    for (const auto& m : c.paragraph.markers) builder.add_marker(m, doc, c.para_id, r.unresolved);
  }
  r.bundle = builder.take();
  return r;
}

FineResult fine_references_from_alignments(std::string_view answer_text, std::vector<LineAlignment> alignments,
                                           const std::vector<RetrievedContext>& contexts, const Corpus& corpus) {
  FineResult r;
  std::map<std::string, const RetrievedContext*> by_para;
  for (const auto& c : contexts) by_para.emplace(c.para_id, &c);

  std::set<std::string> docs;
  for (const auto& a : alignments) {
    if (!a.para_id) continue;
    auto it = by_para.find(*a.para_id);
    if (it == by_para.end()) throw Error(Errc::validation, "alignment names a paragraph outside the contexts");
    docs.insert(it->second->doc_id);
  }
  BundleBuilder builder(corpus, Grain::fine);
  if (docs.empty()) {
    for (const auto& c : contexts) docs.insert(c.doc_id);
    builder.set_primaries(docs);
    r.bundle = builder.take();
    r.alignments = std::move(alignments);
    r.annotated_answer = std::string(answer_text);
    return r;
  }
  builder.set_primaries(docs);

  std::map<std::size_t, LineCitation> per_line;
  for (const auto& a : alignments) {
    if (!a.para_id) continue;
    const RetrievedContext& ctx = *by_para.at(*a.para_id);
    const SourceDocument& doc = document_of(corpus, ctx.doc_id);
    LineCitation& lc = per_line[a.answer_index];
    lc.answer_index = a.answer_index;
    lc.numbers.push_back(builder.primary_number(ctx.doc_id));
    std::vector<const CitationMarker*> hits;
    for (const auto& m : ctx.paragraph.markers) {
      if (m.span_begin < a.source_end && m.span_end > a.source_begin) hits.push_back(&m);
    }
    if (hits.empty()) {
      for (const auto& m : ctx.paragraph.markers) hits.push_back(&m);
      if (!hits.empty()) lc.paragraph_level = true;
    }
    for (const CitationMarker* m : hits) {
      for (int n : builder.add_marker(*m, doc, ctx.para_id, r.unresolved)) lc.numbers.push_back(n);
    }
  }
  for (auto& [idx, lc] : per_line) {
    std::sort(lc.numbers.begin(), lc.numbers.end());
    lc.numbers.erase(std::unique(lc.numbers.begin(), lc.numbers.end()), lc.numbers.end());
    r.citations.push_back(lc);
  }
  r.bundle = builder.take();
  r.alignments = std::move(alignments);
  r.annotated_answer = annotate_answer(answer_text, r.citations);
  return r;
}

FineResult fine_references(std::string_view answer_text, const std::vector<RetrievedContext>& contexts,
                           const Corpus& corpus, Gateway& gateway, const AlignOptions& options) {
  if (contexts.empty()) throw Error(Errc::validation, "fine references need at least one context");
  auto alignments = align_lines(answer_text, contexts, gateway, options);
  return fine_references_from_alignments(answer_text, std::move(alignments), contexts, corpus);
}

std::string annotate_answer(std::string_view answer_text, const std::vector<LineCitation>& citations) {
  auto spans = text::sentence_spans(answer_text);
  std::map<std::size_t, std::string> inserts;  // byte offset -> text
  for (const auto& c : citations) {
    if (c.answer_index >= spans.size() || c.numbers.empty()) continue;
    const auto& sp = spans[c.answer_index];
    std::size_t at = sp.end;
    while (at > sp.begin && std::string_view(".?!\"')]").find(answer_text[at - 1]) != std::string_view::npos) {
      // A closing bracket that belongs to the sentence body stays put.
      if (answer_text[at - 1] == ')' || answer_text[at - 1] == ']') break;
      --at;
    }
    inserts[at] += " " + render_enumerated(c.numbers);
  }
  std::string out;
  std::size_t prev = 0;
  for (const auto& [at, ins] : inserts) {
    out.append(answer_text.substr(prev, at - prev));
    out += ins;
    prev = at;
  }
  out.append(answer_text.substr(prev));
  return out;
}

}  // namespace llmref

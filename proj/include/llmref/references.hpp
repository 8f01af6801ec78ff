#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmref/corpus.hpp"
#include "llmref/gateway.hpp"
#include "llmref/retriever.hpp"

namespace llmref {

enum class Grain { coarse, fine };

std::string_view to_string(Grain g);
std::optional<Grain> grain_from_string(std::string_view s);

struct PrimaryRef {
  int number = 0;
  std::string doc_id;
  std::string title;
  std::string origin;
};

struct SecondaryRef {
  int number = 0;
  ReferenceEntry entry;
  std::string doc_id;  // document whose bibliography supplied the entry
};

// Output numbers run 1..K: primaries first, then secondaries.
struct ReferenceBundle {
  Grain grain = Grain::coarse;
  std::vector<PrimaryRef> primary;
  std::vector<SecondaryRef> secondary;

  std::size_t size() const { return primary.size() + secondary.size(); }
  std::optional<int> number_of_document(std::string_view doc_id) const;
  // "n. <text>" per line; primaries show their title.
  std::string render() const;
  nlohmann::json to_json() const;
};

struct UnresolvedMarker {
  std::string para_id;
  std::string raw;
};

struct CoarseResult {
  ReferenceBundle bundle;
  std::vector<UnresolvedMarker> unresolved;
};

CoarseResult coarse_references(const std::vector<RetrievedContext>& contexts, const Corpus& corpus);

enum class MatchMethod { exact, normalized, ngram_overlap, unattributed };

std::string_view to_string(MatchMethod m);

struct LineAlignment {
  std::size_t answer_index = 0;
  std::string answer_line;
  std::string source_line;
  std::optional<std::string> para_id;  // set iff method != unattributed
  MatchMethod method = MatchMethod::unattributed;
  // Byte range of the matched text inside the paragraph.
  std::size_t source_begin = 0;
  std::size_t source_end = 0;
};

struct AlignmentPair {
  std::string synthesized;
  std::string source;
};

// Label-tolerant parse of "Synthesized Line: ... Corresponding Source Line:
// ..." pairs. A blank reply is zero pairs; a non-blank reply without any
// pair throws Error(alignment_parse) carrying the reply.
std::vector<AlignmentPair> parse_alignment_reply(std::string_view reply);

// Maps reply pairs to answer lines and source paragraphs. Every answer line
// yields at least one entry; lines no pair speaks for are unattributed.
std::vector<LineAlignment> match_alignments(std::string_view answer_text, const std::vector<AlignmentPair>& pairs,
                                            const std::vector<RetrievedContext>& contexts);

enum class AlignmentAccounting {
  single_call,  // one prompt over the full answer and all contexts
  per_pair,     // one prompt per (answer line, context) pair
};

struct AlignOptions {
  GenerationParams params;
  AlignmentAccounting accounting = AlignmentAccounting::single_call;
};

std::vector<LineAlignment> align_lines(std::string_view answer_text, const std::vector<RetrievedContext>& contexts,
                                       Gateway& gateway, const AlignOptions& options = {});

struct LineCitation {
  std::size_t answer_index = 0;
  std::vector<int> numbers;
  bool paragraph_level = false;  // matched line had no marker of its own
};

struct FineResult {
  std::string annotated_answer;
  ReferenceBundle bundle;
  std::vector<LineAlignment> alignments;
  std::vector<LineCitation> citations;
  std::vector<UnresolvedMarker> unresolved;
};

// Pure: builds the bundle and annotations from a fixed alignment.
FineResult fine_references_from_alignments(std::string_view answer_text, std::vector<LineAlignment> alignments,
                                           const std::vector<RetrievedContext>& contexts, const Corpus& corpus);

FineResult fine_references(std::string_view answer_text, const std::vector<RetrievedContext>& contexts,
                           const Corpus& corpus, Gateway& gateway, const AlignOptions& options = {});

// Inserts " [n, m]" before each annotated line's terminal punctuation.
std::string annotate_answer(std::string_view answer_text, const std::vector<LineCitation>& citations);

}  // namespace llmref

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace llmref {

enum class NotationStyle { enumerated, named, unknown };

std::string_view to_string(NotationStyle style);
NotationStyle notation_style_from_string(std::string_view s);

// Author-year key. Entry keys carry the first-author surname; marker keys
// carry every surname the marker names. `suffix` distinguishes same-author
// same-year entries ("2021a").
struct NamedKey {
  std::vector<std::string> surnames;
  int year = 0;
  std::string suffix;

  auto operator<=>(const NamedKey&) const = default;
  bool operator==(const NamedKey&) const = default;
};

using ReferenceKey = std::variant<int, NamedKey>;

std::string key_label(const ReferenceKey& key);

struct ReferenceEntry {
  ReferenceKey key;
  std::string raw;
  std::string normalized;  // derived from raw

  bool operator==(const ReferenceEntry&) const = default;
};

ReferenceEntry make_reference(ReferenceKey key, std::string raw);

struct CitationMarker {
  std::size_t span_begin = 0;
  std::size_t span_end = 0;
  std::string raw;
  NotationStyle style = NotationStyle::enumerated;
  // Keys the marker text names, before resolution.
  std::vector<ReferenceKey> cited;
  std::vector<ReferenceKey> resolved_keys;
  bool unresolved = true;
  bool ambiguous = false;

  bool operator==(const CitationMarker&) const = default;
};

struct Paragraph {
  std::string para_id;
  std::string text;
  std::pair<int, int> page_span{1, 1};
  std::vector<CitationMarker> markers;
  std::int64_t token_estimate = 0;

  bool operator==(const Paragraph&) const = default;
};

struct SectionNode {
  std::string label;
  std::string heading;
  int depth = 0;
  std::vector<Paragraph> paragraphs;
  std::vector<SectionNode> children;

  bool operator==(const SectionNode&) const = default;
};

struct SourceDocument {
  std::string doc_id;
  std::string title;
  std::string origin;
  NotationStyle notation_style = NotationStyle::unknown;
  SectionNode root;
  std::vector<ReferenceEntry> references;
  int page_count = 1;

  bool operator==(const SourceDocument&) const = default;
};

struct ParagraphSummary {
  std::string para_id;
  std::string summary_text;
  std::string model_id;
  std::string created_at;  // ISO-8601 UTC
  std::int64_t token_estimate = 0;

  bool operator==(const ParagraphSummary&) const = default;
};

inline constexpr int kSchemaVersion = 1;

struct Corpus {
  std::string corpus_id = "default";
  // Ingest order is significant: retrieval and primary numbering follow it.
  std::vector<SourceDocument> documents;
  std::map<std::string, ParagraphSummary> summaries;
  int schema_version = kSchemaVersion;

  bool operator==(const Corpus&) const = default;

  const SourceDocument* find_document(std::string_view doc_id) const;
  std::size_t paragraph_count() const;
};

// "<doc_id>/<section path>/<ordinal>"; the root section path is "0" and a
// child's path appends its 1-based index ("0.2.1").
std::string make_para_id(std::string_view doc_id, std::string_view section_path, std::size_t ordinal);
std::string doc_id_of(std::string_view para_id);

// Visits paragraphs in document order (pre-order over sections).
template <typename Fn>
void for_each_paragraph(const SectionNode& node, Fn&& fn) {
  for (const auto& p : node.paragraphs) fn(node, p);
  for (const auto& child : node.children) for_each_paragraph(child, fn);
}

template <typename Fn>
void for_each_paragraph(SectionNode& node, Fn&& fn) {
  for (auto& p : node.paragraphs) fn(node, p);
  for (auto& child : node.children) for_each_paragraph(child, fn);
}

std::vector<const Paragraph*> paragraphs_in_order(const SourceDocument& doc);

// Returns nullptr when the id is unknown.
const Paragraph* find_paragraph(const Corpus& corpus, std::string_view para_id);
// Throws Error(not_found).
const Paragraph& get_paragraph(const Corpus& corpus, std::string_view para_id);

const ReferenceEntry* find_reference(const SourceDocument& doc, const ReferenceKey& key);

// Enumerated keys missing from 1..max (extraction gaps).
std::vector<int> reference_gaps(const SourceDocument& doc);

// Throws Error(validation) naming the first violated invariant.
void validate(const Corpus& corpus);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

std::string corpus_to_json_string(const Corpus& corpus);
Corpus corpus_from_json_string(const std::string& json_text);

}  // namespace llmref

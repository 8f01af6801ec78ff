#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "llmref/corpus.hpp"
#include "llmref/pdf.hpp"

namespace llmref {

struct ExtractorConfig {
  double gap_factor = 1.6;     // paragraph break when baseline gap exceeds this x median gap
  double indent_factor = 0.8;  // first-line indent threshold as a fraction of median indent
  double style_vote = 0.8;     // bibliography notation majority
  double column_mass = 0.3;    // share of body spans each column cluster needs
};

struct FontStyle {
  std::string name;
  double size = 0;
  bool bold = false;

  bool operator==(const FontStyle&) const = default;
};

struct PageBox {
  int page = 1;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct LayoutProfile {
  int column_count = 1;
  FontStyle body_font;
  std::vector<FontStyle> heading_fonts;
  double median_line_gap = 0;
  double median_indent = 0;
  std::vector<PageBox> page_boxes;
  // Left text edge of each column; the right column starts at column_split.
  std::vector<double> column_margins;
  double column_split = 0;

  int column_of(double x0) const { return column_count == 2 && x0 >= column_split ? 1 : 0; }
  double margin_of(int column) const {
    return column < static_cast<int>(column_margins.size()) ? column_margins[column] : 0.0;
  }
  bool is_body(const TextSpan& s) const;
};

struct HeadingAnchor {
  int page = 1;
  int column = 0;
  double x = 0;
  double y = 0;
};

struct Heading {
  std::string label;
  std::string title;
  int depth = 1;
  HeadingAnchor anchor;
  std::size_t span_index = 0;
  bool is_bibliography = false;
};

// Text pattern half of the heading test, exposed so stored spans can be
// re-checked. Returns nullopt when the text is not heading-shaped.
struct HeadingPattern {
  enum class Kind { keyword, numbered, letter };
  Kind kind = Kind::keyword;
  std::string label;
  std::string title;
  int depth = 1;  // 0 for letter labels (depth is contextual)
};
std::optional<HeadingPattern> match_heading_pattern(std::string_view text);
bool is_bibliography_title(std::string_view title);

// Throws Error(empty_document) for zero spans.
LayoutProfile analyze_layout(const std::vector<TextSpan>& spans, const ExtractorConfig& config = {});

std::vector<Heading> detect_headings(const std::vector<TextSpan>& spans, const LayoutProfile& profile,
                                     const ExtractorConfig& config = {});

struct SegmentResult {
  SectionNode root;
  std::vector<TextSpan> dropped;
};

// Builds the section tree. Paragraph ids use `doc_id` (may be empty when
// the caller assigns ids later). Bibliography sections keep their entries
// as paragraphs, one per entry.
SegmentResult segment_paragraphs(const std::vector<TextSpan>& spans, const LayoutProfile& profile,
                                 const std::vector<Heading>& headings, std::string_view doc_id = {},
                                 const ExtractorConfig& config = {});

struct ReferenceList {
  std::vector<ReferenceEntry> entries;
  NotationStyle style = NotationStyle::unknown;
  // Text that could not be attributed to an entry start; appended to the
  // preceding entry.
  std::vector<std::string> residue;
};

ReferenceList extract_reference_list(const SectionNode& root, const ExtractorConfig& config = {});

// Deterministic ordering helper shared with the tests: spans sorted into
// reading order (page, column, baseline, x).
std::vector<std::size_t> reading_order(const std::vector<TextSpan>& spans, const LayoutProfile& profile);

struct ExtractionReport {
  LayoutProfile profile;
  std::vector<Heading> headings;
  std::vector<TextSpan> dropped;

  nlohmann::json to_json() const;
};

SourceDocument extract_document(std::string_view pdf_bytes, std::string doc_id, const ExtractorConfig& config = {},
                                ExtractionReport* report = nullptr);

// Same pipeline over an already decoded text layer.
SourceDocument extract_from_layer(const pdf::TextLayer& layer, std::string doc_id, const ExtractorConfig& config = {},
                                  ExtractionReport* report = nullptr);

}  // namespace llmref

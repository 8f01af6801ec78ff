#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "llmref/corpus.hpp"

namespace llmref {

// Finds in-text citation markers. Enumerated grammar: "[" n (sep n)* "]"
// with sep one of ',', '-' or an en-dash; ranges expand inclusively.
// Named grammar: "(Surname [et al. | and Surname], year[; ...])" and the
// prose form "Surname et al. (year)". `unknown` tries both. Markers come
// back sorted by span and non-overlapping, with resolution not yet applied.
std::vector<CitationMarker> parse_citations(std::string_view text, NotationStyle style);

// Resolves each marker's cited keys against a document's bibliography.
// Enumerated keys resolve iff the number exists. Named keys resolve when an
// entry's raw text contains the surname (word boundary, case-insensitive)
// and the year; several candidates pick the earliest and flag `ambiguous`.
std::vector<CitationMarker> resolve_markers(std::vector<CitationMarker> markers,
                                            const std::vector<ReferenceEntry>& references);

// Canonical bracket rendering of a set of numbers: ascending, duplicates
// dropped, runs of three or more collapsed ("[1-3, 7, 8, 10-12]").
std::string render_enumerated(std::vector<int> numbers);

// Key set named by an enumerated marker body such as "2-5" or "3,9".
// Returns empty when the body does not match the grammar.
std::vector<int> parse_enumerated_body(std::string_view body);

}  // namespace llmref

#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace llmref::text {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
// Collapses runs of whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view s);
// Lowercased + whitespace-collapsed.
std::string normalize(std::string_view s);

bool starts_with_icase(std::string_view s, std::string_view prefix);
bool iequals(std::string_view a, std::string_view b);
bool is_ascii_upper(char c);
bool is_ascii_lower(char c);
bool is_ascii_alpha(char c);
bool is_ascii_digit(char c);

// Sentence segmentation: a boundary is '.', '?' or '!' (plus closing quotes
// or brackets) followed by whitespace and an uppercase letter, digit, quote
// or opening bracket. Abbreviations such as "et al." and "Fig." and single
// capital initials never end a sentence. Spans cover the trimmed sentences.
std::vector<Span> sentence_spans(std::string_view s);
std::vector<std::string> split_sentences(std::string_view s);

// Lowercase alphanumeric word tokens.
std::vector<std::string> words(std::string_view s);
std::set<std::string> word_ngrams(std::string_view s, std::size_t n);
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Word-boundary, case-insensitive search for `needle` in `hay`.
bool contains_word_icase(std::string_view hay, std::string_view needle);

std::string replace_all(std::string s, std::string_view from, std::string_view to);
std::vector<std::string> split_lines(std::string_view s);

// Truncates at a word boundary so the result has at most `max_chars` bytes.
std::string truncate_words(std::string_view s, std::size_t max_chars);

}  // namespace llmref::text

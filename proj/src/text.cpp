#include "llmref/text.hpp"

#include <algorithm>
#include <array>

namespace llmref::text {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(unsigned char c) {
  return is_ascii_alpha(static_cast<char>(c)) || is_ascii_digit(static_cast<char>(c)) || c >= 0x80;
}

constexpr std::array<std::string_view, 24> kAbbreviations = {
    "al",   "fig",  "figs", "eq",  "eqs", "e.g", "i.e", "vs",
    "etc",  "dr",   "mr",   "ms",  "sec", "no",  "cf",  "tab",
    "approx", "resp", "vol", "pp",  "ch",  "ref", "refs", "prof"};

bool is_abbreviation(std::string_view token) {
  std::string lower = to_lower(token);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

}  // namespace

bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_ascii_alpha(char c) { return is_ascii_upper(c) || is_ascii_lower(c); }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  std::size_t e = s.size();
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (is_ascii_upper(c)) c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize(std::string_view s) { return to_lower(normalize_whitespace(s)); }

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    char x = a[i], y = b[i];
    if (is_ascii_upper(x)) x = static_cast<char>(x - 'A' + 'a');
    if (is_ascii_upper(y)) y = static_cast<char>(y - 'A' + 'a');
    if (x != y) return false;
  }
  return true;
}

std::vector<Span> sentence_spans(std::string_view s) {
  std::vector<Span> spans;
  std::size_t start = 0;
  auto push = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    if (e > b) spans.push_back({b, e});
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c != '.' && c != '?' && c != '!') continue;
    std::size_t j = i + 1;
    while (j < s.size() && (s[j] == '"' || s[j] == '\'' || s[j] == ')' || s[j] == ']')) ++j;
    // UTF-8 closing quotes (U+2019, U+201D).
    while (j + 2 < s.size() && static_cast<unsigned char>(s[j]) == 0xE2 &&
           static_cast<unsigned char>(s[j + 1]) == 0x80 &&
           (static_cast<unsigned char>(s[j + 2]) == 0x99 || static_cast<unsigned char>(s[j + 2]) == 0x9D)) {
      j += 3;
    }
    if (j >= s.size() || !is_space(s[j])) continue;
    std::size_t k = j;
    while (k < s.size() && is_space(s[k])) ++k;
    if (k >= s.size()) continue;
    unsigned char next = static_cast<unsigned char>(s[k]);
    bool opener = is_ascii_upper(static_cast<char>(next)) || is_ascii_digit(static_cast<char>(next)) ||
                  next == '"' || next == '(' || next == '[' || next == 0xE2;
    if (!opener) continue;
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !is_space(s[w - 1]) && s[w - 1] != '(') --w;
      std::string_view token = s.substr(w, i - w);
      if (token.size() == 1 && is_ascii_upper(token[0])) continue;
      if (is_abbreviation(token)) continue;
    }
    push(start, j);
    start = j;
  }
  push(start, s.size());
  return spans;
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& sp : sentence_spans(s)) out.emplace_back(s.substr(sp.begin, sp.end - sp.begin));
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_word_byte(static_cast<unsigned char>(c))) {
      cur.push_back(is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::set<std::string> word_ngrams(std::string_view s, std::size_t n) {
  std::set<std::string> out;
  auto w = words(s);
  if (n == 0 || w.size() < n) return out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) {
    std::string gram = w[i];
    for (std::size_t k = 1; k < n; ++k) gram += ' ' + w[i + k];
    out.insert(std::move(gram));
  }
  return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool contains_word_icase(std::string_view hay, std::string_view needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  std::string h = to_lower(hay);
  std::string n = to_lower(needle);
  std::size_t pos = 0;
  while ((pos = h.find(n, pos)) != std::string::npos) {
    bool left = pos == 0 || !is_word_byte(static_cast<unsigned char>(h[pos - 1]));
    std::size_t end = pos + n.size();
    bool right = end >= h.size() || !is_word_byte(static_cast<unsigned char>(h[end]));
    if (left && right) return true;
    ++pos;
  }
  return false;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      std::string_view line = s.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      out.emplace_back(line);
      start = i + 1;
    }
  }
  return out;
}

std::string truncate_words(std::string_view s, std::size_t max_chars) {
  s = trim(s);
  if (s.size() <= max_chars) return std::string(s);
  std::size_t cut = max_chars;
  while (cut > 0 && !is_space(s[cut])) --cut;
  if (cut == 0) {
    cut = max_chars;
    // Avoid splitting a UTF-8 sequence.
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  }
  return std::string(trim(s.substr(0, cut)));
}

}  // namespace llmref::text

#include "llmref/citations.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <set>

#include "llmref/text.hpp"

namespace llmref {

namespace {

constexpr int kMaxRangeKeys = 500;

bool is_cont(unsigned char c) { return (c & 0xC0) == 0x80; }

// Length of a range separator at position i: '-' or U+2013 / U+2014.
std::size_t dash_len(std::string_view s, std::size_t i) {
  if (i < s.size() && s[i] == '-') return 1;
  if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
      static_cast<unsigned char>(s[i + 1]) == 0x80 &&
      (static_cast<unsigned char>(s[i + 2]) == 0x93 || static_cast<unsigned char>(s[i + 2]) == 0x94)) {
    return 3;
  }
  return 0;
}

void skip_spaces(std::string_view s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n')) ++i;
}

std::optional<int> read_number(std::string_view s, std::size_t& i) {
  std::size_t start = i;
  int value = 0;
  while (i < s.size() && text::is_ascii_digit(s[i]) && i - start < 4) {
    value = value * 10 + (s[i] - '0');
    ++i;
  }
  if (i == start || (i < s.size() && text::is_ascii_digit(s[i]))) return std::nullopt;
  return value;
}

// Surname token: capitalised word, optionally preceded by lowercase
// particles ("van den Oord"). Returns the token (without particles) and
// advances i.
std::optional<std::string> read_surname(std::string_view s, std::size_t& i) {
  static constexpr std::array<std::string_view, 10> particles = {"van", "von", "de", "der", "den",
                                                                 "di",  "da",  "le", "la",  "du"};
  std::size_t pos = i;
  for (;;) {
    bool matched = false;
    for (auto p : particles) {
      if (s.substr(pos, p.size()) == p && pos + p.size() < s.size() && s[pos + p.size()] == ' ') {
        pos += p.size() + 1;
        matched = true;
        break;
      }
    }
    if (!matched) break;
  }
  if (pos >= s.size()) return std::nullopt;
  unsigned char first = static_cast<unsigned char>(s[pos]);
  if (!(text::is_ascii_upper(static_cast<char>(first)) || first >= 0xC0)) return std::nullopt;
  std::size_t start = pos;
  ++pos;
  while (pos < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[pos]);
    if (text::is_ascii_alpha(static_cast<char>(c)) || c >= 0x80 || c == '\'' || c == '-') {
      ++pos;
    } else {
      break;
    }
  }
  std::string token(s.substr(start, pos - start));
  while (!token.empty() && (token.back() == '-' || token.back() == '\'')) {
    token.pop_back();
    --pos;
  }
  if (token.size() < 2) return std::nullopt;
  // Acronyms such as "ASR" are not surnames.
  bool has_lower = std::any_of(token.begin(), token.end(), [](char c) {
    return text::is_ascii_lower(c) || static_cast<unsigned char>(c) >= 0x80;
  });
  if (!has_lower) return std::nullopt;
  i = pos;
  return token;
}

struct Year {
  int year;
  std::string suffix;
};

std::optional<Year> read_year(std::string_view s, std::size_t& i) {
  if (i + 4 > s.size()) return std::nullopt;
  for (std::size_t k = 0; k < 4; ++k) {
    if (!text::is_ascii_digit(s[i + k])) return std::nullopt;
  }
  int y = std::stoi(std::string(s.substr(i, 4)));
  if (y < 1800 || y > 2199) return std::nullopt;
  std::size_t pos = i + 4;
  std::string suffix;
  if (pos < s.size() && text::is_ascii_lower(s[pos]) &&
      (pos + 1 >= s.size() || !text::is_ascii_alpha(s[pos + 1]))) {
    suffix = std::string(1, s[pos]);
    ++pos;
  }
  if (pos < s.size() && (text::is_ascii_alpha(s[pos]) || text::is_ascii_digit(s[pos]))) return std::nullopt;
  i = pos;
  return Year{y, suffix};
}

bool consume(std::string_view s, std::size_t& i, std::string_view lit) {
  if (s.substr(i, lit.size()) == lit) {
    i += lit.size();
    return true;
  }
  return false;
}

// Author list: Surname ("et al." | ("and"|"&") Surname)?
std::optional<std::vector<std::string>> read_authors(std::string_view s, std::size_t& i) {
  std::size_t pos = i;
  auto first = read_surname(s, pos);
  if (!first) return std::nullopt;
  std::vector<std::string> names{*first};
  std::size_t save = pos;
  skip_spaces(s, pos);
  if (consume(s, pos, "et al.") || consume(s, pos, "et al")) {
    i = pos;
    return names;
  }
  if (consume(s, pos, "and ") || consume(s, pos, "& ")) {
    skip_spaces(s, pos);
    auto second = read_surname(s, pos);
    if (second) {
      names.push_back(*second);
      i = pos;
      return names;
    }
  }
  i = save;
  return names;
}

std::optional<CitationMarker> try_enumerated(std::string_view s, std::size_t open) {
  std::size_t close = s.find(']', open + 1);
  if (close == std::string_view::npos || close - open > 200) return std::nullopt;
  auto keys = parse_enumerated_body(s.substr(open + 1, close - open - 1));
  if (keys.empty()) return std::nullopt;
  CitationMarker m;
  m.span_begin = open;
  m.span_end = close + 1;
  m.raw = std::string(s.substr(open, close + 1 - open));
  m.style = NotationStyle::enumerated;
  for (int k : keys) m.cited.emplace_back(k);
  return m;
}

std::optional<CitationMarker> try_parenthetical(std::string_view s, std::size_t open) {
  std::size_t pos = open + 1;
  std::vector<ReferenceKey> cited;
  for (;;) {
    skip_spaces(s, pos);
    auto authors = read_authors(s, pos);
    if (!authors) return std::nullopt;
    skip_spaces(s, pos);
    consume(s, pos, ",");
    skip_spaces(s, pos);
    auto year = read_year(s, pos);
    if (!year) return std::nullopt;
    cited.emplace_back(NamedKey{*authors, year->year, year->suffix});
    skip_spaces(s, pos);
    if (consume(s, pos, ";")) continue;
    if (consume(s, pos, ")")) break;
    return std::nullopt;
  }
  CitationMarker m;
  m.span_begin = open;
  m.span_end = pos;
  m.raw = std::string(s.substr(open, pos - open));
  m.style = NotationStyle::named;
  m.cited = std::move(cited);
  return m;
}

// "Surname et al. (2021)" starting at a word start.
std::optional<CitationMarker> try_prose(std::string_view s, std::size_t start) {
  std::size_t pos = start;
  auto authors = read_authors(s, pos);
  if (!authors) return std::nullopt;
  skip_spaces(s, pos);
  if (!consume(s, pos, "(")) return std::nullopt;
  auto year = read_year(s, pos);
  if (!year) return std::nullopt;
  if (!consume(s, pos, ")")) return std::nullopt;
  CitationMarker m;
  m.span_begin = start;
  m.span_end = pos;
  m.raw = std::string(s.substr(start, pos - start));
  m.style = NotationStyle::named;
  m.cited.emplace_back(NamedKey{*authors, year->year, year->suffix});
  return m;
}

bool word_start(std::string_view s, std::size_t i) {
  if (i == 0) return true;
  unsigned char prev = static_cast<unsigned char>(s[i - 1]);
  if (is_cont(static_cast<unsigned char>(s[i]))) return false;
  return !(text::is_ascii_alpha(static_cast<char>(prev)) || text::is_ascii_digit(static_cast<char>(prev)) ||
           prev >= 0x80 || prev == '\'' || prev == '-');
}

}  // namespace

std::vector<int> parse_enumerated_body(std::string_view body) {
  std::set<int> keys;
  std::size_t i = 0;
  skip_spaces(body, i);
  if (i >= body.size()) return {};
  for (;;) {
    skip_spaces(body, i);
    auto a = read_number(body, i);
    if (!a || *a < 1) return {};
    skip_spaces(body, i);
    std::size_t d = dash_len(body, i);
    if (d > 0) {
      i += d;
      skip_spaces(body, i);
      auto b = read_number(body, i);
      if (!b || *b < *a || *b - *a >= kMaxRangeKeys) return {};
      for (int k = *a; k <= *b; ++k) keys.insert(k);
      skip_spaces(body, i);
    } else {
      keys.insert(*a);
    }
    if (i >= body.size()) break;
    if (body[i] != ',') return {};
    ++i;
  }
  return {keys.begin(), keys.end()};
}

std::vector<CitationMarker> parse_citations(std::string_view text, NotationStyle style) {
  const bool enumerated = style != NotationStyle::named;
  const bool named = style != NotationStyle::enumerated;
  std::vector<CitationMarker> found;
  for (std::size_t i = 0; i < text.size(); ++i) {
    std::optional<CitationMarker> m;
    if (enumerated && text[i] == '[') m = try_enumerated(text, i);
    if (!m && named && text[i] == '(') m = try_parenthetical(text, i);
    if (!m && named && word_start(text, i) && text::is_ascii_upper(text[i])) m = try_prose(text, i);
    if (m) {
      i = m->span_end - 1;
      found.push_back(std::move(*m));
    }
  }
  return found;
}

std::vector<CitationMarker> resolve_markers(std::vector<CitationMarker> markers,
                                            const std::vector<ReferenceEntry>& references) {
  for (auto& m : markers) {
    m.resolved_keys.clear();
    m.ambiguous = false;
    for (const auto& key : m.cited) {
      if (const int* n = std::get_if<int>(&key)) {
        bool known = std::any_of(references.begin(), references.end(), [&](const ReferenceEntry& e) {
          const int* k = std::get_if<int>(&e.key);
          return k && *k == *n;
        });
        if (known) m.resolved_keys.emplace_back(*n);
        continue;
      }
      const auto& nk = std::get<NamedKey>(key);
      if (nk.surnames.empty()) continue;
      std::string year = std::to_string(nk.year) + nk.suffix;
      std::vector<const ReferenceEntry*> candidates;
      for (const auto& e : references) {
        if (!text::contains_word_icase(e.raw, nk.surnames.front())) continue;
        bool year_ok = text::contains_word_icase(e.raw, year);
        if (!year_ok && !nk.suffix.empty()) {
          const auto* ek = std::get_if<NamedKey>(&e.key);
          year_ok = ek && ek->year == nk.year && ek->suffix == nk.suffix;
        }
        if (!year_ok && nk.suffix.empty()) {
          // "2021a" in the entry still matches a bare 2021 marker.
          for (char sfx = 'a'; sfx <= 'f' && !year_ok; ++sfx) {
            year_ok = text::contains_word_icase(e.raw, year + sfx);
          }
        }
        if (year_ok) candidates.push_back(&e);
      }
      if (candidates.empty()) continue;
      if (candidates.size() > 1) m.ambiguous = true;
      const ReferenceKey& chosen = candidates.front()->key;
      if (std::find(m.resolved_keys.begin(), m.resolved_keys.end(), chosen) == m.resolved_keys.end()) {
        m.resolved_keys.push_back(chosen);
      }
    }
    if (m.style == NotationStyle::enumerated) {
      std::sort(m.resolved_keys.begin(), m.resolved_keys.end());
    }
    m.unresolved = m.resolved_keys.empty();
  }
  return markers;
}

std::string render_enumerated(std::vector<int> numbers) {
  std::sort(numbers.begin(), numbers.end());
  numbers.erase(std::unique(numbers.begin(), numbers.end()), numbers.end());
  if (numbers.empty()) return "";
  std::string out = "[";
  std::size_t i = 0;
  bool first = true;
  while (i < numbers.size()) {
    std::size_t j = i;
    while (j + 1 < numbers.size() && numbers[j + 1] == numbers[j] + 1) ++j;
    auto emit = [&](const std::string& part) {
      if (!first) out += ", ";
      out += part;
      first = false;
    };
    if (j - i >= 2) {
      emit(std::to_string(numbers[i]) + "-" + std::to_string(numbers[j]));
    } else {
      for (std::size_t k = i; k <= j; ++k) emit(std::to_string(numbers[k]));
    }
    i = j + 1;
  }
  out += "]";
  return out;
}

}  // namespace llmref

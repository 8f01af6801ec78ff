#include "llmref/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "llmref/citations.hpp"
#include "llmref/error.hpp"
#include "llmref/gateway.hpp"
#include "llmref/text.hpp"

namespace llmref {

namespace {

struct Line {
  int page = 1;
  int column = 0;
  double x0 = 0, x1 = 0, baseline = 0, size = 0;
  std::vector<std::size_t> spans;
  std::string text;
};

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double round_to(double v, double step) { return std::round(v / step) * step; }

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    bool ws = c == ' ' || c == '\t' || c == '\n';
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

// Most frequent value after rounding to `step`; ties go to the smaller value.
double modal_value(const std::vector<double>& xs, double step) {
  std::map<double, std::size_t> counts;
  for (double x : xs) ++counts[round_to(x, step)];
  double best = 0;
  std::size_t best_n = 0;
  for (const auto& [x, n] : counts) {
    if (n > best_n) {
      best = x;
      best_n = n;
    }
  }
  return best;
}

// Centre of the densest +-window cluster of xs, with its population.
std::pair<double, std::size_t> densest(std::vector<double> xs, double window) {
  std::sort(xs.begin(), xs.end());
  std::size_t best_n = 0, lo = 0;
  double best_x = xs.empty() ? 0 : xs.front();
  for (std::size_t hi = 0; hi < xs.size(); ++hi) {
    while (xs[hi] - xs[lo] > 2 * window) ++lo;
    if (hi - lo + 1 > best_n) {
      best_n = hi - lo + 1;
      best_x = xs[lo];
    }
  }
  return {best_x, best_n};
}

std::string join_spans(const std::vector<TextSpan>& spans, const std::vector<std::size_t>& idx) {
  std::string out;
  const TextSpan* prev = nullptr;
  for (std::size_t i : idx) {
    const TextSpan& s = spans[i];
    if (prev && !out.empty()) {
      double gap = s.x0 - prev->x1;
      if (gap > 0.12 * std::max(s.size, prev->size) && out.back() != ' ') out.push_back(' ');
    }
    out += s.text;
    prev = &s;
  }
  return text::normalize_whitespace(out);
}

std::vector<Line> build_lines(const std::vector<TextSpan>& spans, const LayoutProfile& profile) {
  std::vector<Line> lines;
  for (std::size_t i : reading_order(spans, profile)) {
    const TextSpan& s = spans[i];
    int col = profile.column_of(s.x0);
    if (!lines.empty()) {
      Line& cur = lines.back();
      double tol = 0.35 * std::max(cur.size, s.size);
      if (cur.page == s.page && cur.column == col && std::abs(cur.baseline - s.baseline()) <= tol) {
        cur.spans.push_back(i);
        cur.size = std::max(cur.size, s.size);
        continue;
      }
    }
    Line l;
    l.page = s.page;
    l.column = col;
    l.baseline = s.baseline();
    l.size = s.size;
    l.spans.push_back(i);
    lines.push_back(std::move(l));
  }
  for (Line& l : lines) {
    std::sort(l.spans.begin(), l.spans.end(), [&](std::size_t a, std::size_t b) { return spans[a].x0 < spans[b].x0; });
    l.x0 = spans[l.spans.front()].x0;
    l.x1 = 0;
    // The line baseline is the baseline of its body-sized text, not of
    // superscripts.
    double best = -1;
    for (std::size_t i : l.spans) {
      l.x1 = std::max(l.x1, spans[i].x1);
      if (spans[i].size > best) {
        best = spans[i].size;
        l.baseline = spans[i].baseline();
      }
    }
    l.text = join_spans(spans, l.spans);
  }
  return lines;
}

bool ends_terminal(std::string_view s) {
  std::size_t n = s.size();
  while (n > 0 && (s[n - 1] == ')' || s[n - 1] == ']' || s[n - 1] == '"' || s[n - 1] == '\'' || s[n - 1] == ' ')) --n;
  // Closing curly quotes.
  while (n >= 3 && static_cast<unsigned char>(s[n - 3]) == 0xE2 && static_cast<unsigned char>(s[n - 2]) == 0x80 &&
         (static_cast<unsigned char>(s[n - 1]) == 0x99 || static_cast<unsigned char>(s[n - 1]) == 0x9D)) {
    n -= 3;
  }
  return n > 0 && (s[n - 1] == '.' || s[n - 1] == '?' || s[n - 1] == '!' || s[n - 1] == ':');
}

// Leading "[n]" or "n." entry label; returns the number and label length.
std::optional<std::pair<int, std::size_t>> entry_label(std::string_view s, std::size_t at = 0) {
  std::size_t i = at;
  bool bracket = i < s.size() && s[i] == '[';
  if (bracket) ++i;
  std::size_t start = i;
  while (i < s.size() && text::is_ascii_digit(s[i]) && i - start < 4) ++i;
  if (i == start || (i < s.size() && text::is_ascii_digit(s[i]))) return std::nullopt;
  int n = std::stoi(std::string(s.substr(start, i - start)));
  if (n < 1) return std::nullopt;
  if (bracket) {
    if (i >= s.size() || s[i] != ']') return std::nullopt;
    ++i;
  } else {
    if (i >= s.size() || s[i] != '.') return std::nullopt;
    ++i;
    if (i >= s.size() || s[i] != ' ') return std::nullopt;
  }
  return std::make_pair(n, i - at);
}

std::string join_line_texts(const std::string& a, const std::string& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.size() >= 2 && a.back() == '-' && a[a.size() - 2] != ' ' && a[a.size() - 2] != '-') {
    std::size_t w = a.size() - 1;
    while (w > 0 && a[w - 1] != ' ') --w;
    std::string_view fragment(a.data() + w, a.size() - 1 - w);
    bool lower_fragment = !fragment.empty() && std::all_of(fragment.begin(), fragment.end(), text::is_ascii_lower);
    if (lower_fragment && text::is_ascii_lower(b.front())) return a.substr(0, a.size() - 1) + b;
    return a + b;
  }
  return a + " " + b;
}

const std::set<std::string>& keyword_set() {
  static const std::set<std::string> k = {
      "abstract",        "introduction",   "background",       "related work",
      "related works",   "method",         "methods",          "methodology",
      "approach",        "experiments",    "experiment",       "experimental setup",
      "experimental results", "evaluation", "results",         "results and discussion",
      "discussion",      "conclusion",     "conclusions",      "conclusion and future work",
      "conclusions and future work", "future work", "limitations", "preliminaries",
      "acknowledgment",  "acknowledgments", "acknowledgement", "acknowledgements",
      "references",      "bibliography",   "appendix",         "literature cited",
      "works cited",     "reference",      "keywords",         "index terms"};
  return k;
}

bool is_keyword_title(std::string_view title) {
  std::string t = text::to_lower(text::trim(title));
  if (keyword_set().count(t)) return true;
  // "Appendix A", "Appendix B: Proofs"
  if (t.rfind("appendix ", 0) == 0) return word_count(t) <= 8;
  return false;
}

bool starts_upper(std::string_view s) {
  if (s.empty()) return false;
  unsigned char c = static_cast<unsigned char>(s.front());
  return text::is_ascii_upper(static_cast<char>(c)) || c >= 0x80;
}

bool title_shaped(std::string_view title) {
  title = text::trim(title);
  if (title.empty() || !starts_upper(title)) return false;
  if (word_count(title) > 12) return false;
  char last = title.back();
  return last != '.' && last != ',' && last != ';';
}

std::optional<std::pair<std::string, std::size_t>> roman_label(std::string_view s) {
  static const char* romans[] = {"XII", "XI", "X", "IX", "VIII", "VII", "VI", "V", "IV", "III", "II", "I"};
  for (const char* r : romans) {
    std::string_view rv(r);
    if (s.size() > rv.size() + 2 && s.substr(0, rv.size()) == rv && s[rv.size()] == '.' && s[rv.size() + 1] == ' ') {
      return std::make_pair(std::string(rv), rv.size() + 2);
    }
  }
  return std::nullopt;
}

}  // namespace

bool LayoutProfile::is_body(const TextSpan& s) const {
  return s.font == body_font.name && std::abs(s.size - body_font.size) < 0.25;
}

bool is_bibliography_title(std::string_view title) {
  std::string t = text::to_lower(text::trim(title));
  while (!t.empty() && (t.back() == ':' || t.back() == '.')) t.pop_back();
  return t == "references" || t == "bibliography" || t == "reference" || t == "literature cited" ||
         t == "works cited";
}

std::optional<HeadingPattern> match_heading_pattern(std::string_view raw) {
  std::string t = text::normalize_whitespace(raw);
  if (t.empty() || t.size() > 160) return std::nullopt;
  std::string stripped = t;
  while (!stripped.empty() && (stripped.back() == ':' || stripped.back() == '.')) stripped.pop_back();

  // Numbered: N, N.M, N.M.K followed by a title.
  {
    std::size_t i = 0;
    std::vector<int> parts;
    while (true) {
      std::size_t start = i;
      while (i < t.size() && text::is_ascii_digit(t[i]) && i - start < 3) ++i;
      if (i == start || i - start > 2) {
        parts.clear();
        break;
      }
      parts.push_back(std::stoi(t.substr(start, i - start)));
      if (i + 1 < t.size() && t[i] == '.' && text::is_ascii_digit(t[i + 1]) && parts.size() < 3) {
        ++i;
        continue;
      }
      break;
    }
    if (!parts.empty() && i < t.size()) {
      if (t[i] == '.') ++i;
      if (i < t.size() && t[i] == ' ') {
        bool valid = std::all_of(parts.begin(), parts.end(), [](int p) { return p >= 1 && p <= 99; });
        std::string title = std::string(text::trim(t.substr(i)));
        while (!title.empty() && title.back() == ':') title.pop_back();
        if (valid && title_shaped(title)) {
          std::string label;
          for (std::size_t k = 0; k < parts.size(); ++k) label += (k ? "." : "") + std::to_string(parts[k]);
          return HeadingPattern{HeadingPattern::Kind::numbered, label, title, static_cast<int>(parts.size())};
        }
      }
      return std::nullopt;
    }
  }
  if (auto roman = roman_label(t)) {
    std::string title = std::string(text::trim(t.substr(roman->second)));
    while (!title.empty() && title.back() == ':') title.pop_back();
    if (title_shaped(title)) return HeadingPattern{HeadingPattern::Kind::numbered, roman->first, title, 1};
  }
  // Letter labels: "a.", "A.", "(a)".
  if (t.size() > 4 && t[0] == '(' && text::is_ascii_lower(t[1]) && t[2] == ')' && t[3] == ' ') {
    std::string title = std::string(text::trim(t.substr(4)));
    if (title_shaped(title)) return HeadingPattern{HeadingPattern::Kind::letter, t.substr(0, 3), title, 0};
  }
  if (t.size() > 3 && text::is_ascii_alpha(t[0]) && t[1] == '.' && t[2] == ' ') {
    std::string title = std::string(text::trim(t.substr(3)));
    if (title_shaped(title)) return HeadingPattern{HeadingPattern::Kind::letter, t.substr(0, 1), title, 0};
  }
  if (starts_upper(stripped) && is_keyword_title(stripped)) {
    return HeadingPattern{HeadingPattern::Kind::keyword, stripped, stripped, 1};
  }
  return std::nullopt;
}

std::vector<std::size_t> reading_order(const std::vector<TextSpan>& spans, const LayoutProfile& profile) {
  std::vector<std::size_t> idx(spans.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const TextSpan& x = spans[a];
    const TextSpan& y = spans[b];
    if (x.page != y.page) return x.page < y.page;
    int cx = profile.column_of(x.x0), cy = profile.column_of(y.x0);
    if (cx != cy) return cx < cy;
    if (std::abs(x.baseline() - y.baseline()) > 0.01) return x.baseline() < y.baseline();
    return x.x0 < y.x0;
  });
  return idx;
}

LayoutProfile analyze_layout(const std::vector<TextSpan>& spans, const ExtractorConfig& config) {
  if (spans.empty()) throw Error(Errc::empty_document, "empty document: no text spans");
  LayoutProfile profile;

  std::map<std::pair<std::string, double>, std::size_t> glyphs;
  for (const auto& s : spans) {
    std::size_t n = 0;
    for (unsigned char c : s.text) {
      if ((c & 0xC0) != 0x80 && c != ' ') ++n;
    }
    glyphs[{s.font, round_to(s.size, 0.1)}] += n;
  }
  auto best = std::max_element(glyphs.begin(), glyphs.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
  profile.body_font.name = best->first.first;
  profile.body_font.size = best->first.second;

  std::vector<const TextSpan*> body;
  std::size_t bold_votes = 0;
  for (const auto& s : spans) {
    if (profile.is_body(s)) {
      body.push_back(&s);
      if (s.bold) ++bold_votes;
    }
  }
  profile.body_font.bold = bold_votes * 2 > body.size();

  // Column clustering on body-span left edges.
  std::vector<double> xs;
  for (const auto* s : body) xs.push_back(s->x0);
  const double window = 15;
  auto [ax, an] = densest(xs, window);
  std::vector<double> far;
  for (double x : xs) {
    if (std::abs(x - ax) > 100) far.push_back(x);
  }
  profile.column_count = 1;
  if (!far.empty()) {
    auto [bx, bn] = densest(far, window);
    double total = static_cast<double>(xs.size());
    if (an >= config.column_mass * total && bn >= config.column_mass * total) {
      profile.column_count = 2;
      double left_c = std::min(ax, bx), right_c = std::max(ax, bx);
      std::vector<double> left, right;
      for (double x : xs) {
        if (x >= left_c - 1 && x <= left_c + 2 * window) left.push_back(x);
        if (x >= right_c - 1 && x <= right_c + 2 * window) right.push_back(x);
      }
      double lm = modal_value(left, 0.5), rm = modal_value(right, 0.5);
      profile.column_margins = {lm, rm};
      profile.column_split = rm - 6;
    }
  }
  // A second column filled only by non-body text (a bibliography set in a
  // smaller font) shows up as body lines much narrower than the text block.
  if (profile.column_count == 1 && !body.empty()) {
    std::vector<double> widths;
    for (const auto* s : body) widths.push_back(s->x1 - s->x0);
    std::nth_element(widths.begin(), widths.begin() + static_cast<long>(widths.size() / 2), widths.end());
    double median_width = widths[widths.size() / 2];
    double lo = 1e9, hi = -1e9;
    std::vector<double> other;
    for (const auto& s : spans) {
      if (std::abs(s.size - profile.body_font.size) > 2.5 || text::trim(s.text).size() < 3) continue;
      lo = std::min(lo, s.x0);
      hi = std::max(hi, s.x1);
      if (std::abs(s.x0 - ax) > 100 && s.x0 > ax) other.push_back(s.x0);
    }
    if (other.size() >= 3 && median_width < 0.6 * (hi - lo)) {
      auto [bx, bn] = densest(other, window);
      if (bn >= 3) {
        std::vector<double> left, right;
        for (double x : xs) {
          if (x >= ax - 1 && x <= ax + 2 * window) left.push_back(x);
        }
        for (double x : other) {
          if (std::abs(x - bx) <= 2 * window) right.push_back(x);
        }
        profile.column_count = 2;
        profile.column_margins = {modal_value(left, 0.5), modal_value(right, 0.5)};
        profile.column_split = *std::min_element(right.begin(), right.end()) - 6;
      }
    }
  }
  if (profile.column_count == 1) profile.column_margins = {modal_value(xs, 0.5)};

  std::map<int, PageBox> boxes;
  for (const auto& s : spans) {
    auto [it, inserted] = boxes.try_emplace(s.page, PageBox{s.page, s.x0, s.y0, s.x1, s.y1});
    if (!inserted) {
      it->second.x0 = std::min(it->second.x0, s.x0);
      it->second.y0 = std::min(it->second.y0, s.y0);
      it->second.x1 = std::max(it->second.x1, s.x1);
      it->second.y1 = std::max(it->second.y1, s.y1);
    }
  }
  for (const auto& [p, b] : boxes) profile.page_boxes.push_back(b);

  std::vector<Line> lines = build_lines(spans, profile);
  std::vector<double> gaps, indents;
  const Line* prev = nullptr;
  std::set<std::pair<std::string, std::pair<double, bool>>> seen_heading_fonts;
  for (const Line& l : lines) {
    const TextSpan& first = spans[l.spans.front()];
    bool body_line = profile.is_body(first);
    if (!body_line) {
      bool distinct = first.size > profile.body_font.size + 0.5 || (first.bold && !profile.body_font.bold);
      if (distinct && seen_heading_fonts.insert({first.font, {round_to(first.size, 0.1), first.bold}}).second) {
        profile.heading_fonts.push_back({first.font, round_to(first.size, 0.1), first.bold});
      }
      prev = nullptr;
      continue;
    }
    if (prev && prev->page == l.page && prev->column == l.column) {
      double d = l.baseline - prev->baseline;
      if (d > 0 && d < 4 * profile.body_font.size) gaps.push_back(d);
    }
    double indent = l.x0 - profile.margin_of(l.column);
    if (indent > 1 && indent < 6 * profile.body_font.size) indents.push_back(indent);
    prev = &l;
  }
  profile.median_line_gap = median(gaps);
  profile.median_indent = median(indents);
  std::sort(profile.heading_fonts.begin(), profile.heading_fonts.end(),
            [](const FontStyle& a, const FontStyle& b) { return a.size > b.size; });
  return profile;
}

std::vector<Heading> detect_headings(const std::vector<TextSpan>& spans, const LayoutProfile& profile,
                                     const ExtractorConfig& config) {
  struct Candidate {
    Heading h;
    int score = 0;
    std::string key;
    bool letter = false;
  };
  std::vector<Candidate> found;
  std::vector<Line> lines = build_lines(spans, profile);
  int last_structural_depth = 0;
  bool in_bib = false;
  int bib_depth = 0;
  const Line* prev = nullptr;
  for (const Line& l : lines) {
    const std::size_t si = l.spans.front();
    const TextSpan& s = spans[si];
    const Line* before = prev;
    prev = &l;
    auto pat = match_heading_pattern(s.text);
    if (!pat) continue;
    const bool font_differs = s.size > profile.body_font.size + 0.5 || (s.bold && !profile.body_font.bold);
    const bool at_col_start = std::abs(s.x0 - profile.margin_of(l.column)) <= 2.0;
    const bool whole_line = l.spans.size() == 1;
    const std::string text = text::normalize_whitespace(s.text);
    const bool plain_line_ok = at_col_start && whole_line && word_count(text) <= 12 && text.back() != '.';
    bool ok = false;
    switch (pat->kind) {
      case HeadingPattern::Kind::letter: ok = font_differs; break;
      case HeadingPattern::Kind::numbered: ok = in_bib ? font_differs : (font_differs || plain_line_ok); break;
      case HeadingPattern::Kind::keyword: ok = font_differs || plain_line_ok; break;
    }
    if (!ok) continue;
    Heading h;
    h.label = pat->label;
    h.title = pat->title;
    h.depth = pat->kind == HeadingPattern::Kind::letter ? last_structural_depth + 1 : pat->depth;
    if (pat->kind != HeadingPattern::Kind::letter) last_structural_depth = h.depth;
    h.anchor = {s.page, l.column, s.x0, s.baseline()};
    h.span_index = si;
    h.is_bibliography = is_bibliography_title(pat->title);
    if (h.is_bibliography) {
      in_bib = true;
      bib_depth = h.depth;
    } else if (in_bib && h.depth <= bib_depth) {
      in_bib = false;
    }
    bool gap_before = !before || before->page != l.page || before->column != l.column ||
                      (profile.median_line_gap > 0 &&
                       l.baseline - before->baseline > config.gap_factor * profile.median_line_gap);
    Candidate c{h, (font_differs ? 2 : 0) + (whole_line ? 1 : 0) + (gap_before ? 1 : 0),
                text::normalize(h.label + " " + h.title), pat->kind == HeadingPattern::Kind::letter};
    found.push_back(std::move(c));
  }
  // The same heading text found more than once: keep the best-placed ones.
  std::map<std::string, int> best_score;
  for (const auto& c : found) best_score[c.key] = std::max(best_score[c.key], c.score);
  // Letter depths are relative to the last surviving numbered heading.
  std::vector<Heading> out;
  int last = 0;
  for (auto& c : found) {
    if (c.score != best_score[c.key]) continue;
    if (c.letter) {
      c.h.depth = last + 1;
    } else {
      last = c.h.depth;
    }
    out.push_back(std::move(c.h));
  }
  return out;
}

SegmentResult segment_paragraphs(const std::vector<TextSpan>& spans, const LayoutProfile& profile,
                                 const std::vector<Heading>& headings, std::string_view doc_id,
                                 const ExtractorConfig& config) {
  SegmentResult result;
  result.root.label = "front-matter";
  result.root.depth = 0;
  std::vector<Line> lines = build_lines(spans, profile);
  std::map<std::size_t, const Heading*> heading_at;
  for (const auto& h : headings) heading_at[h.span_index] = &h;

  const double body_size = profile.body_font.size;
  auto indent_of = [&](const Line& l) { return l.x0 - profile.margin_of(l.column); };
  auto at_margin = [&](const Line& l) { return std::abs(indent_of(l)) <= 2.0; };
  auto indented = [&](const Line& l) {
    return profile.median_indent > 0 && indent_of(l) >= config.indent_factor * profile.median_indent;
  };

  // Pass 1: section membership of each line, and whether each bibliography
  // section uses hanging indents.
  std::vector<int> section_of(lines.size(), -1);
  std::vector<bool> bib_section;
  {
    int current = -1;
    bool in_bib = false;
    int bib_depth = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto it = heading_at.find(lines[i].spans.front());
      if (it != heading_at.end()) {
        const Heading& h = *it->second;
        if (h.is_bibliography) {
          in_bib = true;
          bib_depth = h.depth;
        } else if (in_bib && h.depth <= bib_depth) {
          in_bib = false;
        }
        bib_section.push_back(in_bib);
        current = static_cast<int>(bib_section.size()) - 1;
        section_of[i] = -2;  // heading line
        continue;
      }
      section_of[i] = current;
    }
  }
  std::vector<bool> hanging(bib_section.size(), false);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    int sec = section_of[i];
    if (sec < 0 || !bib_section[sec]) continue;
    if (indent_of(lines[i]) > 2.0 && indent_of(lines[i]) < 6 * body_size && !entry_label(lines[i].text)) {
      hanging[sec] = true;
    }
  }

  auto dropped_line = [&](const Line& l, bool bib) {
    bool has_body_font = false, has_body_size = false;
    for (std::size_t i : l.spans) {
      has_body_font = has_body_font || profile.is_body(spans[i]);
      has_body_size = has_body_size || std::abs(spans[i].size - body_size) <= 0.5;
    }
    double ind = indent_of(l);
    bool near_margin = ind >= -2.0 && ind <= std::max(3 * profile.median_indent, 2 * body_size);
    bool digits_only = !l.text.empty() && std::all_of(l.text.begin(), l.text.end(), [](char c) {
      return text::is_ascii_digit(c) || c == ' ';
    });
    if (digits_only && !near_margin) return true;
    if (has_body_font) return false;
    if (bib) {
      bool readable = false;
      for (std::size_t i : l.spans) readable = readable || spans[i].size >= 0.7 * body_size;
      return !(readable && ind >= -2.0 && ind < 6 * body_size);
    }
    return !(has_body_size && near_margin);
  };

  struct Open {
    SectionNode* node;
    std::string path;
  };
  std::vector<Open> stack{{&result.root, "0"}};
  std::vector<const Line*> acc;

  auto flush = [&]() {
    if (acc.empty()) return;
    std::string text;
    for (const Line* l : acc) text = join_line_texts(text, l->text);
    text = text::normalize_whitespace(text);
    if (!text.empty()) {
      SectionNode& node = *stack.back().node;
      Paragraph p;
      p.text = text;
      p.para_id = make_para_id(doc_id, stack.back().path, node.paragraphs.size() + 1);
      p.page_span = {acc.front()->page, acc.back()->page};
      for (const Line* l : acc) {
        p.page_span.first = std::min(p.page_span.first, l->page);
        p.page_span.second = std::max(p.page_span.second, l->page);
      }
      p.token_estimate = estimate_tokens(p.text);
      node.paragraphs.push_back(std::move(p));
    }
    acc.clear();
  };

  const Line* prev = nullptr;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Line& l = lines[i];
    if (section_of[i] == -2) {
      flush();
      prev = nullptr;
      const Heading& h = *heading_at.at(l.spans.front());
      while (stack.size() > 1 && stack.back().node->depth >= h.depth) stack.pop_back();
      SectionNode& parent = *stack.back().node;
      SectionNode child;
      child.label = h.label;
      child.heading = h.title;
      child.depth = parent.depth + 1;
      parent.children.push_back(std::move(child));
      stack.push_back({&parent.children.back(), stack.back().path + "." + std::to_string(parent.children.size())});
      // Text on the heading line after the heading span is body text.
      if (l.spans.size() > 1) {
        Line rest = l;
        rest.spans.erase(rest.spans.begin());
        rest.text = join_spans(spans, rest.spans);
        rest.x0 = spans[rest.spans.front()].x0;
        lines[i] = rest;  // keep storage stable for acc pointers
        acc.push_back(&lines[i]);
        prev = &lines[i];
      }
      continue;
    }
    const int sec = section_of[i];
    const bool bib = sec >= 0 && bib_section[sec];
    if (dropped_line(l, bib)) {
      for (std::size_t si : l.spans) result.dropped.push_back(spans[si]);
      continue;
    }
    bool brk = false;
    if (!acc.empty() && prev) {
      const bool label_start = bib && entry_label(l.text).has_value();
      const bool hang = bib && hanging[sec];
      if (prev->page != l.page || prev->column != l.column) {
        if (bib) {
          brk = label_start || (hang && at_margin(l)) || (!hang && indented(l));
        } else {
          brk = indented(l);
        }
      } else {
        double gap = l.baseline - prev->baseline;
        if (gap < -0.5 || (profile.median_line_gap > 0 && gap > config.gap_factor * profile.median_line_gap)) {
          brk = true;
        } else if (bib) {
          brk = label_start || (hang && at_margin(l)) || (!hang && indented(l) && ends_terminal(prev->text));
        } else {
          brk = indented(l) && ends_terminal(prev->text);
        }
      }
    }
    if (brk) flush();
    acc.push_back(&l);
    prev = &l;
  }
  flush();
  return result;
}

namespace {

struct YearHit {
  std::size_t pos = std::string::npos;
  int year = 0;
  std::string suffix;
};

YearHit find_year(std::string_view s) {
  for (std::size_t i = 0; i + 4 <= s.size(); ++i) {
    if (i > 0 && text::is_ascii_digit(s[i - 1])) continue;
    if (!std::all_of(s.begin() + i, s.begin() + i + 4, text::is_ascii_digit)) continue;
    if (i + 4 < s.size() && text::is_ascii_digit(s[i + 4])) continue;
    int y = std::stoi(std::string(s.substr(i, 4)));
    if (y < 1800 || y > 2199) continue;
    YearHit hit{i, y, {}};
    if (i + 5 <= s.size() && i + 4 < s.size() && text::is_ascii_lower(s[i + 4]) &&
        (i + 5 == s.size() || !text::is_ascii_alpha(s[i + 5]))) {
      hit.suffix = std::string(1, s[i + 4]);
    }
    return hit;
  }
  return {};
}

bool is_initial(std::string_view tok) {
  // "A.", "A.-B.", "J.R.", "Y" (Vancouver style), "McA." is not.
  if (tok.empty()) return false;
  if (tok.size() == 1) return text::is_ascii_upper(tok[0]);
  bool any_upper = false;
  for (char c : tok) {
    if (text::is_ascii_upper(c)) {
      any_upper = true;
    } else if (c != '.' && c != '-') {
      return false;
    }
  }
  return any_upper && (tok.back() == '.' || tok.size() <= 3);
}

std::optional<NamedKey> named_key_from_entry(std::string_view raw) {
  YearHit y = find_year(raw);
  if (y.pos == std::string::npos) return std::nullopt;
  std::string_view head = raw.substr(0, y.pos);
  std::size_t cut = head.size();
  for (std::string_view stop : {",", " and ", " & ", " et al", ";", "(", ":"}) {
    std::size_t p = head.find(stop);
    if (p != std::string_view::npos) cut = std::min(cut, p);
  }
  std::string chunk(text::trim(head.substr(0, cut)));
  while (!chunk.empty() && (chunk.back() == '.' || chunk.back() == ',')) {
    // Keep the period of a trailing initial ("A. Lee" never ends in one).
    if (chunk.back() == '.' && chunk.size() >= 2 && text::is_ascii_upper(chunk[chunk.size() - 2]) &&
        (chunk.size() == 2 || chunk[chunk.size() - 3] == ' ' || chunk[chunk.size() - 3] == '.')) {
      break;
    }
    chunk.pop_back();
  }
  std::vector<std::string> toks;
  {
    std::size_t i = 0;
    while (i < chunk.size()) {
      while (i < chunk.size() && chunk[i] == ' ') ++i;
      std::size_t j = i;
      while (j < chunk.size() && chunk[j] != ' ') ++j;
      if (j > i) toks.push_back(chunk.substr(i, j - i));
      i = j;
    }
  }
  if (toks.empty()) return std::nullopt;
  int last_initial = -1, first_initial = -1;
  for (int k = 0; k < static_cast<int>(toks.size()); ++k) {
    if (is_initial(toks[k])) {
      last_initial = k;
      if (first_initial < 0) first_initial = k;
    }
  }
  std::vector<std::string> name_toks;
  if (last_initial < 0) {
    name_toks = toks;
  } else if (last_initial + 1 < static_cast<int>(toks.size())) {
    name_toks.assign(toks.begin() + last_initial + 1, toks.end());
  } else {
    name_toks.assign(toks.begin(), toks.begin() + first_initial);
  }
  std::string surname;
  for (const auto& t : name_toks) surname += (surname.empty() ? "" : " ") + t;
  if (surname.empty() || !std::any_of(surname.begin(), surname.end(), [](char c) {
        return text::is_ascii_alpha(c) || static_cast<unsigned char>(c) >= 0x80;
      })) {
    return std::nullopt;
  }
  return NamedKey{{surname}, y.year, y.suffix};
}

bool named_shaped(std::string_view para) {
  return starts_upper(para) && find_year(para).pos != std::string::npos;
}

void collect_bibliography(const SectionNode& node, bool inside, std::vector<const Paragraph*>& out) {
  bool bib = inside || is_bibliography_title(node.heading);
  if (bib) {
    for (const auto& p : node.paragraphs) out.push_back(&p);
  }
  for (const auto& c : node.children) collect_bibliography(c, bib, out);
}

}  // namespace

ReferenceList extract_reference_list(const SectionNode& root, const ExtractorConfig& config) {
  ReferenceList list;
  std::vector<const Paragraph*> paras;
  collect_bibliography(root, false, paras);
  if (paras.empty()) return list;

  std::size_t labelled = 0, named = 0;
  for (const Paragraph* p : paras) {
    if (entry_label(p->text)) ++labelled;
    if (named_shaped(p->text)) ++named;
  }
  const double total = static_cast<double>(paras.size());
  if (labelled >= config.style_vote * total) {
    list.style = NotationStyle::enumerated;
  } else if (named >= config.style_vote * total) {
    list.style = NotationStyle::named;
  }

  auto append_residue = [&](const std::string& residue) {
    std::string r = text::normalize_whitespace(residue);
    if (r.empty()) return;
    list.residue.push_back(r);
    if (!list.entries.empty()) {
      ReferenceEntry& e = list.entries.back();
      e = make_reference(e.key, e.raw + " " + r);
    }
  };

  if (list.style == NotationStyle::enumerated) {
    std::set<int> used;
    for (const Paragraph* p : paras) {
      const std::string& t = p->text;
      // Entry starts: a label at the paragraph start, or the next expected
      // label after whitespace (entries merged into one paragraph).
      std::vector<std::pair<std::size_t, std::pair<int, std::size_t>>> starts;
      int expect = used.empty() ? 1 : *used.rbegin() + 1;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0 && t[i - 1] != ' ') continue;
        auto lab = entry_label(t, i);
        if (!lab) continue;
        if (i == 0 || lab->first == expect) {
          starts.push_back({i, *lab});
          expect = lab->first + 1;
        }
      }
      std::size_t cursor = 0;
      for (std::size_t k = 0; k <= starts.size(); ++k) {
        std::size_t end = k < starts.size() ? starts[k].first : t.size();
        if (end > cursor) {
          std::string piece = t.substr(cursor, end - cursor);
          if (k == 0) {
            append_residue(piece);
          } else {
            int n = starts[k - 1].second.first;
            std::string raw = text::normalize_whitespace(piece.substr(starts[k - 1].second.second));
            if (used.insert(n).second && !raw.empty()) {
              list.entries.push_back(make_reference(n, raw));
            } else {
              append_residue(piece);
            }
          }
        }
        if (k < starts.size()) cursor = starts[k].first;
      }
    }
    std::stable_sort(list.entries.begin(), list.entries.end(), [](const ReferenceEntry& a, const ReferenceEntry& b) {
      return std::get<int>(a.key) < std::get<int>(b.key);
    });
    return list;
  }

  // Named or unknown: one paragraph per entry.
  int next_number = 1;
  for (const Paragraph* p : paras) {
    std::string raw = text::normalize_whitespace(p->text);
    if (list.style == NotationStyle::named) {
      if (auto key = named_key_from_entry(raw)) {
        list.entries.push_back(make_reference(*key, raw));
      } else {
        append_residue(raw);
      }
    } else if (auto lab = entry_label(raw)) {
      std::string body = text::normalize_whitespace(raw.substr(lab->second));
      list.entries.push_back(make_reference(lab->first, body));
      next_number = std::max(next_number, lab->first + 1);
    } else if (auto key = named_key_from_entry(raw)) {
      list.entries.push_back(make_reference(*key, raw));
    } else {
      list.entries.push_back(make_reference(next_number++, raw));
    }
  }
  // Same first author and year without an explicit letter: assign letters in
  // list order so keys stay unique.
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    if (const auto* k = std::get_if<NamedKey>(&list.entries[i].key)) {
      groups[{text::to_lower(k->surnames.front()), k->year}].push_back(i);
    }
  }
  for (auto& [g, members] : groups) {
    std::set<std::string> taken;
    for (std::size_t i : members) taken.insert(std::get<NamedKey>(list.entries[i].key).suffix);
    bool collide = members.size() > 1;
    if (!collide) continue;
    char letter = 'a';
    std::set<std::string> assigned;
    for (std::size_t i : members) {
      auto& k = std::get<NamedKey>(list.entries[i].key);
      if (!k.suffix.empty() && assigned.insert(k.suffix).second) continue;
      while (taken.count(std::string(1, letter)) || assigned.count(std::string(1, letter))) ++letter;
      k.suffix = std::string(1, letter);
      assigned.insert(k.suffix);
      ++letter;
    }
  }
  // Any integer collision in unknown-style lists: renumber from the end.
  std::set<int> ints;
  int top = 0;
  for (const auto& e : list.entries) {
    if (const int* n = std::get_if<int>(&e.key)) top = std::max(top, *n);
  }
  for (auto& e : list.entries) {
    if (int* n = std::get_if<int>(&e.key); n && !ints.insert(*n).second) {
      *n = ++top;
      ints.insert(*n);
    }
  }
  return list;
}

namespace {

void strip_bibliography(SectionNode& node, bool inside) {
  bool bib = inside || is_bibliography_title(node.heading);
  if (bib) node.paragraphs.clear();
  for (auto& c : node.children) strip_bibliography(c, bib);
}

nlohmann::json font_json(const FontStyle& f) { return {{"name", f.name}, {"size", f.size}, {"bold", f.bold}}; }

}  // namespace

nlohmann::json ExtractionReport::to_json() const {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : profile.page_boxes) {
    boxes.push_back({{"page", b.page}, {"bbox", {b.x0, b.y0, b.x1, b.y1}}});
  }
  nlohmann::json hfonts = nlohmann::json::array();
  for (const auto& f : profile.heading_fonts) hfonts.push_back(font_json(f));
  nlohmann::json hs = nlohmann::json::array();
  for (const auto& h : headings) {
    hs.push_back({{"label", h.label},
                  {"title", h.title},
                  {"depth", h.depth},
                  {"page", h.anchor.page},
                  {"column", h.anchor.column},
                  {"x", h.anchor.x},
                  {"y", h.anchor.y},
                  {"bibliography", h.is_bibliography}});
  }
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& s : dropped) {
    ds.push_back({{"page", s.page}, {"text", s.text}, {"bbox", {s.x0, s.y0, s.x1, s.y1}}, {"font", s.font},
                  {"size", s.size}});
  }
  return {{"profile",
           {{"column_count", profile.column_count},
            {"body_font", font_json(profile.body_font)},
            {"heading_fonts", hfonts},
            {"median_line_gap", profile.median_line_gap},
            {"median_indent", profile.median_indent},
            {"column_margins", profile.column_margins},
            {"page_boxes", boxes}}},
          {"headings", hs},
          {"dropped_spans", ds}};
}

SourceDocument extract_from_layer(const pdf::TextLayer& layer, std::string doc_id, const ExtractorConfig& config,
                                  ExtractionReport* report) {
  LayoutProfile profile = analyze_layout(layer.spans, config);
  std::vector<Heading> headings = detect_headings(layer.spans, profile, config);
  SegmentResult seg = segment_paragraphs(layer.spans, profile, headings, doc_id, config);
  ReferenceList refs = extract_reference_list(seg.root, config);

  SourceDocument doc;
  doc.doc_id = std::move(doc_id);
  doc.page_count = std::max<int>(1, static_cast<int>(layer.pages.size()));
  doc.notation_style = refs.style;
  doc.references = std::move(refs.entries);
  doc.root = std::move(seg.root);
  strip_bibliography(doc.root, false);
  for_each_paragraph(doc.root, [&](const SectionNode&, Paragraph& p) {
    p.markers = resolve_markers(parse_citations(p.text, doc.notation_style), doc.references);
  });

  // Title: the largest text on the first page when it stands out from the
  // body font.
  double top = 0;
  for (const auto& s : layer.spans) {
    if (s.page == 1) top = std::max(top, s.size);
  }
  if (top > profile.body_font.size + 0.5) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < layer.spans.size(); ++i) {
      if (layer.spans[i].page == 1 && std::abs(layer.spans[i].size - top) < 0.1) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = layer.spans[a];
      const auto& y = layer.spans[b];
      if (std::abs(x.baseline() - y.baseline()) > 0.01) return x.baseline() < y.baseline();
      return x.x0 < y.x0;
    });
    std::string title;
    for (std::size_t i : idx) title += (title.empty() ? "" : " ") + layer.spans[i].text;
    doc.title = text::normalize_whitespace(title);
  }
  if (doc.title.empty()) {
    auto paras = paragraphs_in_order(doc);
    if (!paras.empty()) doc.title = text::truncate_words(paras.front()->text, 80);
  }
  if (report) {
    report->profile = profile;
    report->headings = headings;
    report->dropped = std::move(seg.dropped);
  }
  return doc;
}

SourceDocument extract_document(std::string_view pdf_bytes, std::string doc_id, const ExtractorConfig& config,
                                ExtractionReport* report) {
  pdf::TextLayer layer = pdf::read_text_layer(pdf_bytes);
  return extract_from_layer(layer, std::move(doc_id), config, report);
}

}  // namespace llmref

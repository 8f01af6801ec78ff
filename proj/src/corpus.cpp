#include "llmref/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "llmref/citations.hpp"
#include "llmref/error.hpp"
#include "llmref/text.hpp"

namespace llmref {

using json = nlohmann::json;

std::string_view to_string(NotationStyle style) {
  switch (style) {
    case NotationStyle::enumerated: return "enumerated";
    case NotationStyle::named: return "named";
    case NotationStyle::unknown: return "unknown";
  }
  return "unknown";
}

NotationStyle notation_style_from_string(std::string_view s) {
  if (s == "enumerated") return NotationStyle::enumerated;
  if (s == "named") return NotationStyle::named;
  if (s == "unknown") return NotationStyle::unknown;
  throw Error(Errc::malformed_input, "unknown notation style '" + std::string(s) + "'");
}

std::string key_label(const ReferenceKey& key) {
  if (const int* n = std::get_if<int>(&key)) return std::to_string(*n);
  const auto& nk = std::get<NamedKey>(key);
  std::string out;
  for (std::size_t i = 0; i < nk.surnames.size(); ++i) {
    if (i) out += " & ";
    out += nk.surnames[i];
  }
  return out + " " + std::to_string(nk.year) + nk.suffix;
}

ReferenceEntry make_reference(ReferenceKey key, std::string raw) {
  ReferenceEntry e;
  e.key = std::move(key);
  e.normalized = text::normalize(raw);
  e.raw = std::move(raw);
  return e;
}

const SourceDocument* Corpus::find_document(std::string_view doc_id) const {
  for (const auto& d : documents) {
    if (d.doc_id == doc_id) return &d;
  }
  return nullptr;
}

std::size_t Corpus::paragraph_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) for_each_paragraph(d.root, [&](const SectionNode&, const Paragraph&) { ++n; });
  return n;
}

std::string make_para_id(std::string_view doc_id, std::string_view section_path, std::size_t ordinal) {
  return std::string(doc_id) + "/" + std::string(section_path) + "/" + std::to_string(ordinal);
}

std::string doc_id_of(std::string_view para_id) {
  auto slash = para_id.find('/');
  return std::string(para_id.substr(0, slash));
}

std::vector<const Paragraph*> paragraphs_in_order(const SourceDocument& doc) {
  std::vector<const Paragraph*> out;
  for_each_paragraph(doc.root, [&](const SectionNode&, const Paragraph& p) { out.push_back(&p); });
  return out;
}

const Paragraph* find_paragraph(const Corpus& corpus, std::string_view para_id) {
  const SourceDocument* doc = corpus.find_document(doc_id_of(para_id));
  if (!doc) return nullptr;
  const Paragraph* found = nullptr;
  for_each_paragraph(doc->root, [&](const SectionNode&, const Paragraph& p) {
    if (!found && p.para_id == para_id) found = &p;
  });
  return found;
}

const Paragraph& get_paragraph(const Corpus& corpus, std::string_view para_id) {
  const Paragraph* p = find_paragraph(corpus, para_id);
  if (!p) throw Error(Errc::not_found, "unknown paragraph '" + std::string(para_id) + "'");
  return *p;
}

const ReferenceEntry* find_reference(const SourceDocument& doc, const ReferenceKey& key) {
  for (const auto& e : doc.references) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

std::vector<int> reference_gaps(const SourceDocument& doc) {
  std::set<int> present;
  for (const auto& e : doc.references) {
    if (const int* n = std::get_if<int>(&e.key)) present.insert(*n);
  }
  std::vector<int> gaps;
  if (present.empty()) return gaps;
  for (int k = 1; k < *present.rbegin(); ++k) {
    if (!present.count(k)) gaps.push_back(k);
  }
  return gaps;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

[[noreturn]] void violation(const std::string& what) { throw Error(Errc::validation, what); }

void validate_section(const SourceDocument& doc, const SectionNode& node, int expected_depth,
                      std::set<std::string>& para_ids) {
  if (node.depth != expected_depth) {
    violation("section '" + node.label + "' in document " + doc.doc_id + " has depth " +
              std::to_string(node.depth) + ", expected " + std::to_string(expected_depth));
  }
  for (const auto& p : node.paragraphs) {
    if (p.para_id.empty() || !para_ids.insert(p.para_id).second) {
      violation("duplicate or empty para_id '" + p.para_id + "'");
    }
    if (doc_id_of(p.para_id) != doc.doc_id) {
      violation("paragraph " + p.para_id + " does not belong to document " + doc.doc_id);
    }
    if (text::normalize_whitespace(p.text).empty()) violation("paragraph " + p.para_id + " has empty text");
    if (p.page_span.first < 1 || p.page_span.first > p.page_span.second || p.page_span.second > doc.page_count) {
      violation("paragraph " + p.para_id + " has invalid page_span");
    }
    if (p.token_estimate < 0) violation("paragraph " + p.para_id + " has negative token_estimate");
    std::size_t prev_end = 0;
    for (const auto& m : p.markers) {
      if (m.span_begin >= m.span_end || m.span_end > p.text.size()) {
        violation("marker '" + m.raw + "' in paragraph " + p.para_id + " lies outside the text");
      }
      if (m.span_begin < prev_end) {
        violation("markers in paragraph " + p.para_id + " overlap or are out of order");
      }
      prev_end = m.span_end;
      if (m.unresolved != m.resolved_keys.empty()) {
        violation("marker '" + m.raw + "' in paragraph " + p.para_id + " has inconsistent unresolved flag");
      }
      if (m.style == NotationStyle::enumerated) {
        for (std::size_t i = 1; i < m.resolved_keys.size(); ++i) {
          if (!(m.resolved_keys[i - 1] < m.resolved_keys[i])) {
            violation("marker '" + m.raw + "' in paragraph " + p.para_id + " has unsorted resolved keys");
          }
        }
      }
      for (const auto& k : m.resolved_keys) {
        if (!find_reference(doc, k)) {
          violation("marker '" + m.raw + "' in paragraph " + p.para_id + " resolves to unknown reference " +
                    key_label(k));
        }
      }
    }
  }
  for (const auto& child : node.children) validate_section(doc, child, expected_depth + 1, para_ids);
}

}  // namespace

void validate(const Corpus& corpus) {
  if (corpus.schema_version < 1 || corpus.schema_version > kSchemaVersion) {
    throw Error(Errc::schema_version, "unsupported schema_version " + std::to_string(corpus.schema_version));
  }
  std::set<std::string> doc_ids;
  std::set<std::string> para_ids;
  for (const auto& doc : corpus.documents) {
    if (doc.doc_id.empty() || doc.doc_id.find('/') != std::string::npos) {
      violation("invalid doc_id '" + doc.doc_id + "'");
    }
    if (!doc_ids.insert(doc.doc_id).second) violation("duplicate doc_id " + doc.doc_id);
    if (doc.page_count < 1) violation("document " + doc.doc_id + " has page_count < 1");
    std::set<int> enumerated;
    for (const auto& e : doc.references) {
      if (const int* n = std::get_if<int>(&e.key)) {
        if (*n < 1) violation("document " + doc.doc_id + " has reference key < 1");
        if (!enumerated.insert(*n).second) {
          violation("document " + doc.doc_id + " has duplicate reference key " + std::to_string(*n));
        }
      }
    }
    validate_section(doc, doc.root, 0, para_ids);
  }
  for (const auto& [id, s] : corpus.summaries) {
    if (id != s.para_id) violation("summary map key '" + id + "' differs from para_id '" + s.para_id + "'");
    if (!para_ids.count(s.para_id)) violation("summary for unknown para_id " + s.para_id);
    if (text::trim(s.summary_text).empty()) violation("empty summary for " + s.para_id);
    if (s.token_estimate < 0) violation("summary for " + s.para_id + " has negative token_estimate");
  }
}

// ---------------------------------------------------------------------------
// JSON encoding

namespace {

json key_to_json(const ReferenceKey& key) {
  if (const int* n = std::get_if<int>(&key)) return *n;
  const auto& nk = std::get<NamedKey>(key);
  json j = {{"surnames", nk.surnames}, {"year", nk.year}};
  if (!nk.suffix.empty()) j["suffix"] = nk.suffix;
  return j;
}

ReferenceKey key_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<int>();
  NamedKey nk;
  nk.surnames = j.at("surnames").get<std::vector<std::string>>();
  nk.year = j.at("year").get<int>();
  if (j.contains("suffix")) nk.suffix = j.at("suffix").get<std::string>();
  return nk;
}

json section_to_json(const SectionNode& node) {
  json paragraphs = json::array();
  for (const auto& p : node.paragraphs) {
    json markers = json::array();
    for (const auto& m : p.markers) {
      json keys = json::array();
      for (const auto& k : m.resolved_keys) keys.push_back(key_to_json(k));
      markers.push_back({{"span", {m.span_begin, m.span_end}},
                         {"raw", m.raw},
                         {"style", to_string(m.style)},
                         {"resolved_keys", keys},
                         {"unresolved", m.unresolved}});
    }
    paragraphs.push_back({{"para_id", p.para_id},
                          {"text", p.text},
                          {"page_span", {p.page_span.first, p.page_span.second}},
                          {"markers", markers},
                          {"token_estimate", p.token_estimate}});
  }
  json children = json::array();
  for (const auto& c : node.children) children.push_back(section_to_json(c));
  return {{"label", node.label},
          {"heading", node.heading},
          {"depth", node.depth},
          {"paragraphs", paragraphs},
          {"children", children}};
}

SectionNode section_from_json(const json& j, const std::vector<ReferenceEntry>& references) {
  SectionNode node;
  node.label = j.at("label").get<std::string>();
  node.heading = j.at("heading").get<std::string>();
  node.depth = j.at("depth").get<int>();
  for (const auto& pj : j.at("paragraphs")) {
    Paragraph p;
    p.para_id = pj.at("para_id").get<std::string>();
    p.text = pj.at("text").get<std::string>();
    const auto& span = pj.at("page_span");
    p.page_span = {span.at(0).get<int>(), span.at(1).get<int>()};
    p.token_estimate = pj.at("token_estimate").get<std::int64_t>();
    for (const auto& mj : pj.at("markers")) {
      CitationMarker m;
      const auto& s = mj.at("span");
      m.span_begin = s.at(0).get<std::size_t>();
      m.span_end = s.at(1).get<std::size_t>();
      m.raw = mj.at("raw").get<std::string>();
      m.style = notation_style_from_string(mj.at("style").get<std::string>());
      for (const auto& k : mj.at("resolved_keys")) m.resolved_keys.push_back(key_from_json(k));
      m.unresolved = mj.at("unresolved").get<bool>();
      // Candidate keys and the ambiguity flag are derived, not stored.
      auto reparsed = parse_citations(m.raw, m.style);
      if (reparsed.size() == 1 && reparsed[0].span_begin == 0 && reparsed[0].span_end == m.raw.size()) {
        m.cited = reparsed[0].cited;
        auto resolved = resolve_markers({reparsed[0]}, references);
        m.ambiguous = resolved[0].ambiguous;
      }
      p.markers.push_back(std::move(m));
    }
    node.paragraphs.push_back(std::move(p));
  }
  for (const auto& cj : j.at("children")) node.children.push_back(section_from_json(cj, references));
  return node;
}

json corpus_to_json(const Corpus& corpus) {
  json documents = json::array();
  for (const auto& d : corpus.documents) {
    json refs = json::array();
    for (const auto& e : d.references) refs.push_back({{"key", key_to_json(e.key)}, {"raw", e.raw}});
    documents.push_back({{"doc_id", d.doc_id},
                         {"title", d.title},
                         {"origin", d.origin},
                         {"notation_style", to_string(d.notation_style)},
                         {"page_count", d.page_count},
                         {"root", section_to_json(d.root)},
                         {"references", refs}});
  }
  json summaries = json::array();
  for (const auto& [id, s] : corpus.summaries) {
    summaries.push_back({{"para_id", s.para_id},
                         {"summary_text", s.summary_text},
                         {"model_id", s.model_id},
                         {"created_at", s.created_at},
                         {"token_estimate", s.token_estimate}});
  }
  return {{"schema_version", corpus.schema_version},
          {"corpus_id", corpus.corpus_id},
          {"documents", documents},
          {"summaries", summaries}};
}

Corpus corpus_from_json(const json& j) {
  Corpus c;
  c.schema_version = j.at("schema_version").get<int>();
  if (c.schema_version > kSchemaVersion) {
    throw Error(Errc::schema_version, "corpus schema_version " + std::to_string(c.schema_version) +
                                          " is newer than supported version " + std::to_string(kSchemaVersion));
  }
  c.corpus_id = j.at("corpus_id").get<std::string>();
  for (const auto& dj : j.at("documents")) {
    SourceDocument d;
    d.doc_id = dj.at("doc_id").get<std::string>();
    d.title = dj.at("title").get<std::string>();
    d.origin = dj.at("origin").get<std::string>();
    d.notation_style = notation_style_from_string(dj.at("notation_style").get<std::string>());
    d.page_count = dj.at("page_count").get<int>();
    for (const auto& rj : dj.at("references")) {
      d.references.push_back(make_reference(key_from_json(rj.at("key")), rj.at("raw").get<std::string>()));
    }
    d.root = section_from_json(dj.at("root"), d.references);
    c.documents.push_back(std::move(d));
  }
  for (const auto& sj : j.at("summaries")) {
    ParagraphSummary s;
    s.para_id = sj.at("para_id").get<std::string>();
    s.summary_text = sj.at("summary_text").get<std::string>();
    s.model_id = sj.at("model_id").get<std::string>();
    s.created_at = sj.at("created_at").get<std::string>();
    s.token_estimate = sj.at("token_estimate").get<std::int64_t>();
    if (!c.summaries.emplace(s.para_id, s).second) {
      throw Error(Errc::validation, "duplicate summary for " + s.para_id);
    }
  }
  return c;
}

}  // namespace

std::string corpus_to_json_string(const Corpus& corpus) {
  validate(corpus);
  return corpus_to_json(corpus).dump(2) + "\n";
}

Corpus corpus_from_json_string(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_input, std::string("malformed corpus JSON: ") + e.what());
  }
  Corpus c;
  try {
    c = corpus_from_json(j);
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_input, std::string("corpus JSON does not match the schema: ") + e.what());
  }
  validate(c);
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  const std::string payload = corpus_to_json_string(corpus);
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot open " + tmp.string() + " for writing");
    out << payload;
    out.flush();
    if (!out) throw Error(Errc::io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::io, "cannot replace " + path.string());
  }
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open corpus file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return corpus_from_json_string(buf.str());
}

}  // namespace llmref

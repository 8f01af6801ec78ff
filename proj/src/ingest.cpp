#include "llmref/ingest.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "llmref/error.hpp"
#include "llmref/parallel.hpp"
#include "llmref/prompts.hpp"
#include "llmref/text.hpp"

namespace llmref {

std::string content_doc_id(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < 8 && i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ParagraphSummary summarize_paragraph(const Paragraph& paragraph, Gateway& gateway, const IngestOptions& options) {
  std::string source = text::normalize_whitespace(paragraph.text);
  if (source.empty()) throw Error(Errc::validation, "paragraph " + paragraph.para_id + " is empty");
  ParagraphSummary s;
  s.para_id = paragraph.para_id;
  s.model_id = options.params.model_id;
  s.created_at = utc_timestamp();
  const std::int64_t source_tokens = gateway.estimate(source);
  if (source_tokens <= options.short_paragraph_tokens) {
    s.summary_text = source;
    s.token_estimate = source_tokens;
    return s;
  }
  // Very long paragraphs are cut to what fits in one call.
  const auto& p = options.params;
  std::int64_t room = p.context_window_tokens - p.max_output_tokens -
                      gateway.estimate(prompts::overhead_text(prompts::Kind::summary)) - 1;
  std::string prompt_text = source;
  if (gateway.estimate(prompt_text) > room) prompt_text = text::truncate_words(source, static_cast<std::size_t>(std::max<std::int64_t>(room, 1) * 4));
  std::string reply;
  try {
    reply = text::normalize_whitespace(gateway.complete(prompts::summary(prompt_text), p, Stage::summarize));
  } catch (const Error& e) {
    throw Error(e.code(), "summarizing " + paragraph.para_id + ": " + e.what(), e.detail());
  }
  if (reply.empty() || gateway.estimate(reply) >= source_tokens) {
    std::string base = reply.empty() ? source : reply;
    std::size_t max_chars = static_cast<std::size_t>((source_tokens - 1) * 4);
    reply = text::truncate_words(base, max_chars);
    while (!reply.empty() && gateway.estimate(reply) >= source_tokens) {
      reply = text::truncate_words(reply, reply.size() > 4 ? reply.size() - 4 : 0);
    }
    if (reply.empty()) reply = std::string(text::trim(source.substr(0, max_chars)));
  }
  s.summary_text = reply;
  s.token_estimate = gateway.estimate(reply);
  return s;
}

IngestResult ingest_document(std::string_view pdf_bytes, const Corpus& corpus, Gateway& gateway,
                             const IngestOptions& options, std::string origin) {
  IngestResult result;
  result.doc_id = content_doc_id(pdf_bytes);
  if (corpus.find_document(result.doc_id)) {
    result.corpus = corpus;
    return result;
  }
  SourceDocument doc = extract_document(pdf_bytes, result.doc_id, options.extractor);
  doc.origin = std::move(origin);
  if (doc.title.empty()) doc.title = std::filesystem::path(doc.origin).stem().string();
  for_each_paragraph(doc.root, [&](const SectionNode&, Paragraph& p) { p.token_estimate = gateway.estimate(p.text); });

  std::vector<const Paragraph*> paras = paragraphs_in_order(doc);
  std::vector<ParagraphSummary> summaries(paras.size());
  parallel_for(paras.size(), options.parallelism,
               [&](std::size_t i) { summaries[i] = summarize_paragraph(*paras[i], gateway, options); });

  result.corpus = corpus;
  result.corpus.documents.push_back(std::move(doc));
  for (auto& s : summaries) result.corpus.summaries[s.para_id] = std::move(s);
  validate(result.corpus);
  result.added = true;
  return result;
}

std::vector<std::string> ingest_files(const std::filesystem::path& corpus_path,
                                      const std::vector<std::filesystem::path>& pdfs, Gateway& gateway,
                                      const IngestOptions& options) {
  Corpus corpus;
  if (std::filesystem::exists(corpus_path)) corpus = load_corpus(corpus_path);
  std::vector<std::string> ids;
  bool changed = false;
  for (const auto& pdf : pdfs) {
    std::string bytes = read_file(pdf);
    try {
      IngestResult r = ingest_document(bytes, corpus, gateway, options, pdf.string());
      ids.push_back(r.doc_id);
      changed = changed || r.added;
      corpus = std::move(r.corpus);
    } catch (const Error& e) {
      throw Error(e.code(), pdf.string() + ": " + e.what(), e.detail());
    }
  }
  if (changed || !std::filesystem::exists(corpus_path)) save_corpus(corpus, corpus_path);
  return ids;
}

}  // namespace llmref

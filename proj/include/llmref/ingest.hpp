#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "llmref/corpus.hpp"
#include "llmref/extractor.hpp"
#include "llmref/gateway.hpp"

namespace llmref {

struct IngestOptions {
  GenerationParams params;
  ExtractorConfig extractor;
  // Paragraphs at or under this many tokens are their own summary.
  std::int64_t short_paragraph_tokens = 40;
  int parallelism = 4;
};

// First 16 hex chars of the SHA-256 of the bytes.
std::string content_doc_id(std::string_view bytes);

// One summarize-stage call unless the paragraph is short. The result is
// always shorter than the source (or the source itself when short).
ParagraphSummary summarize_paragraph(const Paragraph& paragraph, Gateway& gateway, const IngestOptions& options);

struct IngestResult {
  Corpus corpus;
  std::string doc_id;
  bool added = false;  // false when the same bytes were already ingested
};

// Pure with respect to storage: returns the new corpus value.
IngestResult ingest_document(std::string_view pdf_bytes, const Corpus& corpus, Gateway& gateway,
                             const IngestOptions& options, std::string origin = {});

// Loads the corpus at `corpus_path` (or starts an empty one), ingests each
// PDF in order and saves once. Any failure leaves the file untouched.
std::vector<std::string> ingest_files(const std::filesystem::path& corpus_path,
                                      const std::vector<std::filesystem::path>& pdfs, Gateway& gateway,
                                      const IngestOptions& options);

std::string read_file(const std::filesystem::path& path);

}  // namespace llmref

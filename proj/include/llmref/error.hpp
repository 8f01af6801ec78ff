#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace llmref {

enum class Errc {
  io,
  malformed_input,
  validation,
  schema_version,
  not_found,
  unsupported_document,
  empty_document,
  budget_exceeded,
  budget_config,
  backend_unavailable,
  auth_missing,
  alignment_parse,
  empty_corpus,
  empty_report,
  domain,
  dataset_generation,
  synthesis_failed,
  usage,
};

std::string_view to_string(Errc code);

// All library failures surface as llmref::Error. `detail()` carries
// diagnostic payload (raw model reply, partial draft) when there is one.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

// Backend failure the gateway is allowed to retry.
class TransientError : public Error {
 public:
  explicit TransientError(const std::string& message)
      : Error(Errc::backend_unavailable, message) {}
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::io: return "io";
    case Errc::malformed_input: return "malformed_input";
    case Errc::validation: return "validation";
    case Errc::schema_version: return "schema_version";
    case Errc::not_found: return "not_found";
    case Errc::unsupported_document: return "unsupported_document";
    case Errc::empty_document: return "empty_document";
    case Errc::budget_exceeded: return "budget_exceeded";
    case Errc::budget_config: return "budget_config";
    case Errc::backend_unavailable: return "backend_unavailable";
    case Errc::auth_missing: return "auth_missing";
    case Errc::alignment_parse: return "alignment_parse";
    case Errc::empty_corpus: return "empty_corpus";
    case Errc::empty_report: return "empty_report";
    case Errc::domain: return "domain";
    case Errc::dataset_generation: return "dataset_generation";
    case Errc::synthesis_failed: return "synthesis_failed";
    case Errc::usage: return "usage";
  }
  return "unknown";
}

}  // namespace llmref

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llmref::prompts {

enum class Kind {
  summary,
  relevance,
  synthesis_initial,
  synthesis_refine,
  condense,
  alignment,
  dataset,
  statements,
  faithfulness_verdict,
  pseudo_questions,
  context_precision,
  context_recall,
  context_relevancy,
  correctness_support,
};

inline constexpr Kind kAllKinds[] = {Kind::summary,          Kind::relevance,          Kind::synthesis_initial,
                                     Kind::synthesis_refine, Kind::condense,           Kind::alignment,
                                     Kind::dataset,          Kind::statements,         Kind::faithfulness_verdict,
                                     Kind::pseudo_questions, Kind::context_precision,  Kind::context_recall,
                                     Kind::context_relevancy, Kind::correctness_support};

// Template text with {name} placeholders.
std::string_view template_for(Kind kind);
std::string_view name_of(Kind kind);

// Single pass: placeholder text inside substituted values is left alone.
// Throws Error(validation) when a placeholder has no value.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);
std::string render(Kind kind, const std::map<std::string, std::string>& values);

// Inverse of render: recovers placeholder values from a rendered prompt,
// or nullopt when the literal parts do not line up.
std::optional<std::map<std::string, std::string>> match(std::string_view tmpl, std::string_view rendered);

// Which template produced `rendered` (dataset prompts carry appended
// documents after the template).
std::optional<Kind> classify(std::string_view rendered);

// Rendered length of a template with every placeholder empty.
std::string overhead_text(Kind kind);

std::string relevance(std::string_view query, std::string_view paragraph);
std::string summary(std::string_view paragraph);
std::string synthesis_initial(std::string_view query, std::string_view paragraph);
std::string synthesis_refine(std::string_view query, std::string_view draft, std::string_view paragraph);
std::string condense(std::string_view query, std::string_view draft);
std::string alignment(std::string_view answer, std::string_view context);
// `documents` are appended after the template, one block per document.
std::string dataset(int total, const std::vector<std::string>& documents);

}  // namespace llmref::prompts

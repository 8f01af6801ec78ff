#include "llmref/prompts.hpp"

#include <vector>

#include "llmref/error.hpp"

namespace llmref::prompts {

namespace {

constexpr std::string_view kSummary =
    "You are an experienced researcher. Summarize the following paragraph in 2–3 sentences preserving "
    "technical terms and any citation markers verbatim. Paragraph: {paragraph}";

constexpr std::string_view kRelevance =
    R"(You are an experienced researcher tasked with identifying relevant information.
Paragraph: {paragraph}
Query: {query}
Instructions: Determine whether the paragraph provides information that directly answers or significantly contributes to the query.
If the paragraph is relevant to the query, respond with 'True'. If it is not relevant, respond with 'False'. Provide no additional explanation.)";

constexpr std::string_view kSynthesisInitial =
    R"(You are a researcher writing a research paper.
**Paragraph**: {paragraph}
**Query**: {query}
**Instructions**: Summarize and synthesize the provided paragraph to create a cohesive and informative paragraph that addresses the query.
Ensure the synthesis uses the vocabulary and writing style of the original paragraph to maintain a natural and consistent tone.)";

constexpr std::string_view kSynthesisRefine =
    R"(You are a researcher writing a research paper.
**Existing Synthesis**: {response}
**New Paragraph**: {paragraph}
**Query**: {query}
**Instructions**: Integrate the information from the new paragraph into the existing synthesis to create a cohesive and informative paragraph that addresses the query.
Ensure the synthesis uses the vocabulary and writing style of the original paragraphs to maintain a natural and consistent tone.)";

constexpr std::string_view kCondense =
    R"(You are a researcher writing a research paper.
**Existing Synthesis**: {response}
**Query**: {query}
**Instructions**: Condense the existing synthesis into a shorter cohesive paragraph that still addresses the query. Keep every distinct finding and the vocabulary of the original text.)";

constexpr std::string_view kAlignment =
    R"(For a given synthesized result based on some source paragraphs, find the relevant source lines that are most relevant to each line of the synthesized result.
Synthesized result: {synthesized_result}.
Source Paragraphs:  {context}.
Just provide the source lines for each line of synthesized result, for example: Synthesized Line: ... Corresponding Source Line: ...   Do not add explanation and source lines if they are not exactly relevant.)";

constexpr std::string_view kDataset =
    R"(You are an expert research scientist.
Instructions: Create a list of {total} questions (max 5 at a time) that require using information from all three provided input documents (or at least two of the input documents). For each question, please include the following details:

Question: Formulate a question that integrates information from multiple documents.
Original Context Texts: Provide the exact contexts from the documents that were used to create the question, without any alterations.
Answer: Provide an answer for a research article derived from the original context texts.
Ensure that each question requires the synthesis of information from multiple documents. Maintain the integrity of the original context texts as they will be used later for evaluation purposes.
Return the response in the following python format:
data = [
    {
        "question": "Question 1",
        "context": ["Context 11", "Context 12"],
        "ground_truth": "Answer 1"
    },
    {
        "question": "Question 2",
        "context": ["Context 21", "Context 22"],
        "ground_truth": "Answer 2"
    },]


Please keep generating only if it is possible to generate unique questions that you did not generate them before. Generate 5 questions at a time. I want a total {total} questions.)";

constexpr std::string_view kStatements =
    R"(Break the answer below into short standalone factual statements. Return one statement per line, without numbering or commentary.
Question: {question}
Answer: {answer}
Statements:)";

constexpr std::string_view kFaithfulnessVerdict =
    R"(Context: {context}
Statement: {statement}
Instructions: Determine whether the statement can be directly inferred from the context. Respond with 'True' or 'False'. Provide no additional explanation.)";

constexpr std::string_view kPseudoQuestions =
    R"(Write {count} different questions that the answer below would answer. Return one question per line, without numbering or commentary.
Answer: {answer}
Questions:)";

constexpr std::string_view kContextPrecision =
    R"(Question: {question}
Context: {context}
Instructions: Determine whether the context is useful for answering the question. Respond with 'True' or 'False'. Provide no additional explanation.)";

constexpr std::string_view kContextRecall =
    R"(Context: {context}
Sentence: {sentence}
Instructions: Determine whether the sentence can be attributed to the context. Respond with 'True' or 'False'. Provide no additional explanation.)";

constexpr std::string_view kContextRelevancy =
    R"(Question: {question}
Sentence: {sentence}
Instructions: Determine whether the sentence is relevant for answering the question. Respond with 'True' or 'False'. Provide no additional explanation.)";

constexpr std::string_view kCorrectnessSupport =
    R"(Reference: {reference}
Statement: {statement}
Instructions: Determine whether the statement is supported by the reference. Respond with 'True' or 'False'. Provide no additional explanation.)";

struct Piece {
  bool placeholder;
  std::string text;
};

std::vector<Piece> split_template(std::string_view tmpl) {
  std::vector<Piece> out;
  std::string lit;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t close = tmpl.find('}', i);
      bool ident = close != std::string_view::npos && close > i + 1;
      for (std::size_t k = i + 1; ident && k < close; ++k) {
        char c = tmpl[k];
        ident = (c >= 'a' && c <= 'z') || c == '_';
      }
      if (ident) {
        out.push_back({false, lit});
        lit.clear();
        out.push_back({true, std::string(tmpl.substr(i + 1, close - i - 1))});
        i = close + 1;
        continue;
      }
    }
    lit.push_back(tmpl[i++]);
  }
  out.push_back({false, lit});
  return out;
}

}  // namespace

std::string_view template_for(Kind kind) {
  switch (kind) {
    case Kind::summary: return kSummary;
    case Kind::relevance: return kRelevance;
    case Kind::synthesis_initial: return kSynthesisInitial;
    case Kind::synthesis_refine: return kSynthesisRefine;
    case Kind::condense: return kCondense;
    case Kind::alignment: return kAlignment;
    case Kind::dataset: return kDataset;
    case Kind::statements: return kStatements;
    case Kind::faithfulness_verdict: return kFaithfulnessVerdict;
    case Kind::pseudo_questions: return kPseudoQuestions;
    case Kind::context_precision: return kContextPrecision;
    case Kind::context_recall: return kContextRecall;
    case Kind::context_relevancy: return kContextRelevancy;
    case Kind::correctness_support: return kCorrectnessSupport;
  }
  return kSummary;
}

std::string_view name_of(Kind kind) {
  switch (kind) {
    case Kind::summary: return "summary";
    case Kind::relevance: return "relevance";
    case Kind::synthesis_initial: return "synthesis_initial";
    case Kind::synthesis_refine: return "synthesis_refine";
    case Kind::condense: return "condense";
    case Kind::alignment: return "alignment";
    case Kind::dataset: return "dataset";
    case Kind::statements: return "statements";
    case Kind::faithfulness_verdict: return "faithfulness_verdict";
    case Kind::pseudo_questions: return "pseudo_questions";
    case Kind::context_precision: return "context_precision";
    case Kind::context_recall: return "context_recall";
    case Kind::context_relevancy: return "context_relevancy";
    case Kind::correctness_support: return "correctness_support";
  }
  return "summary";
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  for (const Piece& p : split_template(tmpl)) {
    if (!p.placeholder) {
      out += p.text;
      continue;
    }
    auto it = values.find(p.text);
    if (it == values.end()) throw Error(Errc::validation, "prompt placeholder {" + p.text + "} has no value");
    out += it->second;
  }
  return out;
}

std::string render(Kind kind, const std::map<std::string, std::string>& values) {
  return render(template_for(kind), values);
}

std::optional<std::map<std::string, std::string>> match(std::string_view tmpl, std::string_view rendered) {
  std::vector<Piece> pieces = split_template(tmpl);
  std::map<std::string, std::string> values;
  const std::string& head = pieces.front().text;
  if (rendered.substr(0, head.size()) != head) return std::nullopt;
  std::size_t pos = head.size();
  for (std::size_t k = 1; k + 1 < pieces.size(); k += 2) {
    const std::string& name = pieces[k].text;
    const std::string& lit = pieces[k + 1].text;
    bool last = k + 2 >= pieces.size();
    std::size_t end;
    if (last) {
      if (rendered.size() < pos + lit.size() || rendered.substr(rendered.size() - lit.size()) != lit) {
        return std::nullopt;
      }
      end = rendered.size() - lit.size();
    } else {
      end = lit.empty() ? pos : rendered.find(lit, pos);
      if (end == std::string_view::npos) return std::nullopt;
    }
    std::string value(rendered.substr(pos, end - pos));
    auto [it, inserted] = values.emplace(name, value);
    if (!inserted && it->second != value) return std::nullopt;
    pos = end + lit.size();
  }
  return values;
}

std::optional<Kind> classify(std::string_view rendered) {
  const std::string dataset_head = split_template(kDataset).front().text;
  if (rendered.substr(0, dataset_head.size()) == dataset_head) return Kind::dataset;
  for (Kind k : kAllKinds) {
    if (k == Kind::dataset) continue;
    if (match(template_for(k), rendered)) return k;
  }
  return std::nullopt;
}

std::string overhead_text(Kind kind) {
  std::map<std::string, std::string> empty;
  for (const Piece& p : split_template(template_for(kind))) {
    if (p.placeholder) empty[p.text] = "";
  }
  return render(kind, empty);
}

std::string relevance(std::string_view query, std::string_view paragraph) {
  return render(Kind::relevance, {{"paragraph", std::string(paragraph)}, {"query", std::string(query)}});
}

std::string summary(std::string_view paragraph) {
  return render(Kind::summary, {{"paragraph", std::string(paragraph)}});
}

std::string synthesis_initial(std::string_view query, std::string_view paragraph) {
  return render(Kind::synthesis_initial, {{"paragraph", std::string(paragraph)}, {"query", std::string(query)}});
}

std::string synthesis_refine(std::string_view query, std::string_view draft, std::string_view paragraph) {
  return render(Kind::synthesis_refine,
                {{"response", std::string(draft)}, {"paragraph", std::string(paragraph)}, {"query", std::string(query)}});
}

std::string condense(std::string_view query, std::string_view draft) {
  return render(Kind::condense, {{"response", std::string(draft)}, {"query", std::string(query)}});
}

std::string alignment(std::string_view answer, std::string_view context) {
  return render(Kind::alignment, {{"synthesized_result", std::string(answer)}, {"context", std::string(context)}});
}

std::string dataset(int total, const std::vector<std::string>& documents) {
  std::string out = render(Kind::dataset, {{"total", std::to_string(total)}});
  for (std::size_t i = 0; i < documents.size(); ++i) {
    out += "\n\nDocument " + std::to_string(i + 1) + ":\n" + documents[i];
  }
  return out;
}

}  // namespace llmref::prompts

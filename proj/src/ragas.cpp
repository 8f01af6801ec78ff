#include "llmref/ragas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "llmref/error.hpp"
#include "llmref/parallel.hpp"
#include "llmref/prompts.hpp"
#include "llmref/text.hpp"

namespace llmref {

using nlohmann::json;

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string join_contexts(const std::vector<std::string>& contexts) {
  std::string out;
  for (const auto& c : contexts) out += (out.empty() ? "" : "\n\n") + c;
  return out;
}

// Cuts `value` so the rendered prompt leaves room for the reply.
std::string fit(std::string_view value, prompts::Kind kind, std::int64_t other_tokens, const Gateway& gateway,
                const GenerationParams& params) {
  std::int64_t room = params.context_window_tokens - params.max_output_tokens -
                      gateway.estimate(prompts::overhead_text(kind)) - other_tokens - 1;
  if (room < 1) throw Error(Errc::budget_exceeded, "evaluation prompt leaves no room for context");
  if (gateway.estimate(value) <= room) return std::string(value);
  return text::truncate_words(value, static_cast<std::size_t>(room) * 4);
}

bool judge(prompts::Kind kind, const std::map<std::string, std::string>& values, Gateway& gateway,
           const EvalConfig& config) {
  return gateway.judge_boolean(prompts::render(kind, values), config.params, Stage::judge);
}

}  // namespace

json EvalConfig::to_json() const {
  return {{"model_id", params.model_id},
          {"temperature", params.temperature},
          {"npq", npq},
          {"correctness_weights", {correctness_f1_weight, correctness_similarity_weight}},
          {"ragas_components", components == RagasComponents::context_relevancy ? "FF,AR,CXR,CR" : "FF,AR,CP,CR"},
          {"prices", {{"input_per_1m", prices.input_per_1m}, {"output_per_1m", prices.output_per_1m}}}};
}

double ragas_score(double ff, double ar, double cxr, double cr) {
  for (double v : {ff, ar, cxr, cr}) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::domain, "Ragas component outside [0, 1]: " + std::to_string(v));
  }
  if (ff == 0 || ar == 0 || cxr == 0 || cr == 0) return 0.0;
  return 4.0 / (1.0 / ff + 1.0 / ar + 1.0 / cxr + 1.0 / cr);
}

double average_precision(const std::vector<bool>& relevant) {
  double sum = 0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < relevant.size(); ++k) {
    if (!relevant[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

std::optional<double> ratio(std::size_t hits, std::size_t total) {
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

std::vector<std::string> parse_line_list(std::string_view reply) {
  std::vector<std::string> out;
  for (const auto& raw : text::split_lines(reply)) {
    std::string_view line = text::trim(raw);
    // "1.", "2)", "-", "*" and "•" prefixes.
    std::size_t i = 0;
    while (i < line.size() && text::is_ascii_digit(line[i])) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
      line = text::trim(line.substr(i + 1));
    } else if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0) {
      line = text::trim(line.substr(2));
    } else if (line.rfind("•", 0) == 0) {
      line = text::trim(line.substr(std::string_view("•").size()));
    }
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

std::vector<std::string> extract_statements(std::string_view question, std::string_view answer, Gateway& gateway,
                                            const EvalConfig& config) {
  std::string a = fit(answer, prompts::Kind::statements, gateway.estimate(question), gateway, config.params);
  std::string prompt = prompts::render(prompts::Kind::statements, {{"question", std::string(question)}, {"answer", a}});
  return parse_line_list(gateway.complete(prompt, config.params, Stage::judge));
}

FaithfulnessBreakdown faithfulness(std::string_view question, std::string_view answer,
                                   const std::vector<std::string>& contexts, Gateway& gateway,
                                   const EvalConfig& config) {
  if (text::trim(answer).empty()) throw Error(Errc::validation, "faithfulness needs an answer");
  FaithfulnessBreakdown b;
  b.statements = extract_statements(question, answer, gateway, config);
  std::string joined = join_contexts(contexts);
  std::size_t ncs = 0;
  for (const auto& s : b.statements) {
    std::string ctx = fit(joined, prompts::Kind::faithfulness_verdict, gateway.estimate(s), gateway, config.params);
    bool v = judge(prompts::Kind::faithfulness_verdict, {{"context", ctx}, {"statement", s}}, gateway, config);
    b.supported.push_back(v);
    ncs += v;
  }
  b.score = ratio(ncs, b.statements.size());
  return b;
}

RelevancyBreakdown answer_relevancy(std::string_view question, std::string_view answer, Gateway& gateway,
                                    const EvalConfig& config) {
  if (text::trim(answer).empty()) throw Error(Errc::validation, "answer relevancy needs an answer");
  RelevancyBreakdown b;
  std::string a = fit(answer, prompts::Kind::pseudo_questions, 2, gateway, config.params);
  std::string prompt =
      prompts::render(prompts::Kind::pseudo_questions, {{"count", std::to_string(config.npq)}, {"answer", a}});
  auto questions = parse_line_list(gateway.complete(prompt, config.params, Stage::judge));
  if (questions.size() > static_cast<std::size_t>(std::max(config.npq, 0))) questions.resize(static_cast<std::size_t>(config.npq));
  b.pseudo_questions = questions;
  if (questions.empty()) return b;
  auto qv = gateway.embed(std::string(question));
  double sum = 0;
  for (const auto& pq : questions) {
    double c = clamp01(cosine(qv, gateway.embed(pq)));
    b.cosines.push_back(c);
    sum += c;
  }
  b.score = sum / static_cast<double>(questions.size());
  return b;
}

CountBreakdown context_precision(std::string_view question, const std::vector<std::string>& contexts, Gateway& gateway,
                                 const EvalConfig& config) {
  CountBreakdown b;
  if (contexts.empty()) throw Error(Errc::validation, "context precision needs at least one context");
  for (const auto& c : contexts) {
    std::string ctx = fit(c, prompts::Kind::context_precision, gateway.estimate(question), gateway, config.params);
    b.units.push_back(c);
    b.verdicts.push_back(
        judge(prompts::Kind::context_precision, {{"question", std::string(question)}, {"context", ctx}}, gateway, config));
  }
  b.score = average_precision(b.verdicts);
  return b;
}

CountBreakdown context_recall(std::string_view ground_truth, const std::vector<std::string>& contexts,
                              Gateway& gateway, const EvalConfig& config) {
  CountBreakdown b;
  std::string joined = join_contexts(contexts);
  std::size_t hits = 0;
  for (const auto& s : text::split_sentences(ground_truth)) {
    std::string ctx = fit(joined, prompts::Kind::context_recall, gateway.estimate(s), gateway, config.params);
    bool v = judge(prompts::Kind::context_recall, {{"context", ctx}, {"sentence", s}}, gateway, config);
    b.units.push_back(s);
    b.verdicts.push_back(v);
    hits += v;
  }
  b.score = ratio(hits, b.units.size());
  return b;
}

CountBreakdown context_relevancy(std::string_view question, const std::vector<std::string>& contexts,
                                 Gateway& gateway, const EvalConfig& config) {
  if (contexts.empty()) throw Error(Errc::validation, "context relevancy needs at least one context");
  CountBreakdown b;
  std::size_t hits = 0;
  for (const auto& c : contexts) {
    for (const auto& s : text::split_sentences(c)) {
      bool v = judge(prompts::Kind::context_relevancy, {{"question", std::string(question)}, {"sentence", s}}, gateway,
                     config);
      b.units.push_back(s);
      b.verdicts.push_back(v);
      hits += v;
    }
  }
  b.score = ratio(hits, b.units.size());
  return b;
}

double answer_similarity(std::string_view answer, std::string_view ground_truth, Gateway& gateway) {
  return clamp01(cosine(gateway.embed(std::string(answer)), gateway.embed(std::string(ground_truth))));
}

CorrectnessBreakdown answer_correctness(std::string_view question, std::string_view answer,
                                        std::string_view ground_truth, Gateway& gateway, const EvalConfig& config) {
  CorrectnessBreakdown b;
  b.answer_statements = extract_statements(question, answer, gateway, config);
  b.truth_statements = extract_statements(question, ground_truth, gateway, config);
  auto support = [&](const std::vector<std::string>& statements, std::string_view reference, std::vector<bool>& out) {
    std::size_t n = 0;
    for (const auto& s : statements) {
      std::string ref = fit(reference, prompts::Kind::correctness_support, gateway.estimate(s), gateway, config.params);
      bool v = judge(prompts::Kind::correctness_support, {{"reference", ref}, {"statement", s}}, gateway, config);
      out.push_back(v);
      n += v;
    }
    return n;
  };
  std::size_t tp = support(b.answer_statements, ground_truth, b.answer_supported);
  std::size_t covered = support(b.truth_statements, answer, b.truth_supported);
  b.similarity = answer_similarity(answer, ground_truth, gateway);
  auto precision = ratio(tp, b.answer_statements.size());
  auto recall = ratio(covered, b.truth_statements.size());
  if (!precision || !recall) return b;
  b.f1 = (*precision + *recall) == 0 ? 0.0 : 2 * *precision * *recall / (*precision + *recall);
  b.score = clamp01(config.correctness_f1_weight * *b.f1 + config.correctness_similarity_weight * b.similarity);
  return b;
}

std::optional<double> combined_score(const MetricBundle& m, RagasComponents components) {
  const auto& third = components == RagasComponents::context_relevancy ? m.context_relevancy : m.context_precision;
  if (!m.faithfulness || !m.answer_relevancy || !third || !m.context_recall) return std::nullopt;
  return ragas_score(*m.faithfulness, *m.answer_relevancy, *third, *m.context_recall);
}

json MetricBundle::to_json() const {
  json j;
  j["id"] = item_id;
  j["faithfulness"] = opt_json(faithfulness);
  j["answer_relevancy"] = opt_json(answer_relevancy);
  j["answer_similarity"] = opt_json(answer_similarity);
  j["answer_correctness"] = opt_json(answer_correctness);
  j["context_relevancy"] = opt_json(context_relevancy);
  j["context_precision"] = opt_json(context_precision);
  j["context_recall"] = opt_json(context_recall);
  j["ragas_score"] = opt_json(ragas_score);
  std::size_t ncs = std::count(ff_detail.supported.begin(), ff_detail.supported.end(), true);
  std::size_t ngts = std::count(cr_detail.verdicts.begin(), cr_detail.verdicts.end(), true);
  j["breakdown"] = {{"NCS", ncs},
                    {"TS", ff_detail.statements.size()},
                    {"CS", ar_detail.cosines},
                    {"NPQ", ar_detail.pseudo_questions.size()},
                    {"NGTS", ngts},
                    {"TGS", cr_detail.units.size()},
                    {"statements", ff_detail.statements},
                    {"pseudo_questions", ar_detail.pseudo_questions},
                    {"context_verdicts", cp_detail.verdicts},
                    {"relevant_sentences", std::count(cxr_detail.verdicts.begin(), cxr_detail.verdicts.end(), true)},
                    {"context_sentences", cxr_detail.units.size()},
                    {"correctness_f1", opt_json(ac_detail.f1)}};
  return j;
}

MetricBundle evaluate_item(const EvalItem& item, Gateway& gateway, const EvalConfig& config) {
  if (text::trim(item.question).empty() || text::trim(item.ground_truth).empty()) {
    throw Error(Errc::validation, "item " + item.id + " needs a question and a ground truth");
  }
  MetricBundle m;
  m.item_id = item.id;
  const bool has_answer = !text::trim(item.answer).empty();
  const bool has_contexts = !item.retrieved_contexts.empty();
  if (has_answer) {
    m.ff_detail = faithfulness(item.question, item.answer, item.retrieved_contexts, gateway, config);
    m.faithfulness = m.ff_detail.score;
    m.ar_detail = answer_relevancy(item.question, item.answer, gateway, config);
    m.answer_relevancy = m.ar_detail.score;
    m.answer_similarity = answer_similarity(item.answer, item.ground_truth, gateway);
    m.ac_detail = answer_correctness(item.question, item.answer, item.ground_truth, gateway, config);
    m.answer_correctness = m.ac_detail.score;
  }
  if (has_contexts) {
    m.cp_detail = context_precision(item.question, item.retrieved_contexts, gateway, config);
    m.context_precision = m.cp_detail.score;
    m.cxr_detail = context_relevancy(item.question, item.retrieved_contexts, gateway, config);
    m.context_relevancy = m.cxr_detail.score;
  }
  m.cr_detail = context_recall(item.ground_truth, item.retrieved_contexts, gateway, config);
  m.context_recall = m.cr_detail.score;
  m.ragas_score = combined_score(m, config.components);
  return m;
}

EvalReport summarize_run(std::vector<MetricBundle> bundles, const EvalConfig& config) {
  if (bundles.empty()) throw Error(Errc::empty_report, "no items to report");
  std::stable_sort(bundles.begin(), bundles.end(),
                   [](const MetricBundle& a, const MetricBundle& b) { return a.item_id < b.item_id; });
  EvalReport r;
  r.config = config;
  auto field = [](const MetricBundle& m, std::string_view name) -> const std::optional<double>& {
    if (name == "answer_relevancy") return m.answer_relevancy;
    if (name == "answer_correctness") return m.answer_correctness;
    if (name == "answer_similarity") return m.answer_similarity;
    if (name == "context_relevancy") return m.context_relevancy;
    if (name == "context_precision") return m.context_precision;
    if (name == "context_recall") return m.context_recall;
    return m.faithfulness;
  };
  for (const char* name : kMetricNames) {
    double sum = 0;
    int n = 0, excluded = 0;
    for (const auto& m : bundles) {
      const auto& v = field(m, name);
      if (v) {
        sum += *v;
        ++n;
      } else {
        ++excluded;
      }
    }
    if (n > 0) r.means[name] = sum / n;
    r.exclusions[name] = excluded;
  }
  MetricBundle mean_bundle;
  auto mean_of = [&](const char* name) -> std::optional<double> {
    auto it = r.means.find(name);
    return it == r.means.end() ? std::nullopt : std::optional<double>(it->second);
  };
  mean_bundle.faithfulness = mean_of("faithfulness");
  mean_bundle.answer_relevancy = mean_of("answer_relevancy");
  mean_bundle.context_relevancy = mean_of("context_relevancy");
  mean_bundle.context_precision = mean_of("context_precision");
  mean_bundle.context_recall = mean_of("context_recall");
  r.ragas_score = combined_score(mean_bundle, config.components);
  r.per_item = std::move(bundles);
  return r;
}

EvalReport evaluate_run(const std::vector<EvalItem>& items, Gateway& gateway, const EvalConfig& config) {
  if (items.empty()) throw Error(Errc::empty_report, "no items to evaluate");
  std::vector<MetricBundle> bundles(items.size());
  parallel_for(items.size(), gateway.parallelism(), [&](std::size_t i) {
    bundles[i] = evaluate_item(items[i], gateway, config);
    if (bundles[i].item_id.empty()) bundles[i].item_id = std::to_string(i + 1);
  });
  EvalReport r = summarize_run(std::move(bundles), config);
  r.ledger_summary = usage_summary_json(gateway.ledger(), config.prices);
  return r;
}

json EvalReport::to_json() const {
  json j;
  j["config"] = config.to_json();
  j["per_item"] = json::array();
  for (const auto& m : per_item) j["per_item"].push_back(m.to_json());
  j["means"] = means;
  j["ragas_score"] = opt_json(ragas_score);
  j["exclusions"] = exclusions;
  j["ledger_summary"] = ledger_summary.is_null() ? json::object() : ledger_summary;
  return j;
}

std::string EvalReport::to_table(std::string_view system_name) const {
  static const char* headers[] = {"Answer Relevancy", "Answer Correctness", "Answer Similarity", "Context Relevancy",
                                  "Context Precision", "Context Recall", "Faithfulness", "Ragas Score"};
  std::size_t name_width = std::max<std::size_t>(system_name.size(), 6);
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  std::string head = pad("System", name_width);
  std::string row = pad(std::string(system_name), name_width);
  for (std::size_t k = 0; k < 8; ++k) {
    std::size_t w = std::string_view(headers[k]).size();
    head += "  " + pad(headers[k], w);
    std::optional<double> v;
    if (k < 7) {
      auto it = means.find(kMetricNames[k]);
      if (it != means.end()) v = it->second;
    } else {
      v = ragas_score;
    }
    char buf[32];
    if (v) {
      std::snprintf(buf, sizeof buf, "%.3f", *v);
    } else {
      std::snprintf(buf, sizeof buf, "n/a");
    }
    row += "  " + pad(buf, w);
  }
  return head + "\n" + row + "\n";
}

// ---- dataset generation ----

namespace {

// Python literal to JSON: quotes, True/False/None, trailing commas and
// comments. Returns nullopt on an unterminated string.
std::optional<std::string> python_to_json(std::string_view s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '"' || c == '\'') {
      char q = c;
      std::string val;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        char d = s[i];
        if (d == '\\' && i + 1 < s.size()) {
          char e = s[i + 1];
          switch (e) {
            case 'n': val += '\n'; break;
            case 't': val += '\t'; break;
            case '\\': val += '\\'; break;
            case '\'': val += '\''; break;
            case '"': val += '"'; break;
            default: val += e;
          }
          i += 2;
          continue;
        }
        if (d == q) {
          closed = true;
          ++i;
          break;
        }
        val += d;
        ++i;
      }
      if (!closed) return std::nullopt;
      out += json(val).dump();
      continue;
    }
    if (c == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    if (text::is_ascii_alpha(c)) {
      std::size_t j = i;
      while (j < s.size() && (text::is_ascii_alpha(s[j]) || s[j] == '_')) ++j;
      std::string_view word = s.substr(i, j - i);
      if (word == "True") out += "true";
      else if (word == "False") out += "false";
      else if (word == "None") out += "null";
      else out += word;
      i = j;
      continue;
    }
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && (s[j] == ']' || s[j] == '}')) {
        i = j;
        continue;
      }
    }
    out += c;
    ++i;
  }
  return out;
}

// Top-level elements of the list starting at `open` ('['), split by
// bracket depth outside strings. Sets `closed` when the list terminates.
std::vector<std::string_view> list_elements(std::string_view s, std::size_t open, bool& closed) {
  std::vector<std::string_view> out;
  int depth = 0;
  char quote = 0;
  std::size_t start = open + 1;
  closed = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (quote) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
      continue;
    }
    if (c == '"' || c == '\'') quote = c;
    else if (c == '[' || c == '{' || c == '(') ++depth;
    else if (c == ']' || c == '}' || c == ')') {
      --depth;
      if (depth == 0) {
        auto tail = text::trim(s.substr(start, i - start));
        if (!tail.empty()) out.push_back(tail);
        closed = true;
        return out;
      }
    } else if (c == ',' && depth == 1) {
      auto el = text::trim(s.substr(start, i - start));
      if (!el.empty()) out.push_back(el);
      start = i + 1;
    }
  }
  return out;
}

std::optional<EvalItem> item_from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  EvalItem it;
  auto str = [&](std::initializer_list<const char*> keys) -> std::optional<std::string> {
    for (const char* k : keys) {
      if (j.contains(k) && j.at(k).is_string()) return j.at(k).get<std::string>();
    }
    return std::nullopt;
  };
  auto q = str({"question"});
  auto gt = str({"ground_truth", "answer"});
  if (!q || !gt || text::trim(*q).empty() || text::trim(*gt).empty()) return std::nullopt;
  it.question = std::string(text::trim(*q));
  it.ground_truth = std::string(text::trim(*gt));
  for (const char* k : {"context", "contexts", "gt_contexts"}) {
    if (!j.contains(k)) continue;
    const auto& c = j.at(k);
    if (c.is_string()) it.gt_contexts.push_back(c.get<std::string>());
    if (c.is_array()) {
      for (const auto& e : c) {
        if (!e.is_string()) return std::nullopt;
        it.gt_contexts.push_back(e.get<std::string>());
      }
    }
    break;
  }
  if (j.contains("id") && j.at("id").is_string()) it.id = j.at("id").get<std::string>();
  return it;
}

std::string document_text(const SourceDocument& doc) {
  std::string out;
  for (const Paragraph* p : paragraphs_in_order(doc)) out += (out.empty() ? "" : "\n") + p->text;
  return out;
}

}  // namespace

ParsedBatch parse_dataset_reply(std::string_view reply) {
  std::size_t anchor = reply.find("data");
  std::size_t open = reply.find('[', anchor == std::string_view::npos ? 0 : anchor);
  if (open == std::string_view::npos) open = reply.find('[');
  if (open == std::string_view::npos) {
    throw Error(Errc::dataset_generation, "dataset reply has no list", std::string(reply));
  }
  bool closed = false;
  auto elements = list_elements(reply, open, closed);
  ParsedBatch batch;
  for (std::string_view el : elements) {
    auto converted = python_to_json(el);
    std::optional<EvalItem> item;
    if (converted) {
      json j = json::parse(*converted, nullptr, false);
      if (!j.is_discarded()) item = item_from_json(j);
    }
    if (item) {
      batch.items.push_back(std::move(*item));
    } else {
      ++batch.skipped;
    }
  }
  if (batch.items.empty() && batch.skipped == 0 && !closed) {
    throw Error(Errc::dataset_generation, "dataset reply list is not terminated", std::string(reply));
  }
  return batch;
}

std::vector<EvalItem> generate_dataset(const Corpus& corpus, int target_count, Gateway& gateway,
                                       const EvalConfig& config, const DatasetOptions& options) {
  if (corpus.documents.empty()) throw Error(Errc::empty_corpus, "dataset generation needs documents");
  if (target_count < 1) throw Error(Errc::validation, "target count must be positive");
  const auto& params = config.params;
  std::int64_t room = params.context_window_tokens - params.max_output_tokens -
                      gateway.estimate(prompts::dataset(target_count, {})) - 1;
  std::int64_t per_doc = room / static_cast<std::int64_t>(corpus.documents.size()) - 8;
  if (per_doc < 16) throw Error(Errc::budget_exceeded, "too many documents for one dataset prompt");
  std::vector<std::string> docs;
  for (const auto& d : corpus.documents) {
    std::string t = document_text(d);
    if (gateway.estimate(t) > per_doc) t = text::truncate_words(t, static_cast<std::size_t>(per_doc) * 4);
    docs.push_back(std::move(t));
  }
  std::string prompt = prompts::dataset(target_count, docs);

  std::vector<EvalItem> items;
  std::set<std::string> seen;
  int stale = 0, failures = 0;
  std::string last_failure;
  while (static_cast<int>(items.size()) < target_count) {
    std::string reply = gateway.complete(prompt, params, Stage::dataset_gen);
    ParsedBatch batch;
    try {
      batch = parse_dataset_reply(reply);
    } catch (const Error& e) {
      if (e.code() != Errc::dataset_generation) throw;
      last_failure = reply;
      if (++failures >= options.max_parse_failures) {
        throw Error(Errc::dataset_generation,
                    std::to_string(failures) + " consecutive dataset replies could not be parsed", last_failure);
      }
      continue;
    }
    if (batch.items.empty() && batch.skipped > 0) {
      last_failure = reply;
      if (++failures >= options.max_parse_failures) {
        throw Error(Errc::dataset_generation,
                    std::to_string(failures) + " consecutive dataset replies could not be parsed", last_failure);
      }
      continue;
    }
    failures = 0;
    if (batch.skipped > 0) {
      gateway.record_event("dataset_skip", std::to_string(batch.skipped) + " malformed item(s) skipped");
    }
    int added = 0;
    for (auto& it : batch.items) {
      if (static_cast<int>(items.size()) >= target_count) break;
      if (!seen.insert(text::normalize(it.question)).second) continue;
      if (it.id.empty()) it.id = "q" + std::to_string(items.size() + 1);
      items.push_back(std::move(it));
      ++added;
    }
    if (added == 0 && ++stale >= options.max_stale_batches) break;
    if (added > 0) stale = 0;
  }
  return items;
}

json dataset_to_json(const std::vector<EvalItem>& items) {
  json arr = json::array();
  for (const auto& it : items) {
    json j = {{"id", it.id}, {"question", it.question}, {"ground_truth", it.ground_truth},
              {"gt_contexts", it.gt_contexts}};
    if (!it.answer.empty()) j["answer"] = it.answer;
    if (!it.retrieved_contexts.empty()) j["retrieved_contexts"] = it.retrieved_contexts;
    arr.push_back(std::move(j));
  }
  return {{"items", arr}};
}

std::vector<EvalItem> dataset_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("items") ? j.at("items") : j;
  if (!arr.is_array()) throw Error(Errc::malformed_input, "dataset must be a list of items");
  std::vector<EvalItem> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    auto it = item_from_json(arr[i]);
    if (!it) throw Error(Errc::malformed_input, "dataset item " + std::to_string(i + 1) + " is malformed");
    if (arr[i].contains("answer") && arr[i].contains("ground_truth") && arr[i].at("answer").is_string()) {
      it->answer = arr[i].at("answer").get<std::string>();
    }
    if (arr[i].contains("retrieved_contexts")) {
      it->retrieved_contexts = arr[i].at("retrieved_contexts").get<std::vector<std::string>>();
    }
    if (it->id.empty()) it->id = "q" + std::to_string(i + 1);
    out.push_back(std::move(*it));
  }
  return out;
}

}  // namespace llmref

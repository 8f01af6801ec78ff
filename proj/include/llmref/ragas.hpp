#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmref/corpus.hpp"
#include "llmref/gateway.hpp"

namespace llmref {

struct EvalItem {
  std::string id;
  std::string question;
  std::string ground_truth;
  std::vector<std::string> gt_contexts;
  std::vector<std::string> retrieved_contexts;
  std::string answer;
};

enum class RagasComponents {
  context_relevancy,  // FF, AR, CXR, CR (reproduces the published tables)
  context_precision,  // FF, AR, CP, CR
};

struct EvalConfig {
  GenerationParams params;
  int npq = 3;  // pseudo-questions per answer
  double correctness_f1_weight = 0.75;
  double correctness_similarity_weight = 0.25;
  RagasComponents components = RagasComponents::context_relevancy;
  PriceSheet prices;

  nlohmann::json to_json() const;
};

// Pure scoring pieces.
double ragas_score(double ff, double ar, double cxr, double cr);
// Sum over relevant ranks of precision@k, divided by the relevant count;
// zero when nothing is relevant.
double average_precision(const std::vector<bool>& relevant);
std::optional<double> ratio(std::size_t hits, std::size_t total);
double clamp01(double x);

// One statement or question per line; bullets, numbering and blanks dropped.
std::vector<std::string> parse_line_list(std::string_view reply);

struct FaithfulnessBreakdown {
  std::vector<std::string> statements;
  std::vector<bool> supported;
  std::optional<double> score;  // NCS / TS; nullopt when TS = 0
};

struct CountBreakdown {
  std::vector<std::string> units;  // sentences or contexts judged
  std::vector<bool> verdicts;
  std::optional<double> score;
};

struct RelevancyBreakdown {
  std::vector<std::string> pseudo_questions;
  std::vector<double> cosines;  // clamped to [0, 1]
  std::optional<double> score;
};

struct CorrectnessBreakdown {
  std::vector<std::string> answer_statements;
  std::vector<bool> answer_supported;
  std::vector<std::string> truth_statements;
  std::vector<bool> truth_supported;
  std::optional<double> f1;
  double similarity = 0;
  std::optional<double> score;
};

std::vector<std::string> extract_statements(std::string_view question, std::string_view answer, Gateway& gateway,
                                            const EvalConfig& config);
FaithfulnessBreakdown faithfulness(std::string_view question, std::string_view answer,
                                   const std::vector<std::string>& contexts, Gateway& gateway, const EvalConfig& config);
RelevancyBreakdown answer_relevancy(std::string_view question, std::string_view answer, Gateway& gateway,
                                    const EvalConfig& config);
CountBreakdown context_precision(std::string_view question, const std::vector<std::string>& contexts, Gateway& gateway,
                                 const EvalConfig& config);
CountBreakdown context_recall(std::string_view ground_truth, const std::vector<std::string>& contexts,
                              Gateway& gateway, const EvalConfig& config);
CountBreakdown context_relevancy(std::string_view question, const std::vector<std::string>& contexts,
                                 Gateway& gateway, const EvalConfig& config);
double answer_similarity(std::string_view answer, std::string_view ground_truth, Gateway& gateway);
CorrectnessBreakdown answer_correctness(std::string_view question, std::string_view answer,
                                        std::string_view ground_truth, Gateway& gateway, const EvalConfig& config);

struct MetricBundle {
  std::string item_id;
  std::optional<double> faithfulness;
  std::optional<double> answer_relevancy;
  std::optional<double> answer_similarity;
  std::optional<double> answer_correctness;
  std::optional<double> context_relevancy;
  std::optional<double> context_precision;
  std::optional<double> context_recall;
  std::optional<double> ragas_score;

  FaithfulnessBreakdown ff_detail;
  RelevancyBreakdown ar_detail;
  CountBreakdown cp_detail;
  CountBreakdown cr_detail;
  CountBreakdown cxr_detail;
  CorrectnessBreakdown ac_detail;

  nlohmann::json to_json() const;
};

// Ragas score over the configured components; nullopt when one is missing.
std::optional<double> combined_score(const MetricBundle& m, RagasComponents components);

MetricBundle evaluate_item(const EvalItem& item, Gateway& gateway, const EvalConfig& config);

inline constexpr const char* kMetricNames[] = {"answer_relevancy",  "answer_correctness", "answer_similarity",
                                               "context_relevancy", "context_precision",  "context_recall",
                                               "faithfulness"};

struct EvalReport {
  EvalConfig config;
  std::vector<MetricBundle> per_item;  // sorted by item id
  std::map<std::string, double> means;
  std::map<std::string, int> exclusions;
  std::optional<double> ragas_score;  // from the means
  nlohmann::json ledger_summary;

  nlohmann::json to_json() const;
  std::string to_table(std::string_view system_name = "LLM-Ref") const;
};

// Means skip undefined scores and count them in `exclusions`.
EvalReport summarize_run(std::vector<MetricBundle> bundles, const EvalConfig& config);
// Throws Error(empty_report) for an empty item list.
EvalReport evaluate_run(const std::vector<EvalItem>& items, Gateway& gateway, const EvalConfig& config);

struct DatasetOptions {
  int batch_size = 5;
  int max_stale_batches = 3;     // consecutive batches with nothing new
  int max_parse_failures = 3;    // consecutive unparseable batches
};

// Items from one reply; malformed entries are skipped and counted.
struct ParsedBatch {
  std::vector<EvalItem> items;
  int skipped = 0;
};

// Accepts the python-literal list the dataset prompt asks for (single or
// double quotes, True/False/None, trailing commas). Throws
// Error(dataset_generation) when no list can be found.
ParsedBatch parse_dataset_reply(std::string_view reply);

std::vector<EvalItem> generate_dataset(const Corpus& corpus, int target_count, Gateway& gateway,
                                       const EvalConfig& config, const DatasetOptions& options = {});

nlohmann::json dataset_to_json(const std::vector<EvalItem>& items);
std::vector<EvalItem> dataset_from_json(const nlohmann::json& j);

}  // namespace llmref

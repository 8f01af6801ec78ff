#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace llmref {

enum class Stage { summarize, retrieve, synthesize, align, judge, embed, dataset_gen };

std::string_view to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view s);
inline constexpr Stage kAllStages[] = {Stage::summarize, Stage::retrieve, Stage::synthesize, Stage::align,
                                       Stage::judge,     Stage::embed,    Stage::dataset_gen};

// ceil(code points / 4).
std::int64_t estimate_tokens(std::string_view text);

std::string utc_timestamp();

struct GenerationParams {
  std::string model_id = "gpt-3.5-turbo-16k";
  double temperature = 0.0;
  std::int64_t max_output_tokens = 1024;
  std::int64_t context_window_tokens = 16000;

  // Throws Error(validation).
  void validate() const;
};

struct UsageRecord {
  Stage stage = Stage::summarize;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t call_index = 0;
  std::string timestamp;

  bool operator==(const UsageRecord&) const = default;
};

nlohmann::json to_json(const UsageRecord& r);
UsageRecord usage_record_from_json(const nlohmann::json& j);

struct StageTotals {
  std::int64_t calls = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

// Append-only, thread-safe.
class UsageLedger {
 public:
  UsageLedger() = default;
  UsageLedger(const UsageLedger& other);
  UsageLedger& operator=(const UsageLedger& other);

  void append(const UsageRecord& r);
  std::vector<UsageRecord> records() const;
  std::size_t size() const;
  std::int64_t count(Stage stage) const;
  std::map<Stage, StageTotals> by_stage() const;
  std::int64_t total_input() const;
  std::int64_t total_output() const;
  void clear();

  std::string to_jsonl() const;
  static UsageLedger from_jsonl(std::string_view text);
  // Appends this ledger's records to a JSON-lines file.
  void append_to_file(const std::filesystem::path& path) const;
  static UsageLedger load_file(const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::vector<UsageRecord> records_;
};

struct PriceSheet {
  double input_per_1m = 0.150;
  double output_per_1m = 0.600;
};

struct CostReport {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double cost = 0;
};

CostReport cost_report(const UsageLedger& ledger, const PriceSheet& prices);
CostReport cost_report(const std::vector<UsageRecord>& records, const PriceSheet& prices);
// {stages:{name:{calls,input_tokens,output_tokens}}, input_tokens, output_tokens, cost, calls}
nlohmann::json usage_summary_json(const UsageLedger& ledger, const PriceSheet& prices);

struct Completion {
  std::string text;
  // Filled by backends that report exact usage; otherwise the gateway
  // estimator is used.
  std::optional<std::int64_t> input_tokens;
  std::optional<std::int64_t> output_tokens;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const std::string& prompt, const GenerationParams& params) = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;
  virtual std::string name() const = 0;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// "true"/"false" from the first alphabetic token, case-insensitive.
std::optional<bool> parse_verdict(std::string_view reply);

struct GatewayOptions {
  int max_retries = 2;
  std::chrono::milliseconds backoff{250};
  int parallelism = 4;
  std::function<std::int64_t(std::string_view)> estimator;  // empty = estimate_tokens
  std::function<void(std::string_view)> log;                 // diagnostics sink
};

struct GatewayEvent {
  std::string kind;  // "deviant_verdict", "retry"
  std::string detail;
};

// Shareable handle over a backend. Copies share the backend, the call
// counter, the main ledger and the parallelism limit; `with_tee` returns a
// handle that additionally records into another ledger (per-query usage).
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});

  Gateway with_tee(UsageLedger& extra) const;

  // Throws Error(budget_exceeded) before any call when the prompt does not
  // fit; TransientError from the backend is retried, then surfaces as
  // Error(backend_unavailable).
  std::string complete(const std::string& prompt, const GenerationParams& params, Stage stage);
  bool judge_boolean(const std::string& prompt, const GenerationParams& params, Stage stage);
  std::vector<double> embed(const std::string& text);

  // Records a call without issuing it (accounting-only modes).
  void record(Stage stage, std::int64_t input_tokens, std::int64_t output_tokens);

  std::int64_t estimate(std::string_view text) const;
  UsageLedger& ledger() const { return state_->ledger; }
  // Diagnostic events from callers (parse skips and similar).
  void record_event(std::string kind, std::string detail) { note(std::move(kind), std::move(detail)); }
  std::vector<GatewayEvent> events() const;
  std::size_t deviant_verdicts() const;
  Backend& backend() const { return *state_->backend; }
  int parallelism() const { return state_->options.parallelism; }

 private:
  struct State {
    std::shared_ptr<Backend> backend;
    GatewayOptions options;
    UsageLedger ledger;
    std::atomic<std::int64_t> next_call{0};
    std::mutex slots_mu;
    std::condition_variable slots_cv;
    int in_flight = 0;
    mutable std::mutex events_mu;
    std::vector<GatewayEvent> events;
  };

  void commit(Stage stage, std::int64_t input_tokens, std::int64_t output_tokens);
  void note(std::string kind, std::string detail);

  std::shared_ptr<State> state_;
  std::vector<UsageLedger*> tees_;
};

}  // namespace llmref

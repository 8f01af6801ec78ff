#include "llmref/gateway.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "llmref/error.hpp"
#include "llmref/text.hpp"

namespace llmref {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::summarize: return "summarize";
    case Stage::retrieve: return "retrieve";
    case Stage::synthesize: return "synthesize";
    case Stage::align: return "align";
    case Stage::judge: return "judge";
    case Stage::embed: return "embed";
    case Stage::dataset_gen: return "dataset_gen";
  }
  return "summarize";
}

std::optional<Stage> stage_from_string(std::string_view s) {
  for (Stage st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

std::int64_t estimate_tokens(std::string_view text) {
  std::int64_t chars = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++chars;
  }
  return (chars + 3) / 4;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char frac[8];
  std::snprintf(frac, sizeof frac, ".%03dZ", static_cast<int>(ms));
  return std::string(buf) + frac;
}

void GenerationParams::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(Errc::validation, "temperature must be within [0, 2]");
  }
  if (context_window_tokens <= 0) throw Error(Errc::validation, "context_window_tokens must be positive");
  if (max_output_tokens <= 0 || max_output_tokens >= context_window_tokens) {
    throw Error(Errc::validation, "max_output_tokens must be positive and below the context window");
  }
}

nlohmann::json to_json(const UsageRecord& r) {
  return {{"stage", std::string(to_string(r.stage))},
          {"input_tokens", r.input_tokens},
          {"output_tokens", r.output_tokens},
          {"call_index", r.call_index},
          {"timestamp", r.timestamp}};
}

UsageRecord usage_record_from_json(const nlohmann::json& j) {
  UsageRecord r;
  auto stage = stage_from_string(j.at("stage").get<std::string>());
  if (!stage) throw Error(Errc::malformed_input, "unknown ledger stage '" + j.at("stage").get<std::string>() + "'");
  r.stage = *stage;
  r.input_tokens = j.at("input_tokens").get<std::int64_t>();
  r.output_tokens = j.at("output_tokens").get<std::int64_t>();
  r.call_index = j.at("call_index").get<std::int64_t>();
  r.timestamp = j.value("timestamp", "");
  if (r.input_tokens < 0 || r.output_tokens < 0) throw Error(Errc::malformed_input, "negative token count in ledger");
  return r;
}

UsageLedger::UsageLedger(const UsageLedger& other) {
  std::lock_guard lock(other.mu_);
  records_ = other.records_;
}

UsageLedger& UsageLedger::operator=(const UsageLedger& other) {
  if (this == &other) return *this;
  std::vector<UsageRecord> copy = other.records();
  std::lock_guard lock(mu_);
  records_ = std::move(copy);
  return *this;
}

void UsageLedger::append(const UsageRecord& r) {
  std::lock_guard lock(mu_);
  records_.push_back(r);
}

std::vector<UsageRecord> UsageLedger::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t UsageLedger::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::int64_t UsageLedger::count(Stage stage) const {
  std::lock_guard lock(mu_);
  std::int64_t n = 0;
  for (const auto& r : records_) n += r.stage == stage;
  return n;
}

std::map<Stage, StageTotals> UsageLedger::by_stage() const {
  std::lock_guard lock(mu_);
  std::map<Stage, StageTotals> out;
  for (const auto& r : records_) {
    auto& t = out[r.stage];
    ++t.calls;
    t.input_tokens += r.input_tokens;
    t.output_tokens += r.output_tokens;
  }
  return out;
}

std::int64_t UsageLedger::total_input() const {
  std::lock_guard lock(mu_);
  std::int64_t n = 0;
  for (const auto& r : records_) n += r.input_tokens;
  return n;
}

std::int64_t UsageLedger::total_output() const {
  std::lock_guard lock(mu_);
  std::int64_t n = 0;
  for (const auto& r : records_) n += r.output_tokens;
  return n;
}

void UsageLedger::clear() {
  std::lock_guard lock(mu_);
  records_.clear();
}

std::string UsageLedger::to_jsonl() const {
  std::string out;
  for (const auto& r : records()) out += to_json(r).dump() + "\n";
  return out;
}

UsageLedger UsageLedger::from_jsonl(std::string_view text) {
  UsageLedger ledger;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(text)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      ledger.append(usage_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::malformed_input, "ledger line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ledger;
}

void UsageLedger::append_to_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(Errc::io, "cannot open ledger file " + path.string());
  out << to_jsonl();
  if (!out) throw Error(Errc::io, "failed writing ledger file " + path.string());
}

UsageLedger UsageLedger::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open ledger file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

CostReport cost_report(const std::vector<UsageRecord>& records, const PriceSheet& prices) {
  CostReport r;
  for (const auto& rec : records) {
    r.input_tokens += rec.input_tokens;
    r.output_tokens += rec.output_tokens;
  }
  r.cost = prices.input_per_1m * static_cast<double>(r.input_tokens) / 1e6 +
           prices.output_per_1m * static_cast<double>(r.output_tokens) / 1e6;
  return r;
}

CostReport cost_report(const UsageLedger& ledger, const PriceSheet& prices) {
  return cost_report(ledger.records(), prices);
}

nlohmann::json usage_summary_json(const UsageLedger& ledger, const PriceSheet& prices) {
  nlohmann::json stages = nlohmann::json::object();
  auto totals = ledger.by_stage();
  for (Stage st : kAllStages) {
    StageTotals t = totals.count(st) ? totals.at(st) : StageTotals{};
    stages[std::string(to_string(st))] = {
        {"calls", t.calls}, {"input_tokens", t.input_tokens}, {"output_tokens", t.output_tokens}};
  }
  CostReport c = cost_report(ledger, prices);
  return {{"stages", stages},
          {"calls", static_cast<std::int64_t>(ledger.size())},
          {"input_tokens", c.input_tokens},
          {"output_tokens", c.output_tokens},
          {"cost", c.cost},
          {"prices", {{"input_per_1m", prices.input_per_1m}, {"output_per_1m", prices.output_per_1m}}}};
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0 || nb <= 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::optional<bool> parse_verdict(std::string_view reply) {
  std::size_t i = 0;
  while (i < reply.size() && !text::is_ascii_alpha(reply[i])) ++i;
  std::size_t j = i;
  while (j < reply.size() && text::is_ascii_alpha(reply[j])) ++j;
  std::string token = text::to_lower(reply.substr(i, j - i));
  if (token == "true") return true;
  if (token == "false") return false;
  return std::nullopt;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options) : state_(std::make_shared<State>()) {
  if (!backend) throw Error(Errc::validation, "gateway needs a backend");
  state_->backend = std::move(backend);
  if (options.parallelism < 1) options.parallelism = 1;
  state_->options = std::move(options);
}

Gateway Gateway::with_tee(UsageLedger& extra) const {
  Gateway g = *this;
  g.tees_.push_back(&extra);
  return g;
}

std::int64_t Gateway::estimate(std::string_view text) const {
  return state_->options.estimator ? state_->options.estimator(text) : estimate_tokens(text);
}

void Gateway::commit(Stage stage, std::int64_t input_tokens, std::int64_t output_tokens) {
  UsageRecord r{stage, input_tokens, output_tokens, state_->next_call.fetch_add(1), utc_timestamp()};
  state_->ledger.append(r);
  for (UsageLedger* t : tees_) t->append(r);
}

void Gateway::record(Stage stage, std::int64_t input_tokens, std::int64_t output_tokens) {
  commit(stage, input_tokens, output_tokens);
}

void Gateway::note(std::string kind, std::string detail) {
  if (state_->options.log) state_->options.log(kind + ": " + detail);
  std::lock_guard lock(state_->events_mu);
  state_->events.push_back({std::move(kind), std::move(detail)});
}

std::vector<GatewayEvent> Gateway::events() const {
  std::lock_guard lock(state_->events_mu);
  return state_->events;
}

std::size_t Gateway::deviant_verdicts() const {
  std::lock_guard lock(state_->events_mu);
  std::size_t n = 0;
  for (const auto& e : state_->events) n += e.kind == "deviant_verdict";
  return n;
}

namespace {

// Holds one of the gateway's parallel call slots.
class Slot {
 public:
  Slot(std::mutex& mu, std::condition_variable& cv, int& in_flight, int limit)
      : mu_(mu), cv_(cv), in_flight_(in_flight) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit; });
    ++in_flight_;
  }
  ~Slot() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  std::mutex& mu_;
  std::condition_variable& cv_;
  int& in_flight_;
};

}  // namespace

std::string Gateway::complete(const std::string& prompt, const GenerationParams& params, Stage stage) {
  const std::int64_t in = estimate(prompt);
  if (in + params.max_output_tokens > params.context_window_tokens) {
    throw Error(Errc::budget_exceeded, "prompt of " + std::to_string(in) + " tokens plus " +
                                           std::to_string(params.max_output_tokens) +
                                           " output tokens exceeds the context window of " +
                                           std::to_string(params.context_window_tokens));
  }
  const auto& opt = state_->options;
  for (int attempt = 0;; ++attempt) {
    try {
      Completion c;
      {
        Slot slot(state_->slots_mu, state_->slots_cv, state_->in_flight, opt.parallelism);
        c = state_->backend->complete(prompt, params);
      }
      commit(stage, c.input_tokens.value_or(in), c.output_tokens.value_or(estimate(c.text)));
      return c.text;
    } catch (const TransientError& e) {
      if (attempt >= opt.max_retries) {
        throw Error(Errc::backend_unavailable, "backend unavailable after " + std::to_string(attempt + 1) +
                                                   " attempts: " + e.what());
      }
      note("retry", e.what());
      auto wait = opt.backoff * (1 << attempt);
      if (wait.count() > 0) std::this_thread::sleep_for(wait);
    }
  }
}

bool Gateway::judge_boolean(const std::string& prompt, const GenerationParams& params, Stage stage) {
  std::string first = complete(prompt, params, stage);
  if (auto v = parse_verdict(first)) return *v;
  std::string second = complete(prompt, params, stage);
  if (auto v = parse_verdict(second)) return *v;
  note("deviant_verdict", text::truncate_words(second, 200));
  return false;
}

std::vector<double> Gateway::embed(const std::string& text) {
  if (text::trim(text).empty()) throw Error(Errc::validation, "cannot embed empty text");
  const auto& opt = state_->options;
  for (int attempt = 0;; ++attempt) {
    try {
      std::vector<double> v;
      {
        Slot slot(state_->slots_mu, state_->slots_cv, state_->in_flight, opt.parallelism);
        v = state_->backend->embed(text);
      }
      commit(Stage::embed, estimate(text), 0);
      return v;
    } catch (const TransientError& e) {
      if (attempt >= opt.max_retries) {
        throw Error(Errc::backend_unavailable, "backend unavailable after " + std::to_string(attempt + 1) +
                                                   " attempts: " + e.what());
      }
      note("retry", e.what());
      auto wait = opt.backoff * (1 << attempt);
      if (wait.count() > 0) std::this_thread::sleep_for(wait);
    }
  }
}

}  // namespace llmref

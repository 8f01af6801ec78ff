#include "llmref/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "llmref/error.hpp"
#include "llmref/prompts.hpp"
#include "llmref/text.hpp"

namespace llmref {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 1469598103934665603ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

const std::set<std::string>& stopwords() {
  static const std::set<std::string> s = {
      "the",  "and",   "for",   "with",  "that",  "this",  "from",  "what",  "which", "are",  "was",
      "were", "how",   "does",  "into",  "their", "there", "been",  "have",  "has",   "its",  "our",
      "can",  "not",   "but",   "also",  "such",  "these", "those", "they",  "them",  "than", "then",
      "when", "where", "while", "will",  "would", "about", "using", "used",  "use",   "between",
      "each", "other", "more",  "most",  "over",  "under", "both",  "only",  "some",  "very", "who",
      "why",  "is",    "of",    "to",    "in",    "a",     "an",    "on",    "by",    "as",   "at",
      "be",   "or",    "it",    "we",    "do",    "did",   "describe", "work", "paper", "say"};
  return s;
}

std::set<std::string> content_words(std::string_view s) {
  std::set<std::string> out;
  for (auto& w : text::words(s)) {
    if (w.size() >= 3 && !stopwords().count(w)) out.insert(w);
  }
  return out;
}

// Share of `a`'s content words that appear in `b`.
double coverage(std::string_view a, std::string_view b) {
  auto wa = content_words(a);
  if (wa.empty()) return 0;
  auto wb = content_words(b);
  std::size_t hit = 0;
  for (const auto& w : wa) hit += wb.count(w);
  return static_cast<double>(hit) / static_cast<double>(wa.size());
}

std::string verdict(bool v) { return v ? "True" : "False"; }

std::string leading_sentences(std::string_view s, std::size_t n) {
  auto sents = text::split_sentences(s);
  std::string out;
  for (std::size_t i = 0; i < sents.size() && i < n; ++i) out += (out.empty() ? "" : " ") + sents[i];
  return out.empty() ? std::string(text::trim(s)) : out;
}

std::string respond_alignment(const std::map<std::string, std::string>& v) {
  std::string answer = v.at("synthesized_result");
  std::string context = v.at("context");
  std::vector<std::string> sources;
  for (const auto& line : text::split_lines(context)) {
    for (auto& s : text::split_sentences(line)) sources.push_back(s);
  }
  std::string out;
  for (const auto& line : text::split_sentences(answer)) {
    double best = 0;
    const std::string* pick = nullptr;
    auto lg = text::word_ngrams(line, 1);
    for (const auto& s : sources) {
      double j = text::jaccard(lg, text::word_ngrams(s, 1));
      if (j > best) {
        best = j;
        pick = &s;
      }
    }
    if (!pick || best < 0.2) continue;
    out += "Synthesized Line: " + line + "\nCorresponding Source Line: " + *pick + "\n";
  }
  return out;
}

std::string respond_dataset(const std::string& prompt, int batch) {
  std::vector<std::vector<std::string>> docs;
  std::size_t pos = 0;
  while ((pos = prompt.find("\n\nDocument ", pos)) != std::string::npos) {
    std::size_t body = prompt.find(":\n", pos);
    if (body == std::string::npos) break;
    body += 2;
    std::size_t next = prompt.find("\n\nDocument ", body);
    std::string text = prompt.substr(body, next == std::string::npos ? std::string::npos : next - body);
    docs.push_back(text::split_sentences(text));
    pos = body;
  }
  docs.erase(std::remove_if(docs.begin(), docs.end(), [](const auto& d) { return d.empty(); }), docs.end());
  if (docs.empty()) return "data = []";
  std::string out = "data = [\n";
  for (int i = 0; i < 5; ++i) {
    std::size_t k = static_cast<std::size_t>(batch * 5 + i);
    const auto& d1 = docs[k % docs.size()];
    const auto& d2 = docs[(k + 1) % docs.size()];
    const std::string& c1 = d1[(k / docs.size()) % d1.size()];
    const std::string& c2 = d2[(k / docs.size()) % d2.size()];
    auto w = text::words(c1);
    std::string topic;
    for (std::size_t j = 0; j < w.size() && j < 8; ++j) topic += (j ? " " : "") + w[j];
    std::string question = "How do the documents relate to " + topic + "?";
    out += "    {\n        \"question\": " + nlohmann::json(question).dump() + ",\n        \"context\": [" +
           nlohmann::json(c1).dump() + ", " + nlohmann::json(c2).dump() +
           "],\n        \"ground_truth\": " + nlohmann::json(c1 + " " + c2).dump() + "\n    },\n";
  }
  out += "]";
  return out;
}

}  // namespace

std::vector<double> hashed_embedding(std::string_view text, int dims) {
  std::vector<double> v(static_cast<std::size_t>(std::max(1, dims)), 0.0);
  auto ws = text::words(text);
  if (ws.empty()) {
    std::uint64_t h = fnv1a(text);
    for (auto& x : v) {
      h = h * 6364136223846793005ULL + 1442695040888963407ULL;
      x = static_cast<double>(h >> 11) / 9007199254740992.0 - 0.5;
    }
  } else {
    for (const auto& w : ws) {
      std::uint64_t h = fnv1a(w);
      v[h % v.size()] += (h >> 32) & 1 ? 1.0 : -1.0;
      std::uint64_t h2 = fnv1a(w, h);
      v[h2 % v.size()] += 0.5 * ((h2 >> 32) & 1 ? 1.0 : -1.0);
    }
  }
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (double& x : v) x /= norm;
  } else {
    v[0] = 1.0;
  }
  return v;
}

std::string OfflineResponder::respond(const std::string& prompt) {
  using prompts::Kind;
  auto kind = prompts::classify(prompt);
  if (!kind) return "";
  if (*kind == Kind::dataset) return respond_dataset(prompt, dataset_batches_.fetch_add(1));
  auto v = *prompts::match(prompts::template_for(*kind), prompt);
  switch (*kind) {
    case Kind::summary: return leading_sentences(v.at("paragraph"), 2);
    case Kind::relevance: return verdict(coverage(v.at("query"), v.at("paragraph")) >= 0.34);
    case Kind::synthesis_initial: return leading_sentences(v.at("paragraph"), 2);
    case Kind::synthesis_refine:
      return v.at("response") + " " + leading_sentences(v.at("paragraph"), 1);
    case Kind::condense: {
      auto sents = text::split_sentences(v.at("response"));
      std::string out;
      for (std::size_t i = 0; i < sents.size(); i += 2) out += (out.empty() ? "" : " ") + sents[i];
      return text::truncate_words(out, v.at("response").size() / 2);
    }
    case Kind::alignment: return respond_alignment(v);
    case Kind::statements: {
      std::string out;
      for (const auto& s : text::split_sentences(v.at("answer"))) out += s + "\n";
      return out;
    }
    case Kind::pseudo_questions: {
      int n = std::max(1, std::atoi(v.at("count").c_str()));
      auto sents = text::split_sentences(v.at("answer"));
      std::string out;
      for (int i = 0; i < n; ++i) {
        std::string s = sents.empty() ? v.at("answer") : sents[static_cast<std::size_t>(i) % sents.size()];
        while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
        out += "What is known about " + s + "?\n";
      }
      return out;
    }
    case Kind::faithfulness_verdict: return verdict(coverage(v.at("statement"), v.at("context")) >= 0.5);
    case Kind::context_precision: return verdict(coverage(v.at("question"), v.at("context")) >= 0.34);
    case Kind::context_recall: return verdict(coverage(v.at("sentence"), v.at("context")) >= 0.5);
    case Kind::context_relevancy: return verdict(coverage(v.at("question"), v.at("sentence")) >= 0.34);
    case Kind::correctness_support: return verdict(coverage(v.at("statement"), v.at("reference")) >= 0.5);
    case Kind::dataset: break;
  }
  return "";
}

MockBackend::MockBackend() = default;

void MockBackend::add_rule(Rule rule) {
  std::lock_guard lock(mu_);
  rules_.push_back(std::move(rule));
}

void MockBackend::when_contains(std::string needle, std::string reply) {
  add_rule([needle = std::move(needle), reply = std::move(reply)](const std::string& p) -> std::optional<std::string> {
    if (p.find(needle) != std::string::npos) return reply;
    return std::nullopt;
  });
}

void MockBackend::when_contains(std::string needle, std::vector<std::string> replies) {
  if (replies.empty()) throw Error(Errc::validation, "scripted rule needs at least one reply");
  auto next = std::make_shared<std::size_t>(0);
  add_rule([needle = std::move(needle), replies = std::move(replies),
            next](const std::string& p) -> std::optional<std::string> {
    if (p.find(needle) == std::string::npos) return std::nullopt;
    std::size_t i = std::min(*next, replies.size() - 1);
    ++*next;
    return replies[i];
  });
}

void MockBackend::set_embedding(std::string text, std::vector<double> vector) {
  std::lock_guard lock(mu_);
  embeddings_[std::move(text)] = std::move(vector);
}

void MockBackend::load_script(const nlohmann::json& script) {
  try {
    for (const auto& r : script.value("rules", nlohmann::json::array())) {
      std::string needle = r.at("contains").get<std::string>();
      if (r.contains("replies")) {
        when_contains(needle, r.at("replies").get<std::vector<std::string>>());
      } else {
        when_contains(needle, r.at("reply").get<std::string>());
      }
    }
    for (const auto& [text, vec] : script.value("embeddings", nlohmann::json::object()).items()) {
      set_embedding(text, vec.get<std::vector<double>>());
    }
    if (script.contains("offline_fallback")) use_offline_fallback(script.at("offline_fallback").get<bool>());
    if (script.contains("default_reply")) set_default_reply(script.at("default_reply").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_input, std::string("invalid mock script: ") + e.what());
  }
}

void MockBackend::load_script_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open mock script " + path.string());
  try {
    load_script(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::malformed_input, "mock script " + path.string() + ": " + e.what());
  }
}

Completion MockBackend::complete(const std::string& prompt, const GenerationParams&) {
  if (fail_next_ > 0) {
    --fail_next_;
    throw TransientError("scripted transient failure");
  }
  {
    std::lock_guard lock(mu_);
    log_.push_back(prompt);
    for (const auto& rule : rules_) {
      if (auto reply = rule(prompt)) return {*reply, std::nullopt, std::nullopt};
    }
  }
  if (offline_) return {offline_responder_.respond(prompt), std::nullopt, std::nullopt};
  return {default_reply_, std::nullopt, std::nullopt};
}

std::vector<double> MockBackend::embed(const std::string& text) {
  if (fail_next_ > 0) {
    --fail_next_;
    throw TransientError("scripted transient failure");
  }
  {
    std::lock_guard lock(mu_);
    auto it = embeddings_.find(text);
    if (it != embeddings_.end()) return it->second;
  }
  return hashed_embedding(text, dims);
}

std::vector<std::string> MockBackend::prompts() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

}  // namespace llmref

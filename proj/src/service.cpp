#include "llmref/service.hpp"

#include <chrono>
#include <condition_variable>

#include <httplib.h>

#include "llmref/error.hpp"
#include "llmref/text.hpp"

namespace llmref {

using nlohmann::json;

int http_status(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::validation:
    case Errc::malformed_input:
    case Errc::usage: return 400;
    case Errc::empty_corpus: return 409;
    case Errc::unsupported_document:
    case Errc::empty_document:
    case Errc::budget_exceeded:
    case Errc::budget_config:
    case Errc::domain:
    case Errc::empty_report: return 422;
    case Errc::backend_unavailable:
    case Errc::auth_missing: return 503;
    case Errc::alignment_parse:
    case Errc::synthesis_failed:
    case Errc::dataset_generation: return 502;
    case Errc::io:
    case Errc::schema_version: return 500;
  }
  return 500;
}

json error_json(Errc code, std::string_view message) {
  return {{"error", {{"code", std::string(to_string(code))}, {"message", std::string(message)}}}};
}

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, Errc code, std::string_view message) {
  send(res, http_status(code), error_json(code, message));
}

json document_summary(const SourceDocument& d) {
  return {{"doc_id", d.doc_id},
          {"title", d.title},
          {"origin", d.origin},
          {"page_count", d.page_count},
          {"paragraphs", paragraphs_in_order(d).size()},
          {"references", d.references.size()},
          {"notation_style", std::string(to_string(d.notation_style))}};
}

}  // namespace

Service::Service(Gateway gateway, ServiceOptions options)
    : gateway_(std::move(gateway)), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  Corpus c;
  c.corpus_id = options_.corpus_id;
  if (!options_.corpus_path.empty() && std::filesystem::exists(options_.corpus_path)) {
    c = load_corpus(options_.corpus_path);
  }
  corpus_ = std::make_shared<const Corpus>(std::move(c));
  install_routes();
}

Service::~Service() { stop(); }

std::shared_ptr<const Corpus> Service::snapshot() const {
  std::shared_lock lock(corpus_mu_);
  return corpus_;
}

int Service::start(const std::string& host, int port) {
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw Error(Errc::io, "cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(jobs_mu_);
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

void Service::persist_usage(const UsageLedger& usage) {
  if (options_.ledger_path.empty() || usage.size() == 0) return;
  std::lock_guard lock(ledger_file_mu_);
  usage.append_to_file(options_.ledger_path);
}

json Service::ingest_bytes(const std::string& bytes, const std::string& origin) {
  std::lock_guard writer(writer_mu_);
  UsageLedger usage;
  Gateway g = gateway_.with_tee(usage);
  IngestResult r = ingest_document(bytes, *snapshot(), g, options_.ingest, origin);
  if (r.added) {
    if (!options_.corpus_path.empty()) save_corpus(r.corpus, options_.corpus_path);
    auto next = std::make_shared<const Corpus>(std::move(r.corpus));
    std::unique_lock lock(corpus_mu_);
    corpus_ = next;
  }
  persist_usage(usage);
  const SourceDocument* d = snapshot()->find_document(r.doc_id);
  json j = document_summary(*d);
  j["added"] = r.added;
  return j;
}

json Service::job_json(const std::string& id, Job& job) {
  std::lock_guard lock(job.mu);
  json j = {{"job_id", id}, {"status", job.status}, {"progress", {{"done", job.done}, {"total", job.total}}}};
  if (job.status == "done") j["result"] = job.result;
  if (job.status == "failed") j["error"] = job.result.value("error", json::object());
  return j;
}

void Service::install_routes() {
  auto& s = *server_;
  const std::string corpus_prefix = R"(/api/corpora/([^/]+))";

  auto check_corpus = [this](const httplib::Request& req, httplib::Response& res) {
    if (req.matches[1] != options_.corpus_id) {
      send_error(res, Errc::not_found, "unknown corpus '" + std::string(req.matches[1]) + "'");
      return false;
    }
    return true;
  };

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      send(res, 500, error_json(Errc::io, e.what()));
    }
  });

  s.Post(corpus_prefix + "/documents", [this, check_corpus](const httplib::Request& req, httplib::Response& res) {
    if (!check_corpus(req, res)) return;
    std::vector<std::pair<std::string, std::string>> uploads;  // (origin, bytes)
    if (req.is_multipart_form_data()) {
      for (const auto& [name, file] : req.files) uploads.emplace_back(file.filename.empty() ? name : file.filename, file.content);
    } else if (!req.body.empty()) {
      uploads.emplace_back(req.get_param_value("filename"), req.body);
    }
    if (uploads.empty()) {
      send_error(res, Errc::validation, "no document in request");
      return;
    }
    json docs = json::array();
    for (const auto& [origin, bytes] : uploads) docs.push_back(ingest_bytes(bytes, origin));
    json body = docs.front();
    body["documents"] = docs;
    send(res, 201, body);
  });

  s.Get(corpus_prefix + "/documents", [this, check_corpus](const httplib::Request& req, httplib::Response& res) {
    if (!check_corpus(req, res)) return;
    auto c = snapshot();
    json docs = json::array();
    for (const auto& d : c->documents) docs.push_back(document_summary(d));
    send(res, 200, {{"corpus_id", c->corpus_id}, {"documents", docs}});
  });

  s.Get(corpus_prefix + "/paragraphs/(.+)", [this, check_corpus](const httplib::Request& req, httplib::Response& res) {
    if (!check_corpus(req, res)) return;
    auto c = snapshot();
    std::string para_id = req.matches[2];
    const Paragraph& p = get_paragraph(*c, para_id);
    json markers = json::array();
    for (const auto& m : p.markers) {
      json keys = json::array();
      for (const auto& k : m.resolved_keys) keys.push_back(key_label(k));
      markers.push_back({{"raw", m.raw}, {"begin", m.span_begin}, {"end", m.span_end}, {"resolved", keys},
                         {"unresolved", m.unresolved}});
    }
    json j = {{"para_id", p.para_id}, {"doc_id", doc_id_of(p.para_id)}, {"text", p.text},
              {"page_span", {p.page_span.first, p.page_span.second}}, {"markers", markers}};
    auto it = c->summaries.find(p.para_id);
    j["summary"] = it == c->summaries.end() ? json(nullptr) : json(it->second.summary_text);
    send(res, 200, j);
  });

  s.Post(corpus_prefix + "/query", [this, check_corpus](const httplib::Request& req, httplib::Response& res) {
    if (!check_corpus(req, res)) return;
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      send_error(res, Errc::malformed_input, "request body must be a JSON object");
      return;
    }
    std::string query = body.value("query", "");
    if (text::trim(query).empty()) {
      send_error(res, Errc::validation, "query is empty");
      return;
    }
    QueryOptions qo = options_.query;
    if (body.contains("grain")) {
      auto g = grain_from_string(body.value("grain", ""));
      if (!g) {
        send_error(res, Errc::validation, "grain must be 'coarse' or 'fine'");
        return;
      }
      qo.grain = *g;
    }
    auto corpus = snapshot();
    if (corpus->documents.empty()) {
      send_error(res, Errc::empty_corpus, "corpus has no documents");
      return;
    }

    auto job = std::make_shared<Job>();
    std::string id;
    auto finished = std::make_shared<std::condition_variable>();
    {
      std::lock_guard lock(jobs_mu_);
      id = "job-" + std::to_string(++next_job_);
      jobs_[id] = job;
    }
    qo.on_progress = [job](int done, int total) {
      std::lock_guard lock(job->mu);
      job->done = done;
      job->total = total;
    };
    std::thread worker([this, job, finished, corpus, query, qo] {
      json result;
      int error_status = 0;
      try {
        QueryResponse r = answer_query(query, *corpus, gateway_, qo);
        persist_usage(r.usage);
        result = r.to_json(options_.prices);
      } catch (const Error& e) {
        error_status = http_status(e.code());
        result = error_json(e.code(), e.what());
      } catch (const std::exception& e) {
        error_status = 500;
        result = error_json(Errc::io, e.what());
      }
      {
        std::lock_guard lock(job->mu);
        job->result = std::move(result);
        job->error_status = error_status;
        job->status = error_status ? "failed" : "done";
      }
      finished->notify_all();
    });
    {
      std::lock_guard lock(jobs_mu_);
      workers_.push_back(std::move(worker));
    }

    std::unique_lock lock(job->mu);
    auto wait = std::chrono::duration<double>(options_.job_threshold_seconds);
    if (finished->wait_for(lock, wait, [&] { return job->status != "running"; })) {
      if (job->error_status) {
        send(res, job->error_status, job->result);
      } else {
        json out = job->result;
        out["job_id"] = id;
        send(res, 200, out);
      }
      return;
    }
    json pending = {{"job_id", id}, {"status", "running"}, {"progress", {{"done", job->done}, {"total", job->total}}}};
    lock.unlock();
    send(res, 202, pending);
  });

  s.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<Job> job;
    std::string id = req.matches[1];
    {
      std::lock_guard lock(jobs_mu_);
      auto it = jobs_.find(id);
      if (it != jobs_.end()) job = it->second;
    }
    if (!job) {
      send_error(res, Errc::not_found, "unknown job '" + id + "'");
      return;
    }
    send(res, 200, job_json(id, *job));
  });

  s.Get("/api/usage", [this](const httplib::Request&, httplib::Response& res) {
    send(res, 200, usage_summary_json(gateway_.ledger(), options_.prices));
  });

  if (!options_.ui_dir.empty()) s.set_mount_point("/", options_.ui_dir);
}

}  // namespace llmref

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "llmref/corpus.hpp"
#include "llmref/error.hpp"
#include "llmref/gateway.hpp"
#include "llmref/ingest.hpp"
#include "llmref/pipeline.hpp"

namespace httplib {
class Server;
}

namespace llmref {

struct ServiceOptions {
  std::filesystem::path corpus_path;  // empty: in-memory only
  std::string corpus_id = "default";
  QueryOptions query;
  IngestOptions ingest;
  PriceSheet prices;
  // Queries still running after this long answer 202 with a job id.
  double job_threshold_seconds = 10.0;
  std::string ui_dir;       // static files served at "/"
  std::string ledger_path;  // per-call usage appended as JSON lines
};

// HTTP status for a domain error code.
int http_status(Errc code);
nlohmann::json error_json(Errc code, std::string_view message);

// JSON API over one corpus. Queries read an immutable snapshot; ingest
// takes the single writer lock and swaps in the new corpus.
class Service {
 public:
  Service(Gateway gateway, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

  std::shared_ptr<const Corpus> snapshot() const;

 private:
  struct Job {
    std::mutex mu;
    std::string status = "running";  // running | done | failed
    int done = 0;
    int total = 0;
    nlohmann::json result;
    int error_status = 0;
  };

  void install_routes();
  nlohmann::json ingest_bytes(const std::string& bytes, const std::string& origin);
  void persist_usage(const UsageLedger& usage);
  nlohmann::json job_json(const std::string& id, Job& job);

  Gateway gateway_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;

  mutable std::shared_mutex corpus_mu_;
  std::shared_ptr<const Corpus> corpus_;
  std::mutex writer_mu_;
  std::mutex ledger_file_mu_;

  std::mutex jobs_mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::thread> workers_;
  int next_job_ = 0;
};

}  // namespace llmref

#include "llmref/cli.hpp"

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "llmref/config.hpp"
#include "llmref/error.hpp"
#include "llmref/ingest.hpp"
#include "llmref/pipeline.hpp"
#include "llmref/ragas.hpp"
#include "llmref/service.hpp"

namespace llmref {

namespace {

struct Context {
  AppConfig config;
  std::string ledger_path;  // --ledger overrides the config value

  Gateway gateway(std::ostream& err) const {
    GatewayOptions go = config.gateway_options();
    go.log = [&err](std::string_view msg) { err << "llmref: " << msg << "\n"; };
    return Gateway(make_backend(config), go);
  }

  QueryOptions query_options(Grain grain) const {
    QueryOptions q;
    q.grain = grain;
    q.params = config.params;
    q.align_accounting = config.align_accounting;
    q.prices = config.prices;
    return q;
  }

  IngestOptions ingest_options() const {
    IngestOptions o;
    o.params = config.params;
    o.extractor = config.extractor;
    o.parallelism = config.parallelism;
    return o;
  }

  void save_usage(const UsageLedger& ledger) const {
    std::string path = ledger_path.empty() ? config.ledger_path : ledger_path;
    if (!path.empty() && ledger.size() > 0) ledger.append_to_file(path);
  }
};

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::io, "cannot write " + path);
  f << j.dump(2) << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Answer questions over research PDFs with attached references"};
  app.name("llmref");
  app.require_subcommand(1);

  std::string config_path;
  std::string ledger_path;
  app.add_option("--config", config_path, "settings file (key = value)")
      ->envname("LLMREF_CONFIG")
      ->check(CLI::ExistingFile);
  app.add_option("--ledger", ledger_path, "append per-call usage to this JSON-lines file");

  std::string corpus_path;
  std::vector<std::string> pdfs;
  auto* ingest = app.add_subcommand("ingest", "extract and summarize PDFs into a corpus file");
  ingest->add_option("--corpus", corpus_path, "corpus JSON file")->required();
  ingest->add_option("pdfs", pdfs, "PDF files")->required()->check(CLI::ExistingFile);

  std::string grain_name = "fine";
  bool as_json = false;
  std::string query;
  auto* ask = app.add_subcommand("ask", "answer a query with references");
  ask->add_option("--corpus", corpus_path, "corpus JSON file")->required()->check(CLI::ExistingFile);
  ask->add_option("--grain", grain_name, "reference grain")->check(CLI::IsMember({"coarse", "fine"}));
  ask->add_flag("--json", as_json, "print the response as JSON");
  ask->add_option("query", query, "question")->required();

  std::string dataset_path;
  std::string report_path;
  int generate = 0;
  auto* eval = app.add_subcommand("eval", "score the pipeline on a question set");
  eval->add_option("--corpus", corpus_path, "corpus JSON file")->required()->check(CLI::ExistingFile);
  eval->add_option("--dataset", dataset_path, "question set JSON (written when --generate is given)")->required();
  eval->add_option("--generate", generate, "generate this many questions first")->check(CLI::PositiveNumber);
  eval->add_option("--report", report_path, "write the full report JSON here");
  eval->add_flag("--json", as_json, "print the report as JSON");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--corpus", corpus_path, "corpus JSON file")->required();
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "bind address");

  std::string usage_ledger;
  auto* usage = app.add_subcommand("usage", "summarize a usage ledger");
  usage->add_option("--ledger", usage_ledger, "JSON-lines ledger")->required()->check(CLI::ExistingFile);
  usage->add_flag("--json", as_json, "print JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    if (argc <= 1) err << app.help();
    return 2;
  }

  try {
    Context ctx;
    if (!config_path.empty()) ctx.config = load_config(config_path);
    ctx.ledger_path = ledger_path;

    if (*ingest) {
      Gateway g = ctx.gateway(err);
      std::vector<std::filesystem::path> paths(pdfs.begin(), pdfs.end());
      auto ids = ingest_files(corpus_path, paths, g, ctx.ingest_options());
      Corpus c = load_corpus(corpus_path);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const SourceDocument* d = c.find_document(ids[i]);
        out << ids[i] << "\t" << (d ? d->title : "") << "\t" << pdfs[i] << "\n";
      }
      ctx.save_usage(g.ledger());
      return 0;
    }
    if (*ask) {
      Gateway g = ctx.gateway(err);
      Corpus c = load_corpus(corpus_path);
      QueryResponse r = answer_query(query, c, g, ctx.query_options(*grain_from_string(grain_name)));
      if (as_json) {
        out << r.to_json(ctx.config.prices).dump(2) << "\n";
      } else {
        out << r.to_text();
      }
      ctx.save_usage(r.usage);
      return 0;
    }
    if (*eval) {
      Gateway g = ctx.gateway(err);
      Corpus c = load_corpus(corpus_path);
      EvalConfig ec = ctx.config.eval_config();
      std::vector<EvalItem> items;
      if (generate > 0) {
        items = generate_dataset(c, generate, g, ec);
        write_json_file(dataset_path, dataset_to_json(items));
        err << "llmref: generated " << items.size() << " questions into " << dataset_path << "\n";
      } else {
        std::ifstream f(dataset_path);
        if (!f) throw Error(Errc::io, "cannot open " + dataset_path);
        nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
        if (j.is_discarded()) throw Error(Errc::malformed_input, dataset_path + " is not valid JSON");
        items = dataset_from_json(j);
      }
      answer_items(items, c, g, ctx.query_options(Grain::coarse));
      EvalReport report = evaluate_run(items, g, ec);
      if (!report_path.empty()) write_json_file(report_path, report.to_json());
      if (as_json) {
        out << report.to_json().dump(2) << "\n";
      } else {
        out << report.to_table();
      }
      ctx.save_usage(g.ledger());
      return 0;
    }
    if (*serve) {
      ServiceOptions so;
      so.corpus_path = corpus_path;
      so.query = ctx.query_options(Grain::fine);
      so.ingest = ctx.ingest_options();
      so.prices = ctx.config.prices;
      so.job_threshold_seconds = ctx.config.job_threshold_seconds;
      so.ui_dir = ctx.config.ui_dir;
      so.ledger_path = ledger_path.empty() ? ctx.config.ledger_path : ledger_path;
      Service service(ctx.gateway(err), so);
      err << "llmref: serving " << corpus_path << " on " << host << ":" << port << "\n";
      service.listen(host, port);
      return 0;
    }
    if (*usage) {
      UsageLedger l = UsageLedger::load_file(usage_ledger);
      nlohmann::json s = usage_summary_json(l, ctx.config.prices);
      if (as_json) {
        out << s.dump(2) << "\n";
        return 0;
      }
      out << "stage        calls  input_tokens  output_tokens\n";
      for (const auto& [name, t] : s.at("stages").items()) {
        char line[128];
        std::snprintf(line, sizeof line, "%-11s %6lld %13lld %14lld\n", name.c_str(),
                      static_cast<long long>(t.at("calls").get<std::int64_t>()),
                      static_cast<long long>(t.at("input_tokens").get<std::int64_t>()),
                      static_cast<long long>(t.at("output_tokens").get<std::int64_t>()));
        out << line;
      }
      char total[160];
      std::snprintf(total, sizeof total, "total       %6lld %13lld %14lld\ncost        $%.6f\n",
                    static_cast<long long>(s.at("calls").get<std::int64_t>()),
                    static_cast<long long>(s.at("input_tokens").get<std::int64_t>()),
                    static_cast<long long>(s.at("output_tokens").get<std::int64_t>()), s.at("cost").get<double>());
      out << total;
      return 0;
    }
  } catch (const Error& e) {
    err << "llmref: " << to_string(e.code()) << ": " << e.what() << "\n";
    if (!e.detail().empty()) err << e.detail() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "llmref: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace llmref

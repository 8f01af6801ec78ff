#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "llmref/cli.hpp"
#include "llmref/corpus.hpp"
#include "synthetic_article.hpp"

using namespace llmref;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "llmref");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void write_pdf(const std::string& path, std::uint32_t seed) {
  llmref::testing::ArticleSpec spec;
  spec.seed = seed;
  spec.paragraphs = 4;
  std::ofstream(path, std::ios::binary) << llmref::testing::make_article(spec).pdf;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"ask", "--corpus", "/nonexistent/corpus.json", "q"}).code == 2);
    CHECK(run({"ask", "--corpus", LLMREF_FIXTURES "/minimal_corpus.json", "--grain", "medium", "q"}).code == 2);
    CHECK(run({"ingest", "--corpus", "c.json"}).code == 2);
    Run help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("ingest") != std::string::npos);
  }

  TEST_CASE("domain errors exit 1") {
    TempDir d("llmref_cli_domain");
    std::ofstream(d / "bad.conf") << "unknown_key = 1\n";
    Run r = run({"--config", d / "bad.conf", "ask", "--corpus", LLMREF_FIXTURES "/minimal_corpus.json", "q"});
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown_key") != std::string::npos);

    setenv("LLMREF_CONFIG", (d / "bad.conf").c_str(), 1);
    r = run({"ask", "--corpus", LLMREF_FIXTURES "/minimal_corpus.json", "q"});
    unsetenv("LLMREF_CONFIG");
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown_key") != std::string::npos);

    std::ofstream(d / "notpdf.pdf") << "hello";
    r = run({"ingest", "--corpus", d / "c.json", d / "notpdf.pdf"});
    CHECK(r.code == 1);
    CHECK(r.err.find("unsupported_document") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "c.json"));
  }

  TEST_CASE("ingest, ask, usage") {
    TempDir d("llmref_cli_flow");
    write_pdf(d / "a.pdf", 7);
    write_pdf(d / "b.pdf", 8);
    std::string ledger = d / "usage.jsonl";
    Run r = run({"--ledger", ledger, "ingest", "--corpus", d / "c.json", d / "a.pdf", d / "b.pdf"});
    REQUIRE(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
    Corpus c = load_corpus(d / "c.json");
    REQUIRE(c.documents.size() == 2);

    std::string query = paragraphs_in_order(c.documents.front()).front()->text.substr(0, 60);
    r = run({"--ledger", ledger, "ask", "--corpus", d / "c.json", "--grain", "coarse", "--json", query});
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["references"]["grain"] == "coarse");
    CHECK_FALSE(j["answer"].get<std::string>().empty());

    r = run({"ask", "--corpus", d / "c.json", "--grain", "coarse", query});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("References:") != std::string::npos);

    r = run({"usage", "--ledger", ledger, "--json"});
    REQUIRE(r.code == 0);
    auto u = nlohmann::json::parse(r.out);
    CHECK(u["stages"].contains("summarize"));
    CHECK(u["stages"].contains("retrieve"));
    r = run({"usage", "--ledger", ledger});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("total") != std::string::npos);
    CHECK(r.out.find("cost") != std::string::npos);
  }

  TEST_CASE("eval generates a dataset and reports") {
    TempDir d("llmref_cli_eval");
    write_pdf(d / "a.pdf", 9);
    REQUIRE(run({"ingest", "--corpus", d / "c.json", d / "a.pdf"}).code == 0);
    Run r = run({"eval", "--corpus", d / "c.json", "--dataset", d / "q.json", "--generate", "2", "--report",
                 d / "report.json", "--json"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(d / "q.json"));
    CHECK(fs::exists(d / "report.json"));
    auto report = nlohmann::json::parse(r.out);
    CHECK(report.contains("means"));

    r = run({"eval", "--corpus", d / "c.json", "--dataset", d / "q.json"});
    CHECK(r.code == 0);
    r = run({"eval", "--corpus", d / "c.json", "--dataset", d / "missing.json"});
    CHECK(r.code == 1);
  }

  TEST_CASE("the installed binary uses the same exit codes") {
    std::string cli = LLMREF_CLI;
    CHECK(std::system((cli + " > /dev/null 2>&1").c_str()) != 0);
    int status = std::system((cli + " usage --ledger /nonexistent > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(status) == 2);
    status = std::system((cli + " ask --corpus " LLMREF_FIXTURES "/minimal_corpus.json 'Do units help?' > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(status) == 0);
  }
}

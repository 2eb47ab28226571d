// Black-box tests of the command-line tool: every command is exercised as a
// subprocess through the real binary (path injected by the build), checking
// files on disk, stdout/stderr contents, and exit codes.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fsp/corpus.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_lines(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

fs::path scratch_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "fsp_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& leaf) {
  fs::path dir = scratch_root() / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch_root() / ("stdout." + std::to_string(counter));
  const fs::path err = scratch_root() / ("stderr." + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(FSP_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                          err.string();
  const int status = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// One line on stderr, starting with the uniform prefix.
void check_single_error_line(const CmdResult& r) {
  CHECK(r.exit_code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

const char* kTinyConfig = R"({
  "encoder": {"word_dim": 16, "hidden_size": 16, "num_layers": 1,
              "max_span_length": 4, "width_embedding_dim": 8, "mlp_hidden": 24,
              "dropout_lstm": 0.0, "dropout_mlp": 0.0},
  "train": {"max_epochs": 2, "batch_size": 4, "seed": 11},
  "flags": {}
})";

// Shared corpus + checkpoint for the pipeline tests; built once.
struct Workspace {
  fs::path data = fresh_dir("data");
  fs::path ckpt;
  Workspace() {
    CmdResult gen =
        run_cli("generate --seed 3 --sentences 20 --out " + data.string());
    REQUIRE(gen.exit_code == 0);
    write_file(data / "config.json5", kTinyConfig);  // distinct name, echo uses config.json
    ckpt = fresh_dir("ckpt");
    CmdResult tr = run_cli("train --config " + (data / "config.json5").string() + " --train " +
                           (data / "train.jsonl").string() + " --dev " +
                           (data / "dev.jsonl").string() + " --ontology " +
                           (data / "ontology.json").string() + " --out " + ckpt.string());
    REQUIRE(tr.exit_code == 0);
  }
};

Workspace& workspace() {
  static Workspace ws;
  return ws;
}

}  // namespace

TEST_CASE("generate writes three canonical splits and an ontology") {
  fs::path dir = fresh_dir("gen_a");
  CmdResult r = run_cli("generate --seed 5 --sentences 100 --out " + dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("wrote 80/10/10 sentences") != std::string::npos);

  for (const char* name : {"ontology.json", "train.jsonl", "dev.jsonl", "test.jsonl",
                           "config.json"})
    CHECK(fs::exists(dir / name));
  CHECK(count_lines(dir / "train.jsonl") == 80);
  CHECK(count_lines(dir / "dev.jsonl") == 10);
  CHECK(count_lines(dir / "test.jsonl") == 10);

  // Everything the generator wrote loads and validates against its ontology.
  fsp::FrameOntology ont = fsp::FrameOntology::load((dir / "ontology.json").string());
  CHECK(fsp::load_corpus((dir / "train.jsonl").string(), ont).size() == 80);
  CHECK(fsp::load_corpus((dir / "dev.jsonl").string(), ont).size() == 10);
  CHECK(fsp::load_corpus((dir / "test.jsonl").string(), ont).size() == 10);

  json echo = json::parse(slurp(dir / "config.json"));
  CHECK(echo.at("command") == "generate");
  CHECK(echo.at("split").at("train") == 80);

  SUBCASE("the same seed reproduces the same bytes") {
    fs::path dir2 = fresh_dir("gen_b");
    CmdResult r2 = run_cli("generate --seed 5 --sentences 100 --out " + dir2.string());
    CHECK(r2.exit_code == 0);
    CHECK(slurp(dir / "train.jsonl") == slurp(dir2 / "train.jsonl"));
    CHECK(slurp(dir / "test.jsonl") == slurp(dir2 / "test.jsonl"));
    CHECK(slurp(dir / "ontology.json") == slurp(dir2 / "ontology.json"));
  }

  SUBCASE("a different seed changes the corpus") {
    fs::path dir3 = fresh_dir("gen_c");
    CmdResult r3 = run_cli("generate --seed 6 --sentences 100 --out " + dir3.string());
    CHECK(r3.exit_code == 0);
    CHECK(slurp(dir / "train.jsonl") != slurp(dir3 / "train.jsonl"));
  }

  SUBCASE("too few sentences for three splits is refused") {
    check_single_error_line(run_cli("generate --sentences 2 --out " +
                                    fresh_dir("gen_tiny").string()));
  }
}

TEST_CASE("train writes a complete checkpoint directory") {
  Workspace& ws = workspace();
  CHECK(ws.ckpt.empty() == false);
  for (const char* name : {"params.bin", "vocab.txt", "ontology.json", "config.json",
                           "metrics.jsonl", "meta.json", "dev_report.json"})
    CHECK(fs::exists(ws.ckpt / name));
  CHECK(count_lines(ws.ckpt / "metrics.jsonl") == 2);  // one line per epoch

  json echo = json::parse(slurp(ws.ckpt / "config.json"));
  CHECK(echo.at("command") == "train");
  CHECK(echo.at("encoder").at("hidden_size") == 16);
  CHECK(echo.at("train").at("max_epochs") == 2);
  CHECK(echo.at("paths").at("checkpoint") == ws.ckpt.string());

  json meta = json::parse(slurp(ws.ckpt / "meta.json"));
  CHECK(meta.at("variant") == "joint");
  CHECK(meta.contains("params_digest"));
  CHECK(meta.contains("vocab_digest"));
  CHECK(meta.contains("ontology_digest"));

  json dev = json::parse(slurp(ws.ckpt / "dev_report.json"));
  for (const char* block : {"target", "frame", "role"}) {
    CHECK(dev.at(block).at("f1").get<double>() >= 0.0);
    CHECK(dev.at(block).at("f1").get<double>() <= 1.0);
  }
}

TEST_CASE("train logs one progress line per epoch") {
  Workspace& ws = workspace();
  fs::path dir = fresh_dir("ckpt_log");
  CmdResult tr = run_cli("train --config " + (ws.data / "config.json5").string() + " --train " +
                         (ws.data / "train.jsonl").string() + " --dev " +
                         (ws.data / "dev.jsonl").string() + " --ontology " +
                         (ws.data / "ontology.json").string() + " --out " + dir.string());
  REQUIRE(tr.exit_code == 0);
  CHECK(tr.out.find("stage 0 epoch 1: loss_n=") != std::string::npos);
  CHECK(tr.out.find("stage 0 epoch 2: loss_n=") != std::string::npos);
  CHECK(tr.out.find("dev_role_f1=") != std::string::npos);
  CHECK(tr.out.find("checkpoint written to") != std::string::npos);
}

TEST_CASE("training runs are byte-for-byte reproducible") {
  Workspace& ws = workspace();
  fs::path rep = fresh_dir("ckpt_repeat");
  CmdResult tr = run_cli("train --config " + (ws.data / "config.json5").string() + " --train " +
                         (ws.data / "train.jsonl").string() + " --dev " +
                         (ws.data / "dev.jsonl").string() + " --ontology " +
                         (ws.data / "ontology.json").string() + " --out " + rep.string());
  REQUIRE(tr.exit_code == 0);
  CHECK(slurp(rep / "metrics.jsonl") == slurp(ws.ckpt / "metrics.jsonl"));
  CHECK(slurp(rep / "dev_report.json") == slurp(ws.ckpt / "dev_report.json"));
  CHECK(slurp(rep / "params.bin") == slurp(ws.ckpt / "params.bin"));
  CHECK(slurp(rep / "vocab.txt") == slurp(ws.ckpt / "vocab.txt"));
}

TEST_CASE("parse writes a loadable corpus with a config echo") {
  Workspace& ws = workspace();
  fs::path out = scratch_root() / "parsed" / "test_parsed.jsonl";
  CmdResult pa = run_cli("parse --checkpoint " + ws.ckpt.string() + " --input " +
                         (ws.data / "test.jsonl").string() + " --output " + out.string());
  REQUIRE(pa.exit_code == 0);
  CHECK(pa.out.find("parsed 2 sentences") != std::string::npos);
  REQUIRE(fs::exists(out));

  // The predictions validate against the training ontology.
  fsp::FrameOntology ont = fsp::FrameOntology::load((ws.data / "ontology.json").string());
  std::vector<fsp::AnnotatedSentence> parsed = fsp::load_corpus(out.string(), ont);
  std::vector<fsp::AnnotatedSentence> input =
      fsp::load_corpus((ws.data / "test.jsonl").string(), ont);
  REQUIRE(parsed.size() == input.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) CHECK(parsed[i].tokens == input[i].tokens);

  json echo = json::parse(slurp(out.string() + ".config.json"));
  CHECK(echo.at("command") == "parse");
  CHECK(echo.at("paths").at("checkpoint") == ws.ckpt.string());
}

TEST_CASE("evaluate scores predictions and writes reports") {
  Workspace& ws = workspace();

  SUBCASE("gold scored against itself is perfect") {
    CmdResult ev = run_cli("evaluate --pred " + (ws.data / "train.jsonl").string() +
                           " --gold " + (ws.data / "train.jsonl").string());
    REQUIRE(ev.exit_code == 0);
    json doc = json::parse(ev.out);
    CHECK(doc.at("target").at("f1").get<double>() == 1.0);
    CHECK(doc.at("frame").at("f1").get<double>() == 1.0);
    CHECK(doc.at("role").at("f1").get<double>() == 1.0);
  }

  SUBCASE("report file and echo land next to each other") {
    fs::path out = scratch_root() / "reports" / "eval.json";
    CmdResult ev = run_cli("evaluate --pred " + (ws.data / "dev.jsonl").string() + " --gold " +
                           (ws.data / "dev.jsonl").string() + " --out " + out.string());
    REQUIRE(ev.exit_code == 0);
    CHECK(fs::exists(out));
    CHECK(fs::exists(out.string() + ".config.json"));
    CHECK(json::parse(slurp(out)) == json::parse(ev.out));
  }

  SUBCASE("per-sentence breakdown has one entry per sentence") {
    CmdResult ev = run_cli("evaluate --per-sentence --pred " +
                           (ws.data / "dev.jsonl").string() + " --gold " +
                           (ws.data / "dev.jsonl").string());
    REQUIRE(ev.exit_code == 0);
    json doc = json::parse(ev.out);
    REQUIRE(doc.contains("per_sentence"));
    CHECK(doc.at("per_sentence").size() == 2);
    for (const auto& row : doc.at("per_sentence"))
      CHECK(row.at("target").at("f1").get<double>() == 1.0);
  }

  SUBCASE("token mismatches between pred and gold are refused") {
    fs::path a = scratch_root() / "mismatch_a.jsonl";
    fs::path b = scratch_root() / "mismatch_b.jsonl";
    write_file(a, R"({"tokens": ["left"], "tuples": []})" "\n");
    write_file(b, R"({"tokens": ["right"], "tuples": []})" "\n");
    CmdResult ev =
        run_cli("evaluate --pred " + a.string() + " --gold " + b.string());
    check_single_error_line(ev);
    CHECK(ev.err.find("token") != std::string::npos);
  }
}

TEST_CASE("benchmark times single models and pipelines") {
  Workspace& ws = workspace();
  fs::path out = scratch_root() / "bench.json";
  CmdResult be = run_cli("benchmark --checkpoint " + ws.ckpt.string() + " --corpus " +
                         (ws.data / "test.jsonl").string() + " --runs 3 --out " + out.string());
  REQUIRE(be.exit_code == 0);
  json doc = json::parse(be.out);
  CHECK(doc.at("sentences") == 2);
  CHECK(doc.at("runs") == 3);
  CHECK(doc.at("sentences_per_second").get<double>() > 0.0);
  CHECK(json::parse(slurp(out)) == doc);

  SUBCASE("a chained pipeline of checkpoints is timed as one system") {
    CmdResult chain = run_cli("benchmark --checkpoint " + ws.ckpt.string() + " --checkpoint " +
                              ws.ckpt.string() + " --corpus " +
                              (ws.data / "test.jsonl").string() + " --runs 3");
    REQUIRE(chain.exit_code == 0);
    json cdoc = json::parse(chain.out);
    CHECK(cdoc.at("checkpoints").size() == 2);
    CHECK(cdoc.at("sentences_per_second").get<double>() > 0.0);
  }

  SUBCASE("fewer than three runs is refused") {
    CmdResult bad = run_cli("benchmark --checkpoint " + ws.ckpt.string() + " --corpus " +
                            (ws.data / "test.jsonl").string() + " --runs 2");
    check_single_error_line(bad);
    CHECK(bad.err.find("at least 3") != std::string::npos);
  }
}

TEST_CASE("failures surface as one diagnostic line") {
  Workspace& ws = workspace();

  SUBCASE("unknown config key") {
    fs::path cfg = scratch_root() / "bad_key.json";
    write_file(cfg, R"({"train": {"max_epoch": 1}})");
    CmdResult tr = run_cli("train --config " + cfg.string() + " --train " +
                           (ws.data / "train.jsonl").string() + " --dev " +
                           (ws.data / "dev.jsonl").string() + " --ontology " +
                           (ws.data / "ontology.json").string() + " --out " +
                           fresh_dir("ckpt_bad").string());
    check_single_error_line(tr);
    CHECK(tr.err.find("unknown config key \"max_epoch\"") != std::string::npos);
  }

  SUBCASE("missing ontology file") {
    CmdResult tr = run_cli("train --train " + (ws.data / "train.jsonl").string() + " --dev " +
                           (ws.data / "dev.jsonl").string() +
                           " --ontology /nonexistent/ontology.json --out " +
                           fresh_dir("ckpt_noont").string());
    check_single_error_line(tr);
  }

  SUBCASE("corpus that fails validation names the line") {
    fs::path bad = scratch_root() / "bad_corpus.jsonl";
    write_file(bad,
               std::string(R"({"tokens": ["ok"], "tuples": []})") + "\n" +
                   R"({"tokens": ["oops"], "tuples": [{"predicate": [[0, 5]], "frame": "x", "roles": []}]})" +
                   "\n");
    CmdResult tr = run_cli("train --train " + bad.string() + " --dev " + bad.string() +
                           " --ontology " + (ws.data / "ontology.json").string() + " --out " +
                           fresh_dir("ckpt_badcorpus").string());
    check_single_error_line(tr);
    CHECK(tr.err.find("line 2") != std::string::npos);
  }

  SUBCASE("tampered checkpoint is refused") {
    fs::path copy = fresh_dir("ckpt_tampered");
    for (const auto& entry : fs::directory_iterator(workspace().ckpt))
      fs::copy(entry.path(), copy / entry.path().filename());
    {
      std::ofstream v(copy / "vocab.txt", std::ios::app);
      v << "extra\n";
    }
    CmdResult pa = run_cli("parse --checkpoint " + copy.string() + " --input " +
                           (ws.data / "test.jsonl").string() + " --output " +
                           (scratch_root() / "tampered_out.jsonl").string());
    check_single_error_line(pa);
    CHECK(pa.err.find("vocabulary digest mismatch") != std::string::npos);
  }

  SUBCASE("checkpoint directory without metadata") {
    CmdResult pa = run_cli("parse --checkpoint " + fresh_dir("ckpt_empty").string() +
                           " --input " + (ws.data / "test.jsonl").string() + " --output " +
                           (scratch_root() / "empty_out.jsonl").string());
    check_single_error_line(pa);
    CHECK(pa.err.find("meta.json") != std::string::npos);
  }

  SUBCASE("unknown subcommand fails") {
    CmdResult r = run_cli("frobnicate");
    CHECK(r.exit_code != 0);
  }

  SUBCASE("missing required option fails") {
    CmdResult r = run_cli("parse --input " + (ws.data / "test.jsonl").string());
    CHECK(r.exit_code != 0);
  }
}

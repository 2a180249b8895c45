#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "abm/cli.hpp"
#include "abm/kv_config.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"

using namespace abm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args, const std::string& input = {}) {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// One corpus and two trained checkpoints shared by the cases below.
struct Workspace {
  fs::path dir = testing::temp_dir("cli");
  fs::path gen_cfg = dir / "gen.cfg";
  fs::path train_cfg = dir / "train.cfg";
  fs::path corpus = dir / "corpus";
  fs::path ckpt = dir / "m.ckpt";
  fs::path ckpt_b = dir / "b.ckpt";
  Run train_run;

  Workspace() {
    write(gen_cfg, "gen.train_sessions = 40\ngen.valid_sessions = 60\ngen.test_sessions = 120\ngen.seed = 3\n");
    write(train_cfg,
          "model.E = 8\nmodel.heads = 2\nmodel.layers = 1\ntrain.epochs = 1\ntrain.batch_size = 8\n"
          "serve.floor = 0.0\n");
    REQUIRE(cli({"gen", "--config", gen_cfg.string(), "--out", corpus.string()}).code == 0);
    train_run = cli({"train", "--config", train_cfg.string(), "--corpus", corpus.string(), "--out", ckpt.string()});
    REQUIRE(train_run.code == 0);
    REQUIRE(cli({"train", "--config", train_cfg.string(), "--corpus", corpus.string(), "--out", ckpt_b.string(),
                 "--ablate", "TBM2"})
                .code == 0);
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  const Run r = cli({"train", "--corpus", "x"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--out") != std::string::npos);
  CHECK(cli({"train", "--corpus", "x", "--out", "y", "--ablate", "XYZ"}).code == 2);
  CHECK(cli({"eval", "--ckpt", "a", "--corpus", "b", "--floor", "1.5"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("gen is deterministic and honours --seed") {
  const fs::path dir = testing::temp_dir("cli_gen");
  write(dir / "g.cfg", "gen.train_sessions = 10\ngen.valid_sessions = 5\ngen.test_sessions = 5\n");
  const Run a = cli({"gen", "--config", (dir / "g.cfg").string(), "--out", (dir / "a").string()});
  const Run b = cli({"gen", "--config", (dir / "g.cfg").string(), "--out", (dir / "b").string()});
  const Run c = cli({"gen", "--config", (dir / "g.cfg").string(), "--out", (dir / "c").string(), "--seed", "99"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "generator.cfg", "test.stats.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  CHECK(count_lines(slurp(dir / "a" / "train.jsonl")) == 10);
  write(dir / "bad.cfg", "gen.zipf_exponent = -1\n");
  CHECK(cli({"gen", "--config", (dir / "bad.cfg").string(), "--out", (dir / "d").string()}).code == 1);
}

TEST_CASE("train writes checkpoint, card, serving config and history") {
  Workspace& w = workspace();
  CHECK(fs::exists(w.ckpt));
  CHECK(fs::exists(w.ckpt.string() + ".card.txt"));
  CHECK(w.train_run.out.find("model\t") == 0);
  const KvConfig serve = KvConfig::load(w.ckpt.string() + ".serve.cfg");
  CHECK(serve.get_double("serve.floor", -1) == 0.0);
  CHECK(serve.get_bool("serve.gating", false));
  CHECK(serve.has("serve.threshold"));
  const std::string history = slurp(w.ckpt.string() + ".history.jsonl");
  CHECK(count_lines(history) == 5 + 1);
  CHECK(history.find("\"kind\":\"epoch\"") != std::string::npos);

  // Same inputs, same bytes.
  const fs::path again = w.dir / "again.ckpt";
  REQUIRE(cli({"train", "--config", w.train_cfg.string(), "--corpus", w.corpus.string(), "--out", again.string()})
              .code == 0);
  CHECK(slurp(again) == slurp(w.ckpt));
  CHECK(slurp(again.string() + ".history.jsonl") == history);
  CHECK(slurp(w.ckpt_b) != slurp(w.ckpt));
}

TEST_CASE("eval prints a JSON report and a table") {
  Workspace& w = workspace();
  const fs::path report = w.dir / "report.json";
  const Run r = cli({"eval", "--ckpt", w.ckpt.string(), "--corpus", w.corpus.string(), "--report", report.string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["model_id"].get<std::string>().size() == 16);
  CHECK(j["auc"].is_number());
  CHECK(j["slices"].size() > 10);
  CHECK(nlohmann::json::parse(slurp(report)) == j);
  CHECK(r.err.find("family") != std::string::npos);
  CHECK(fs::exists(report.string() + ".txt"));
  CHECK(cli({"eval", "--ckpt", w.ckpt.string(), "--corpus", w.corpus.string()}).out == r.out);
}

TEST_CASE("eval on single-class labels reports an undefined metric") {
  Workspace& w = workspace();
  const fs::path dir = w.dir / "one_class";
  fs::create_directories(dir);
  for (const char* f : {"generator.cfg", "train.jsonl", "valid.jsonl"}) fs::copy_file(w.corpus / f, dir / f, fs::copy_options::overwrite_existing);
  std::istringstream lines(slurp(w.corpus / "test.jsonl"));
  std::string line, out;
  while (std::getline(lines, line)) {
    auto j = nlohmann::ordered_json::parse(line);
    j["ground_truth"] = 1;
    out += j.dump() + "\n";
  }
  write(dir / "test.jsonl", out);
  const Run r = cli({"eval", "--ckpt", w.ckpt.string(), "--corpus", dir.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("undefined metric") != std::string::npos);
}

TEST_CASE("infer emits one decision per record, staged or not") {
  Workspace& w = workspace();
  const std::string records = slurp(w.corpus / "test.jsonl");
  const Run mono = cli({"infer", "--ckpt", w.ckpt.string()}, records);
  const Run staged = cli({"infer", "--ckpt", w.ckpt.string(), "--staged"}, records);
  REQUIRE(mono.code == 0);
  CHECK(mono.out == staged.out);
  CHECK(count_lines(mono.out) == count_lines(records));
  CHECK(cli({"infer", "--ckpt", w.ckpt.string()}, records + "\n\n").out == mono.out);

  std::istringstream lines(mono.out);
  std::string line;
  REQUIRE(std::getline(lines, line));
  std::vector<std::string> fields;
  std::istringstream cols(line);
  for (std::string f; std::getline(cols, f, '\t');) fields.push_back(f);
  REQUIRE(fields.size() == 5);
  CHECK((fields[2] == "respond" || fields[2] == "clarify"));
  const double p = std::stod(fields[1]);
  const double theta = std::stod(fields[3]);
  CHECK((fields[2] == "clarify") == (p <= theta));

  // An explicit threshold of 1 clarifies every turn; 0 responds to all but p == 0.
  const Run all = cli({"infer", "--ckpt", w.ckpt.string(), "--threshold", "1"}, records);
  CHECK(all.out.find("respond") == std::string::npos);
  const Run bad = cli({"infer", "--ckpt", w.ckpt.string()}, "{not json}\n");
  CHECK(bad.code == 1);
}

TEST_CASE("gradcheck subcommand") {
  const fs::path dir = testing::temp_dir("cli_grad");
  write(dir / "g.cfg", "model.E = 8\nmodel.heads = 2\nmodel.layers = 1\ngradcheck.batch = 2\n");
  const Run r = cli({"gradcheck", "--config", (dir / "g.cfg").string(), "--coordinates", "60"});
  CHECK(r.code == 0);
  CHECK(r.out.find("max_rel_error") == 0);
  CHECK(r.out.find("checked\t60") != std::string::npos);
}

TEST_CASE("ab subcommand") {
  Workspace& w = workspace();
  const Run r = cli({"ab", "--ckpt-a", w.ckpt.string(), "--ckpt-b", w.ckpt_b.string(), "--corpus", w.corpus.string(),
                     "--floor", "0"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["sessions_a"].get<int>() + j["sessions_b"].get<int>() == 120);
  CHECK(j["cus_a"].get<double>() >= 0.0);
  CHECK(j["cus_a"].get<double>() <= 1.0);
  CHECK(cli({"ab", "--ckpt-a", w.ckpt.string(), "--ckpt-b", w.ckpt_b.string(), "--corpus", w.corpus.string(),
             "--floor", "0"})
            .out == r.out);
}

#ifdef ABM_CLI_PATH
TEST_CASE("the installed binary maps failures to exit codes") {
  const std::string bin = ABM_CLI_PATH;
  CHECK(std::system((bin + " > /dev/null 2>&1").c_str()) != 0);
  CHECK(WEXITSTATUS(std::system((bin + " > /dev/null 2>&1").c_str())) == 2);
  CHECK(WEXITSTATUS(std::system((bin + " infer --ckpt /nonexistent.ckpt < /dev/null > /dev/null 2>&1").c_str())) == 1);
}
#endif

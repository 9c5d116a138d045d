#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mds/cli.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "mds");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = mds::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("mds_cli_" + std::to_string(std::rand()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

const char* kToyKb = R"([
  {"name": "InaniwaYosuke", "attributes": [{"type": "near", "value": "WismaAtria"}]},
  {"name": "WismaAtria", "attributes": [{"type": "domain", "value": "mall"}]}
])";

}  // namespace

TEST_CASE("walk prints one tuple per line") {
  Workspace ws;
  const auto kb = ws.write("kb.json", kToyKb);
  auto r = run({"walk", "--kb", kb, "--seed", "InaniwaYosuke", "--hops", "2"});
  CHECK(r.code == 0);
  REQUIRE(lines(r.out).size() == 1);
  CHECK(json::parse(r.out)["entries"] ==
        json::array({"InaniwaYosuke", "near", "WismaAtria", "domain", "mall"}));

  auto one = run({"walk", "--kb", kb, "--seed", "InaniwaYosuke", "--seed", "WismaAtria", "--hops", "1"});
  CHECK(lines(one.out).size() == 2);
}

TEST_CASE("usage errors exit 1") {
  Workspace ws;
  auto missing = run({"walk", "--seed", "A"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("--kb") != std::string::npos);
  CHECK(missing.err.find("Usage") != std::string::npos);
  CHECK(missing.out.empty());

  CHECK(run({"walk", "--kb", ws.write("kb.json", kToyKb), "--seed", "A", "--bogus"}).code == 1);
  CHECK(run({}).code == 1);
  CHECK(run({"fly"}).code == 1);
  CHECK(run({"walk", "--kb", ws.write("k2.json", kToyKb), "--seed", "A", "--hops", "0"}).code == 1);

  auto bad_file = run({"ingest", "--kb", ws.path("nope.json")});
  CHECK(bad_file.code == 1);
  CHECK(bad_file.err.find("nope.json") != std::string::npos);

  auto dup = run({"ingest", "--kb", ws.write("dup.json", R"([{"name": "A"}, {"name": "A"}])")});
  CHECK(dup.code == 1);
  CHECK(dup.err.find("duplicate") != std::string::npos);

  auto strategy = run({"generate", "--kb", ws.path("k2.json"), "--checkpoint", ws.path("none"), "--context",
                       ws.write("c.json", "{}"), "--strategy", "sample"});
  CHECK(strategy.code == 1);
}

TEST_CASE("every subcommand answers --help and --version") {
  for (const char* sub : {"ingest", "walk", "retrieve", "train", "generate", "evaluate", "dump-attention",
                          "export-reps", "synth"}) {
    CAPTURE(sub);
    auto h = run({sub, "--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find(sub) != std::string::npos);
    auto v = run({sub, "--version"});
    CHECK(v.code == 0);
    CHECK(v.out == std::string(MDS_VERSION) + "\n");
  }
  CHECK(run({"--version"}).code == 0);
}

TEST_CASE("ingest and retrieve") {
  Workspace ws;
  const auto kb = ws.write("kb.json", R"([
    {"name": "Wisma Atria", "attributes": [{"type": "domain", "value": "mall"}], "image_features": [[1, 0]]},
    {"name": "Inaniwa Yosuke", "attributes": [{"type": "near", "value": "Wisma Atria"}, {"type": "domain", "value": "food"}]}
  ])");
  auto ingest = run({"ingest", "--kb", kb});
  REQUIRE(ingest.code == 0);
  auto stats = json::parse(ingest.out);
  CHECK(stats["entities"] == 2);
  CHECK(stats["edges"] == 3);
  CHECK(stats["feature_dim"] == 2);

  const auto ctx = ws.write("ctx.json", R"({"context_utterances": ["where is inaniwa yosuke ?"], "context_image_features": [[0.9, 0.1]]})");
  auto r = run({"retrieve", "--kb", kb, "--context", ctx, "--epsilon", "0.5"});
  REQUIRE(r.code == 0);
  auto doc = json::parse(r.out);
  CHECK(doc["attributes"].size() == 3);
  CHECK(doc["attributes"][0]["provenance"] == "textual");
  CHECK(doc["attributes"][2]["provenance"] == "visual");
  CHECK(doc["tuples"].size() == 3);

  const auto out = ws.path("r.json");
  CHECK(run({"retrieve", "--kb", kb, "--context", ctx, "--epsilon", "0.5", "--out", out}).out.empty());
  CHECK(slurp(out) == r.out);
}

TEST_CASE("synth, train, generate, evaluate and inspection end to end") {
  Workspace ws;
  const auto kb = ws.path("kb.json"), corpus = ws.path("corpus.jsonl");
  auto s = run({"synth", "--seed", "7", "--entities", "12", "--pairs", "6", "--kb-out", kb, "--corpus-out", corpus});
  REQUIRE(s.code == 0);
  auto s2 = run({"synth", "--seed", "7", "--entities", "12", "--pairs", "6", "--kb-out", ws.path("kb2.json")});
  CHECK(s2.out == slurp(corpus));
  CHECK(slurp(ws.path("kb2.json")) == slurp(kb));
  CHECK(lines(s2.out).size() == 6);

  const auto config = ws.write("cfg.json", R"({"D": 32, "mlp_hidden": 48, "epochs": 3, "learning_rate": 0.003})");
  const auto ckpt = ws.path("model.json");
  auto t = run({"train", "--kb", kb, "--corpus", corpus, "--checkpoint", ckpt, "--config", config, "--epochs", "150"});
  REQUIRE(t.code == 0);
  const auto log = lines(t.out);
  REQUIRE(log.size() == 150);
  auto first = json::parse(log.front()), last = json::parse(log.back());
  CHECK(first["epoch"] == 1);
  CHECK(last["loss"].get<double>() < 0.1 * first["loss"].get<double>());
  auto meta = json::parse(slurp(ckpt + ".meta.json"));
  CHECK(meta["training"]["epochs"] == 150);
  CHECK(meta["training"]["D"] == 32);
  CHECK(meta["training"]["learning_rate"] == 0.003);

  // Same seed, same flags: identical checkpoint bytes.
  const auto ckpt2 = ws.path("model2.json");
  CHECK(run({"train", "--kb", kb, "--corpus", corpus, "--checkpoint", ckpt2, "--config", config, "--epochs", "150"})
            .out == t.out);
  CHECK(slurp(ckpt2) == slurp(ckpt));

  auto e = run({"evaluate", "--kb", kb, "--checkpoint", ckpt, "--corpus", corpus});
  REQUIRE(e.code == 0);
  auto report = json::parse(e.out);
  for (const char* key : {"bleu1", "bleu2", "bleu3", "bleu4", "nist", "exact_match"}) CHECK(report.contains(key));
  CHECK(report["exact_match"].get<double>() >= 0.95);

  std::istringstream first_pair(slurp(corpus));
  std::string line;
  std::getline(first_pair, line);
  const auto ctx = ws.write("ctx.json", line);
  auto g = run({"generate", "--kb", kb, "--checkpoint", ckpt, "--context", ctx});
  REQUIRE(g.code == 0);
  CHECK(g.out == json::parse(line)["response"].get<std::string>() + "\n");
  CHECK(run({"generate", "--kb", kb, "--checkpoint", ckpt, "--context", ctx}).out == g.out);
  auto beam = run({"generate", "--kb", kb, "--checkpoint", ckpt, "--context", ctx, "--strategy", "beam:3"});
  CHECK(beam.code == 0);
  CHECK(run({"generate", "--kb", kb, "--checkpoint", ckpt, "--context", ctx, "--max-len", "2"}).out.size() <= g.out.size());

  auto d = run({"dump-attention", "--kb", kb, "--checkpoint", ckpt, "--corpus", corpus});
  REQUIRE(d.code == 0);
  REQUIRE(lines(d.out).size() == 6);
  for (const auto& l : lines(d.out)) {
    auto doc = json::parse(l);
    CHECK(doc["fusion_r_t"].size() == doc["fusion_r_h"].size());
    if (!doc["tuples"].empty()) {
      CHECK(doc["relation_attention"][0].size() == doc["tuples"].size());
      for (std::size_t i = 0; i < doc["fusion_r_t"].size(); ++i)
        CHECK(std::abs(doc["fusion_r_t"][i].get<double>() + doc["fusion_r_h"][i].get<double>() - 1.0) < 1e-9);
    }
  }

  auto x = run({"export-reps", "--kb", kb, "--checkpoint", ckpt, "--corpus", corpus});
  REQUIRE(x.code == 0);
  auto rep = json::parse(lines(x.out).front());
  CHECK(rep["composed"].size() == 8);
  CHECK(rep["ground_truth"].size() == 8);
  CHECK(rep["composed"][0].size() == 32);

  auto norel = run({"train", "--kb", kb, "--corpus", corpus, "--checkpoint", ws.path("m3.json"), "--config", config,
                    "--no-relations", "--out", ws.path("log.txt")});
  CHECK(norel.code == 0);
  CHECK(norel.out.empty());
  CHECK(lines(slurp(ws.path("log.txt"))).size() == 3);
  CHECK(json::parse(slurp(ws.path("m3.json.meta.json")))["config"]["use_relations"] == false);
}

TEST_CASE("train rejects bad configs") {
  Workspace ws;
  const auto kb = ws.path("kb.json"), corpus = ws.path("c.jsonl");
  run({"synth", "--entities", "6", "--pairs", "2", "--kb-out", kb, "--corpus-out", corpus});
  auto r = run({"train", "--kb", kb, "--corpus", corpus, "--checkpoint", ws.path("m.json"), "--config",
                ws.write("cfg.json", R"({"colour": 1})")});
  CHECK(r.code == 1);
  CHECK(r.err.find("colour") != std::string::npos);
  CHECK(run({"train", "--kb", kb, "--corpus", ws.write("empty.jsonl", ""), "--checkpoint", ws.path("m.json")}).code == 1);
}

TEST_CASE("the installed binary maps errors to exit codes") {
  const std::string bin = MDS_CLI_PATH;
  CHECK(std::system((bin + " walk --seed A > /dev/null 2>&1").c_str()) != 0);
  CHECK(WEXITSTATUS(std::system((bin + " walk --seed A > /dev/null 2>&1").c_str())) == 1);
  CHECK(WEXITSTATUS(std::system((bin + " --version > /dev/null 2>&1").c_str())) == 0);
}

#include <doctest.h>

#include <iostream>

#include "parg/cli.hpp"
#include "parg/mining.hpp"
#include "support.hpp"

using namespace parg;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "parg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string data(const char* name) { return test::data(name).string(); }

json small_model_config(const test::TempDir& tmp) {
  PipelineConfig c;
  c.experiment.model.embed_dim = 8;
  c.experiment.model.hidden_dim = 8;
  c.experiment.model.max_epochs = 2;
  c.experiment.model.batch_size = 8;
  json j = pipeline_config_to_json(c);
  std::ofstream(tmp / "cfg.json") << j.dump(1);
  return j;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  auto r = run({});
  CHECK(r.code == 1);
  CHECK(r.out.empty());
  CHECK(r.err.find("Usage") != std::string::npos);

  r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("mine") != std::string::npos);

  r = run({"mine", "--bogus"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);

  r = run({"frobnicate"});
  CHECK(r.code == 1);

  r = run({"stats", "--corpus", "/nonexistent/corpus.json"});
  CHECK(r.code == 1);
  CHECK(r.err.find("no such file") != std::string::npos);
  CHECK(r.out.empty());

  r = run({"--log-level", "loud", "stats", "--corpus", data("mini_camrest.json")});
  CHECK(r.code == 1);
}

TEST_CASE("stats match the reference counts") {
  const auto r = run({"stats", "--corpus", data("mini_camrest.json")});
  REQUIRE(r.code == 0);
  const json s = json::parse(r.out);
  const json want = test::read_json(test::data("mini_camrest_expected.json")).at("counts");
  for (const char* k : {"dialogs", "turns", "slots", "informable_slots", "requestable_slots", "database_entities"})
    CHECK(s.at(k) == want.at(k));
  CHECK(s.at("dialogs_with_goal") == 12);
  CHECK(s.at("augmented_turns") == 0);
}

TEST_CASE("mine writes the pair file and orphan report") {
  test::TempDir tmp("cli-mine");
  const auto pairs = (tmp / "pairs.jsonl").string(), report = (tmp / "orphans.json").string();
  auto r = run({"mine", "--corpus", data("mini_camrest.json"), "--out", pairs, "--orphan-report", report});
  REQUIRE(r.code == 0);
  const json s = json::parse(r.out);
  const json want = test::read_json(test::data("mini_camrest_expected.json"));
  CHECK(s.at("strict_pairs") == want.at("pairs").size());
  CHECK(s.at("relaxed_pairs") == want.at("relaxed").size());
  CHECK(s.at("orphans") == want.at("orphans").size());
  CHECK(s.at("unresolved") == 0);
  CHECK(import_pairs(pairs).size() == s.at("pairs").get<std::size_t>());
  CHECK(test::read_json(report).at("orphans").size() == want.at("orphans").size());

  const auto serial_pairs = (tmp / "serial.jsonl").string();
  r = run({"mine", "--corpus", data("mini_camrest.json"), "--out", serial_pairs, "--threads", "1"});
  REQUIRE(r.code == 0);
  CHECK(test::read_file(serial_pairs) == test::read_file(pairs));

  r = run({"mine", "--corpus", data("mini_camrest.json"), "--out", (tmp / "n.jsonl").string(), "--no-relax",
           "--bleu-th", "0.3", "--div-th", "4"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("relaxed_pairs") == 0);

  r = run({"stats", "--corpus", data("mini_camrest.json"), "--pairs", pairs});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("pairs").at("relaxed") == want.at("relaxed").size());

  r = run({"mine", "--corpus", data("mini_camrest.json"), "--out", "/nonexistent/dir/p.jsonl"});
  CHECK(r.code == 1);
  r = run({"mine", "--corpus", data("mini_camrest.json"), "--out", pairs, "--relax-step", "0"});
  CHECK(r.code == 1);
}

TEST_CASE("augment in both modes") {
  test::TempDir tmp("cli-aug");
  const auto pairs = (tmp / "pairs.jsonl").string();
  REQUIRE(run({"mine", "--corpus", data("mini_camrest.json"), "--out", pairs}).code == 0);
  auto r = run({"augment", "--corpus", data("mini_camrest.json"), "--pairs", pairs, "--mode", "utter-sub", "--out",
                (tmp / "aug.json").string()});
  REQUIRE(r.code == 0);
  const auto added = json::parse(r.out).at("added_turns").get<std::size_t>();
  CHECK(added > 0);
  CHECK(load_canonical(tmp / "aug.json").augmented.size() == added);

  r = run({"augment", "--corpus", data("mini_camrest.json"), "--pairs", pairs, "--mode", "stream", "--out",
           (tmp / "s.jsonl").string(), "--epoch-seed", "3"});
  REQUIRE(r.code == 0);
  const auto first = test::read_file(tmp / "s.jsonl");
  REQUIRE(run({"augment", "--corpus", data("mini_camrest.json"), "--pairs", pairs, "--mode", "stream", "--out",
               (tmp / "s2.jsonl").string(), "--epoch-seed", "3"})
              .code == 0);
  CHECK(test::read_file(tmp / "s2.jsonl") == first);

  r = run({"augment", "--corpus", data("mini_camrest.json"), "--pairs", pairs, "--mode", "mixed", "--out",
           (tmp / "x").string()});
  CHECK(r.code == 1);
}

TEST_CASE("ingest converts raw corpora and writes splits") {
  test::TempDir tmp("cli-ingest");
  auto r = run({"ingest", "--input", data("raw_camrest/CamRest676.json"), "--format", "camrest-raw", "--out",
                (tmp / "c.json").string()});
  REQUIRE(r.code == 0);
  json s = json::parse(r.out);
  CHECK(s.at("dialogs") == 3);
  CHECK(s.at("skipped_turns") == 1);
  CHECK(load_canonical(tmp / "c.json").dialogs.size() == 3);

  r = run({"ingest", "--input", data("raw_multiwoz.json"), "--format", "multiwoz-raw", "--out",
           (tmp / "m.json").string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("turns") == 7);

  r = run({"--seed", "9", "ingest", "--input", data("mini_camrest.json"), "--out", (tmp / "k.json").string(),
           "--split-dir", (tmp / "split").string(), "--split", "3:1:1"});
  REQUIRE(r.code == 0);
  s = json::parse(r.out).at("split");
  CHECK(s.at("train").get<int>() + s.at("dev").get<int>() + s.at("test").get<int>() == 12);
  CHECK(load_canonical(tmp / "split" / "test.json").dialogs.size() == s.at("test").get<std::size_t>());

  r = run({"ingest", "--input", data("mini_camrest.json"), "--out", (tmp / "k.json").string(), "--split-dir",
           (tmp / "split").string(), "--split", "3:1"});
  CHECK(r.code == 1);
  r = run({"ingest", "--input", data("mini_camrest.json"), "--format", "xml", "--out", (tmp / "k.json").string()});
  CHECK(r.code == 1);

  std::ofstream(tmp / "broken.json") << "{\"ontology\": {}}";
  r = run({"ingest", "--input", (tmp / "broken.json").string(), "--out", (tmp / "b.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("schema") != std::string::npos);
}

TEST_CASE("config files") {
  test::TempDir tmp("cli-config");
  PipelineConfig c;
  c.seed = 7;
  c.paths.corpus = "corpus.json";
  c.experiment.mining.diversity_threshold = 2.5;
  c.experiment.model.hidden_dim = 12;
  const json j = pipeline_config_to_json(c);
  CHECK(j.at("mining").at("diversity_threshold") == 2.5);
  CHECK_FALSE(j.at("experiment").contains("model"));
  const PipelineConfig back = pipeline_config_from_json(j);
  CHECK(pipeline_config_to_json(back) == j);
  CHECK(back.paths == c.paths);

  json minimal = {{"version", 1}, {"seed", 5}};
  const PipelineConfig m = pipeline_config_from_json(minimal);
  CHECK(m.experiment.split_seed == 5);
  CHECK(m.experiment.seeds == std::vector<std::uint64_t>{5});

  CHECK_THROWS_AS(pipeline_config_from_json(json{{"seed", 1}}), ValidationError);
  CHECK_THROWS_AS(pipeline_config_from_json(json{{"version", 2}}), ValidationError);
  CHECK_THROWS_AS(pipeline_config_from_json(json{{"version", 1}, {"seed", "x"}}), ValidationError);

  std::ofstream(tmp / "v2.json") << R"({"version": 2})";
  auto r = run({"--config", (tmp / "v2.json").string(), "stats", "--corpus", data("mini_camrest.json")});
  CHECK(r.code == 1);
  CHECK(r.err.find("version") != std::string::npos);
  r = run({"--config", (tmp / "none.json").string(), "stats", "--corpus", data("mini_camrest.json")});
  CHECK(r.code == 1);

  // Paths come from the config when flags are absent.
  json withpath = {{"version", 1}, {"paths", {{"corpus", data("mini_camrest.json")}}}};
  std::ofstream(tmp / "p.json") << withpath.dump();
  r = run({"--config", (tmp / "p.json").string(), "stats"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("dialogs") == 12);
}

TEST_CASE("metrics and synth") {
  auto r = run({"metrics", "--hyp", "the cat sat", "--ref", "the cat sat down"});
  REQUIRE(r.code == 0);
  const json m = json::parse(r.out);
  CHECK(m.at("edit_distance") == 1);
  CHECK(m.at("sentence_bleu").get<double>() == doctest::Approx(std::exp(1.0 - 4.0 / 3.0)));
  CHECK(run({"metrics", "--hyp", "a", "--ref", ""}).code == 1);
  r = run({"metrics", "bleu", "--hyp", "the cat sat", "--ref", "the cat sat down"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("sentence_bleu") == m.at("sentence_bleu"));
  r = run({"metrics", "diversity", "--hyp", "a b c", "--ref", "a x c d"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("diversity") == 2.0);
  CHECK(run({"metrics", "rouge", "--hyp", "a", "--ref", "a"}).code == 1);

  test::TempDir tmp("cli-synth");
  r = run({"--seed", "3", "synth", "--out", (tmp / "s.json").string(), "--dialogs", "5", "--entities", "8"});
  REQUIRE(r.code == 0);
  const Corpus c = load_canonical(tmp / "s.json");
  CHECK(c.dialogs.size() == 5);
  CHECK(c.database.size() == 8);
  REQUIRE(run({"--seed", "3", "synth", "--out", (tmp / "t.json").string(), "--dialogs", "5", "--entities", "8"}).code ==
          0);
  CHECK(test::read_file(tmp / "s.json") == test::read_file(tmp / "t.json"));
}

TEST_CASE("gold evaluation writes reports") {
  test::TempDir tmp("cli-eval");
  auto r = run({"evaluate", "--corpus", data("mini_multidomain.json"), "--gold", "--out-dir", (tmp / "rep").string(),
                "--timings"});
  REQUIRE(r.code == 0);
  const json rep = test::read_json(tmp / "rep" / "report.json");
  CHECK(rep.at("rows")[0].at("combined").get<double>() == doctest::Approx(2.0));
  CHECK(rep.at("rows")[0].at("excluded_dialogs") == 1);
  CHECK(test::read_file(tmp / "rep" / "report.md") == r.out);
  CHECK(std::filesystem::exists(tmp / "rep" / "timings.json"));
  r = run({"evaluate", "--corpus", data("mini_multidomain.json"), "--gold", "--ckpt", data("mini_camrest.json"),
           "--out-dir", (tmp / "rep").string()});
  CHECK(r.code == 1);
}

TEST_CASE("train, generate and evaluate a checkpoint") {
  test::TempDir tmp("cli-train");
  small_model_config(tmp);
  const auto cfg = (tmp / "cfg.json").string(), ckpt = (tmp / "m.ckpt").string();
  auto r = run({"--config", cfg, "train", "--corpus", data("mini_camrest.json"), "--augmentation", "parg", "--out", ckpt,
                "--history", (tmp / "h.json").string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("epochs") == 2);
  CHECK(test::read_json(tmp / "h.json").size() == 2);

  std::ofstream(tmp / "turn.json") << R"({"user": "i want a cheap chinese restaurant", "context": "",
    "prev_state": {"informed": {}, "requested": {}}, "domain": "restaurant", "db_bucket": 0})";
  for (const char* mode : {"paraphrase", "belief", "response", "full-turn"}) {
    CAPTURE(mode);
    r = run({"generate", "--ckpt", ckpt, "--input", (tmp / "turn.json").string(), "--mode", mode, "--corpus",
             data("mini_camrest.json")});
    REQUIRE(r.code == 0);
    const json g = json::parse(r.out);
    CHECK(g.contains("paraphrase"));
    CHECK(g.contains("response") == (std::string(mode) == "response" || std::string(mode) == "full-turn"));
  }
  r = run({"generate", "--ckpt", ckpt, "--input", (tmp / "turn.json").string(), "--mode", "dream"});
  CHECK(r.code == 1);

  r = run({"evaluate", "--corpus", data("mini_multidomain.json"), "--ckpt", ckpt, "--out-dir", (tmp / "e").string()});
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(tmp / "e" / "report.md"));

  std::ofstream(tmp / "bad.ckpt") << "PARGCKPT but not really";
  r = run({"generate", "--ckpt", (tmp / "bad.ckpt").string(), "--input", (tmp / "turn.json").string()});
  CHECK(r.code == 1);
}

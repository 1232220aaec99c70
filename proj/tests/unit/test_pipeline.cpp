#include <doctest.h>

#include <nlohmann/json.hpp>

#include "disinfo/pipeline.hpp"
#include "test_support.hpp"

using namespace disinfo;
using namespace disinfo::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;
using testing::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small synthetic corpus plus a config that trains quickly on it.
ConfigValues small_run(const fs::path& dir, const fs::path& corpus) {
  return {{"run_dir", dir.string()},       {"corpus.path", corpus.string()}, {"features.svd_k", "8"},
          {"train.epochs", "4"},           {"train.text_dim", "8"},          {"train.mixed_dim", "8"},
          {"train.text_hidden", "8"},      {"train.mixed_hidden", "8"},      {"synth.n_genuine", "150"},
          {"synth.n_fake", "50"},          {"synth.organic_users", "60"}};
}

void make_corpus(const fs::path& dir, const fs::path& corpus) {
  auto v = small_run(dir, corpus);
  v["synth.output"] = corpus.string();
  run_stage(Stage::synth, make_config(v));
}

}  // namespace

TEST_CASE("stage names round-trip") {
  for (const auto s : all_stages()) CHECK(parse_stage(to_string(s)) == s);
  CHECK(all_stages().size() == 12);
  CHECK_FALSE(parse_stage("bogus").has_value());
  CHECK(parse_stage("extract-entities") == Stage::extract_entities);
}

TEST_CASE("INI sections flatten to section.key") {
  const auto v = parse_ini("seed = 7\n; comment\n[train]\nepochs = 3\nlearning_rate=0.01\n[graph]\nwalk_steps=5\n");
  CHECK(v.at("seed") == "7");
  CHECK(v.at("train.epochs") == "3");
  CHECK(v.at("train.learning_rate") == "0.01");
  CHECK(v.at("graph.walk_steps") == "5");
  const auto c = make_config(v);
  CHECK(c.seed == 7);
  CHECK(c.train.epochs == 3);
  CHECK(c.train.learning_rate == doctest::Approx(0.01));
  CHECK(c.walk_steps == 5);
  CHECK(c.features.svd.seed == 7);
  CHECK_THROWS_AS(parse_ini("[train\nepochs=3\n"), ParseError);
}

TEST_CASE("overrides win over file values and unknown keys are rejected") {
  auto v = parse_ini("[train]\nepochs = 3\n");
  apply_override(v, "train.epochs=9");
  CHECK(make_config(v).train.epochs == 9);
  CHECK_THROWS_AS(apply_override(v, "train.epoch=9"), ValidationError);
  CHECK_THROWS_AS(apply_override(v, "train.epochs"), ValidationError);
  CHECK_THROWS_AS(make_config({{"nosuch.key", "1"}}), ValidationError);
}

TEST_CASE("out-of-bounds values name their key") {
  const auto fails_on = [](const std::string& key, const std::string& value) {
    try {
      make_config({{key, value}});
    } catch (const ValidationError& e) {
      return std::string(e.what()).find(key.substr(key.find('.') + 1)) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_on("graph.damping", "1.5"));
  CHECK(fails_on("features.valid_fraction", "1"));
  CHECK(fails_on("train.epochs", "-1"));
  CHECK(fails_on("itemsets.min_confidence", "2"));
  CHECK(fails_on("synth.amplification", "30"));
  CHECK(fails_on("train.optimizer", "rmsprop"));
  CHECK(fails_on("llm.style", "grpc"));
  CHECK(fails_on("finetune.learning_rate", "abc"));
  CHECK_NOTHROW(make_config({}));
}

TEST_CASE("provenance carries seed and stage sections but no paths") {
  auto c = make_config({{"seed", "5"}, {"corpus.path", "/secret/place.jsonl"}, {"train.epochs", "2"}});
  const auto p = provenance(c, Stage::train);
  CHECK(p["seed"] == 5);
  CHECK(p["stage"] == "train");
  CHECK(p["config"]["train"]["epochs"] == "2");
  CHECK(p["config"].contains("features"));
  CHECK_FALSE(p["config"].contains("corpus"));
  CHECK(p.dump().find("secret") == std::string::npos);
}

TEST_CASE("sha256 matches the published test vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("missing input artifacts fail with the stage name") {
  TempDir tmp("pipe_missing");
  const auto c = make_config({{"run_dir", tmp.path().string()}});
  try {
    run_stage(Stage::train, c);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == Stage::train);
    CHECK(std::string(e.what()).starts_with("train: "));
    CHECK(std::string(e.what()).find("features.json") != std::string::npos);
  }
  CHECK_THROWS_AS(run_stage(Stage::ingest, c), StageError);  // corpus.path unset
}

TEST_CASE("pipeline writes a parseable metrics report and a consistent manifest") {
  TempDir tmp("pipe_run");
  const auto corpus = tmp.path() / "synthetic.jsonl";
  make_corpus(tmp.path() / "gen", corpus);
  const auto run = tmp.path() / "run";
  const auto r = run_stage(Stage::pipeline, make_config(small_run(run, corpus)));
  CHECK(r.summary.starts_with("pipeline: eval: "));
  const auto metrics = json::parse(slurp(run / "metrics.json"));
  CHECK(metrics["examples"] == 50);
  CHECK(metrics["metrics"]["f1"].get<double>() >= 0.0);
  CHECK(metrics["provenance"]["stage"] == "eval");
  const auto manifest = read_manifest(run);
  for (const auto* name : {"corpus.jsonl", "features.json", "train_features.jsonl", "valid_features.jsonl",
                           "model.json", "train_log.csv", "metrics.json"}) {
    INFO(name);
    REQUIRE(manifest["artifacts"].contains(name));
    CHECK(manifest["artifacts"][name]["sha256"] == sha256_file(run / name));
  }
  CHECK(manifest["artifacts"]["model.json"]["stage"] == "train");
  CHECK(slurp(run / "train_log.csv").starts_with("# {"));
  CHECK(slurp(run / "corpus.jsonl").starts_with("{\"_meta\":"));
}

TEST_CASE("running stages one by one equals running pipeline") {
  TempDir tmp("pipe_compose");
  const auto corpus = tmp.path() / "synthetic.jsonl";
  make_corpus(tmp.path() / "gen", corpus);
  const auto whole = tmp.path() / "whole";
  const auto parts = tmp.path() / "parts";
  run_stage(Stage::pipeline, make_config(small_run(whole, corpus)));
  for (const auto s : {Stage::ingest, Stage::features, Stage::train, Stage::eval}) {
    run_stage(s, make_config(small_run(parts, corpus)));
  }
  CHECK(slurp(whole / "metrics.json") == slurp(parts / "metrics.json"));
  CHECK(slurp(whole / "manifest.json") == slurp(parts / "manifest.json"));
}

TEST_CASE("analysis stages write their artifacts") {
  TempDir tmp("pipe_analysis");
  const auto corpus = tmp.path() / "synthetic.jsonl";
  make_corpus(tmp.path() / "gen", corpus);
  auto v = small_run(tmp.path() / "run", corpus);
  v["trends.terms"] = "nazi";
  v["itemsets.min_support"] = "20";
  v["itemsets.max_len"] = "2";
  const auto c = make_config(v);
  run_stage(Stage::ingest, c);
  CHECK(run_stage(Stage::trends, c).artifacts == std::vector<std::string>{"trends.csv"});
  CHECK(run_stage(Stage::itemsets, c).artifacts.size() == 3);
  const auto g = run_stage(Stage::graph, c);
  CHECK(g.artifacts == std::vector<std::string>{"graph.graphml", "communities.csv", "centralities.csv"});
  const auto graphml = slurp(tmp.path() / "run" / "graph.graphml");
  CHECK(graphml.find("<!-- {") != std::string::npos);
  CHECK(graphml.find("<!-- {") < graphml.find("<graphml"));
}

TEST_CASE("extract-entities parses a saved response") {
  TempDir tmp("pipe_entities");
  const auto resp = tmp.path() / "response.txt";
  testing::write_file(resp, testing::read_fixture("appendix/response_2.txt"));
  const auto c = make_config({{"run_dir", (tmp.path() / "run").string()},
                              {"llm.response_file", resp.string()},
                              {"llm.entities", "Dr. Ben Carson;Nobody"}});
  const auto r = run_stage(Stage::extract_entities, c);
  CHECK(r.summary.starts_with("extract-entities: 7 records"));
  const auto doc = json::parse(slurp(tmp.path() / "run" / "entities.json"));
  CHECK(doc["documents"][0]["records"][0]["entity"] == "Dr. Ben Carson");
  CHECK(doc["documents"][0]["features"][0] == 1.0);
  CHECK(doc["documents"][0]["features"][1] == 0.0);
}

TEST_CASE("emit-config writes the defaults under a provenance line") {
  TempDir tmp("pipe_emit");
  const auto c = make_config({{"run_dir", tmp.path().string()}});
  run_stage(Stage::emit_config, c);
  const auto doc = slurp(tmp.path() / "finetune_config.txt");
  CHECK(doc.starts_with("# {"));
  CHECK(doc.substr(doc.find('\n') + 1) == llm::serialize_finetune(llm::FinetuneConfig{}));
  const auto j = make_config({{"run_dir", tmp.path().string()}, {"finetune.format", "json"},
                              {"finetune.num_train_epochs", "3"}});
  run_stage(Stage::emit_config, j);
  const auto doc_json = json::parse(slurp(tmp.path() / "finetune_config.json"));
  CHECK(doc_json["num_train_epochs"] == 3);
  CHECK(doc_json["provenance"]["config"]["finetune"]["num_train_epochs"] == "3");
}

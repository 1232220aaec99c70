#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disinfo/classifier.hpp"
#include "disinfo/corpus.hpp"
#include "disinfo/error.hpp"
#include "disinfo/features.hpp"
#include "disinfo/llmclient.hpp"
#include "disinfo/synth.hpp"
#include "disinfo/trends.hpp"
#include "disinfo/usergraph.hpp"

namespace disinfo::pipeline {

enum class Stage {
  ingest,
  trends,
  itemsets,
  graph,
  features,
  train,
  eval,
  analyze,
  extract_entities,
  emit_config,
  synth,
  pipeline,
};

std::string to_string(Stage s);
std::optional<Stage> parse_stage(const std::string& s);
const std::vector<Stage>& all_stages();

// Flat "section.key" -> value map; the top-level keys are "seed" and "run_dir".
using ConfigValues = std::map<std::string, std::string>;

// Every recognised key with its default value.
const ConfigValues& default_values();

// INI text with [section] headers. Throws ParseError on malformed input.
ConfigValues parse_ini(const std::string& content);
ConfigValues read_ini(const std::filesystem::path& path);

// "section.key=value"; throws ValidationError on a missing '=' or unknown key.
void apply_override(ConfigValues& values, const std::string& assignment);

struct PipelineConfig {
  ConfigValues values;  // effective values, defaults filled in

  std::filesystem::path run_dir;
  std::uint64_t seed = 1;

  std::filesystem::path corpus_path;
  std::optional<CorpusFormat> corpus_format;  // nullopt: from the extension
  ColumnMap columns;
  CorpusFilter filter;
  std::filesystem::path label_rules;

  std::vector<std::string> trend_terms;
  trends::BinWidth trend_bin = trends::BinWidth::day;

  std::uint64_t min_support = 5;
  std::size_t max_itemset_len = 3;
  double min_confidence = 0.6;
  std::size_t min_token_len = 3;
  std::filesystem::path stopwords;

  graph::GraphOptions graph;
  int walk_steps = 4;
  graph::PageRankOptions pagerank;
  // Looser than the library default: near-bipartite blocks (bots around a few
  // operators) leave the leading eigenvalue nearly degenerate.
  graph::HitsOptions hits{.tol = 1e-6};
  graph::LayoutOptions layout;

  features::FeatureConfig features;
  double valid_fraction = 0.25;

  classifier::ModelConfig model;  // vocab and input sizes are filled in by the train stage
  classifier::TrainConfig train;
  double threshold = 0.5;

  llm::LlmEndpoint endpoint;
  llm::TaskKind task = llm::TaskKind::narrative_analysis;
  std::optional<std::string> question;
  std::string input_text;
  std::filesystem::path input_file;
  std::filesystem::path response_file;
  std::vector<std::string> entity_registry;

  llm::FinetuneOverrides finetune;
  bool finetune_json = false;

  synth::SyntheticSpec synth;
  std::filesystem::path synth_output;
};

// Validates every value against its module's bounds. Throws ValidationError
// naming the key.
PipelineConfig make_config(const ConfigValues& values);

// Seed plus the effective values of the sections a stage depends on. Paths
// and unset (empty) values are left out so that identical runs in different
// directories agree.
nlohmann::json provenance(const PipelineConfig& config, Stage stage);

// Module errors surfacing from a stage, prefixed with the stage name.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what) : Error(to_string(stage) + ": " + what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

struct StageResult {
  std::string summary;                  // one line, no trailing newline
  std::vector<std::string> artifacts;   // names relative to the run directory
};

// Reads the stage's inputs, writes its artifacts into config.run_dir and
// records them in manifest.json. `pipeline` runs ingest, features, train and
// eval in order.
StageResult run_stage(Stage stage, const PipelineConfig& config);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// {"artifacts": {name: {"sha256", "bytes", "stage"}}}; empty when absent.
nlohmann::json read_manifest(const std::filesystem::path& run_dir);

}  // namespace disinfo::pipeline

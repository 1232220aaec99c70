#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "disinfo/log.hpp"
#include "disinfo/pipeline.hpp"

namespace pl = disinfo::pipeline;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string run_dir;
  std::string seed;
  std::string corpus;
  bool verbose = false;
  bool quiet = false;
};

const char* describe(pl::Stage s) {
  switch (s) {
    case pl::Stage::ingest: return "Load, filter and label the corpus into corpus.jsonl";
    case pl::Stage::trends: return "Count thematic-field matches per time bin into trends.csv";
    case pl::Stage::itemsets: return "Mine frequent itemsets and rules; write the semantic graph";
    case pl::Stage::graph: return "Build the user graph; write communities, centralities and GraphML";
    case pl::Stage::features: return "Split the corpus and compute vocab, TF-IDF and SVD features";
    case pl::Stage::train: return "Train the classifier on train_features.jsonl";
    case pl::Stage::eval: return "Score the model on the validation split into metrics.json";
    case pl::Stage::analyze: return "Send prompts for llm.task to the configured endpoint";
    case pl::Stage::extract_entities: return "Parse entity-sentiment JSON from a response file or endpoint";
    case pl::Stage::emit_config: return "Write the fine-tuning argument document";
    case pl::Stage::synth: return "Generate a synthetic planted-amplification corpus";
    case pl::Stage::pipeline: return "Run ingest, features, train and eval in order";
  }
  return "";
}

int run(pl::Stage stage, const Common& opts) {
  auto& logger = disinfo::log::get();
  if (opts.verbose) logger.set_level(spdlog::level::debug);
  if (opts.quiet) logger.set_level(spdlog::level::err);
  pl::ConfigValues values;
  if (!opts.config_file.empty()) values = pl::read_ini(opts.config_file);
  if (!opts.run_dir.empty()) values["run_dir"] = opts.run_dir;
  if (!opts.seed.empty()) values["seed"] = opts.seed;
  if (!opts.corpus.empty()) values["corpus.path"] = opts.corpus;
  for (const auto& s : opts.sets) pl::apply_override(values, s);
  const auto config = pl::make_config(values);
  logger.debug("run directory {}", config.run_dir.string());
  const auto result = pl::run_stage(stage, config);
  std::cout << result.summary << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disinformation analytics toolkit: corpus trends, itemsets, user graphs, features, classifier and LLM prompts"};
  app.name("disinfo");
  app.require_subcommand(1);
  app.fallthrough();

  Common opts;
  app.add_option("-c,--config", opts.config_file, "INI file with per-stage sections")->check(CLI::ExistingFile);
  app.add_option("-s,--set", opts.sets, "Override a config value: section.key=value (repeatable)");
  app.add_option("-d,--run-dir", opts.run_dir, "Artifact directory (run_dir)");
  app.add_option("--seed", opts.seed, "Global seed");
  app.add_option("--corpus", opts.corpus, "Input corpus for ingest (corpus.path)");
  app.add_flag("-v,--verbose", opts.verbose, "Debug logging on stderr");
  app.add_flag("-q,--quiet", opts.quiet, "Only log errors");

  std::optional<pl::Stage> chosen;
  for (const auto s : pl::all_stages()) {
    auto* sub = app.add_subcommand(pl::to_string(s), describe(s));
    sub->callback([&chosen, s] { chosen = s; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "disinfo: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    return run(*chosen, opts);
  } catch (const disinfo::Error& e) {
    disinfo::log::get().error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    disinfo::log::get().error("{}: {}", pl::to_string(*chosen), e.what());
    return 1;
  }
}

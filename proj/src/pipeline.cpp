#include "disinfo/pipeline.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "disinfo/graphio.hpp"
#include "disinfo/itemsets.hpp"
#include "disinfo/log.hpp"
#include "disinfo/text.hpp"
#include "disinfo/timeutil.hpp"

namespace disinfo::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<Stage, const char*>>& stage_names() {
  static const std::vector<std::pair<Stage, const char*>> n = {
      {Stage::ingest, "ingest"},       {Stage::trends, "trends"},
      {Stage::itemsets, "itemsets"},   {Stage::graph, "graph"},
      {Stage::features, "features"},   {Stage::train, "train"},
      {Stage::eval, "eval"},           {Stage::analyze, "analyze"},
      {Stage::extract_entities, "extract-entities"}, {Stage::emit_config, "emit-config"},
      {Stage::synth, "synth"},         {Stage::pipeline, "pipeline"}};
  return n;
}

// Keys holding file system locations; kept out of provenance headers.
const std::set<std::string>& path_keys() {
  static const std::set<std::string> k = {"run_dir",        "corpus.path",       "labels.rules",
                                          "itemsets.stopwords", "llm.input_file", "llm.response_file",
                                          "synth.output"};
  return k;
}

std::vector<std::string> stage_sections(Stage s) {
  switch (s) {
    case Stage::ingest: return {"corpus", "filter", "labels"};
    case Stage::trends: return {"trends"};
    case Stage::itemsets: return {"itemsets"};
    case Stage::graph: return {"graph"};
    case Stage::features: return {"features"};
    case Stage::train:
    case Stage::eval:
    case Stage::pipeline: return {"features", "train"};
    case Stage::analyze:
    case Stage::extract_entities: return {"llm"};
    case Stage::emit_config: return {"finetune"};
    case Stage::synth: return {"synth"};
  }
  return {};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

// ---- value parsing -------------------------------------------------------

std::uint64_t as_u64(const ConfigValues& v, const std::string& key) {
  const auto& s = v.at(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) {
    throw ValidationError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return out;
}

std::size_t as_size(const ConfigValues& v, const std::string& key) { return static_cast<std::size_t>(as_u64(v, key)); }

int as_int(const ConfigValues& v, const std::string& key) {
  const auto n = as_u64(v, key);
  if (n > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) throw ValidationError(key + ": value too large");
  return static_cast<int>(n);
}

double as_double(const ConfigValues& v, const std::string& key) {
  const auto& s = v.at(key);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(out)) {
    throw ValidationError(key + ": expected a number, got '" + s + "'");
  }
  return out;
}

double as_probability(const ConfigValues& v, const std::string& key) {
  const double p = as_double(v, key);
  if (p < 0.0 || p > 1.0) throw ValidationError(key + ": must lie in [0, 1]");
  return p;
}

bool as_bool(const ConfigValues& v, const std::string& key) {
  const auto s = text::to_lower(v.at(key));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ValidationError(key + ": expected true or false, got '" + v.at(key) + "'");
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    auto t = text::trim(cur);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

// ---- artifacts -------------------------------------------------------------

struct Artifacts {
  const PipelineConfig& config;
  Stage stage;
  std::vector<std::string> written;

  fs::path path(const std::string& name) const { return config.run_dir / name; }

  void write(const std::string& name, const std::string& content) {
    write_text(path(name), content);
    written.push_back(name);
  }

  fs::path require(const std::string& name) const {
    const auto p = path(name);
    if (!fs::exists(p)) throw IoError("missing input artifact " + name + " in " + config.run_dir.string());
    return p;
  }
};

std::string header_line(const json& prov) { return prov.dump(); }

json json_with_provenance(json doc, const json& prov) {
  doc["provenance"] = prov;
  return doc;
}

std::string dump_doc(const json& j) { return j.dump(2) + "\n"; }

void update_manifest(const fs::path& run_dir, const std::vector<std::string>& names, Stage stage) {
  auto m = read_manifest(run_dir);
  for (const auto& n : names) {
    const auto p = run_dir / n;
    m["artifacts"][n] = {{"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}, {"stage", to_string(stage)}};
  }
  write_text(run_dir / "manifest.json", dump_doc(m));
}

std::vector<features::FeatureBundle> read_bundles(const fs::path& path) {
  std::vector<features::FeatureBundle> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), lineno);
    }
    if (j.contains("_meta")) continue;
    out.push_back(features::bundle_from_json(j));
  }
  return out;
}

std::string bundles_jsonl(const std::vector<features::FeatureBundle>& bundles, const json& prov) {
  std::string out = json{{"_meta", prov}}.dump() + "\n";
  for (const auto& b : bundles) out += features::bundle_to_json(b).dump() + "\n";
  return out;
}

Corpus stage_corpus(const Artifacts& a) { return load_corpus(a.require("corpus.jsonl"), CorpusFormat::jsonl); }

classifier::ModelConfig model_config_for(const PipelineConfig& c, const features::FeatureModel& fm) {
  auto m = c.model;
  m.text_vocab = fm.vocab.size();
  m.mixed_vocab = fm.vocab.size();
  m.svd_k = fm.config.svd.k;
  m.seed = c.seed;
  return m;
}

std::vector<std::string> llm_inputs(const PipelineConfig& c) {
  std::vector<std::string> inputs;
  if (!c.input_text.empty()) inputs.push_back(c.input_text);
  if (!c.input_file.empty()) {
    std::istringstream in(read_text(c.input_file));
    std::string line;
    while (std::getline(in, line)) {
      if (!text::trim(line).empty()) inputs.push_back(line);
    }
  }
  if (inputs.empty()) throw ValidationError("llm.input or llm.input_file must supply at least one text");
  return inputs;
}

// The provenance goes into an XML comment right after the declaration.
void insert_xml_comment(std::string& doc, const std::string& text) {
  std::string safe = text;
  // "--" may not appear inside an XML comment.
  for (std::size_t i; (i = safe.find("--")) != std::string::npos;) safe.replace(i, 2, "- -");
  const auto decl_end = doc.find("?>");
  const auto at = decl_end == std::string::npos ? 0 : doc.find('\n', decl_end) + 1;
  doc.insert(at, "<!-- " + safe + " -->\n");
}

// ---- stages ----------------------------------------------------------------

std::string run_ingest(Artifacts& a) {
  const auto& c = a.config;
  if (c.corpus_path.empty()) throw ValidationError("corpus.path is not set");
  const auto fmt = c.corpus_format.value_or(format_from_path(c.corpus_path));
  auto corpus = load_corpus(c.corpus_path, fmt, c.columns);
  const auto loaded = corpus.size();
  corpus = apply_filter(corpus, c.filter);
  if (!c.label_rules.empty()) {
    const auto rules = parse_label_rules(read_text(c.label_rules));
    corpus = apply_labels(corpus, rules);
  }
  std::size_t labeled = 0;
  for (const auto& t : corpus) labeled += t.label.has_value();
  a.write("corpus.jsonl", serialize_jsonl(corpus, provenance(c, a.stage)));
  return "ingest: " + std::to_string(loaded) + " loaded, " + std::to_string(corpus.size()) + " kept, " +
         std::to_string(labeled) + " labeled";
}

std::string run_trends(Artifacts& a) {
  const auto corpus = stage_corpus(a);
  const auto series = trends::count_series(corpus, a.config.trend_terms, a.config.trend_bin);
  a.write("trends.csv", trends::to_csv(series, header_line(provenance(a.config, a.stage))));
  return "trends: " + std::to_string(series.bins.size()) + " bins, " + std::to_string(series.total()) +
         " matching tweets";
}

std::string run_itemsets(Artifacts& a) {
  const auto& c = a.config;
  const auto corpus = stage_corpus(a);
  const auto stop = c.stopwords.empty() ? itemsets::default_stopwords() : itemsets::parse_stopwords(read_text(c.stopwords));
  const auto tx = itemsets::to_transactions(corpus, stop, c.min_token_len);
  const auto freq = itemsets::mine_frequent(tx, c.min_support, c.max_itemset_len);
  const auto rules = itemsets::derive_rules(freq, c.min_confidence);
  const auto header = header_line(provenance(c, a.stage));
  a.write("itemsets.csv", itemsets::itemsets_to_csv(freq, header));
  a.write("rules.csv", itemsets::rules_to_csv(rules, header));
  auto graphml = itemsets::to_graphml(itemsets::semantic_graph(freq, tx.size()));
  insert_xml_comment(graphml, header);
  a.write("semantic.graphml", graphml);
  return "itemsets: " + std::to_string(freq.size()) + " frequent itemsets, " + std::to_string(rules.size()) +
         " rules from " + std::to_string(tx.size()) + " transactions";
}

std::string run_graph(Artifacts& a) {
  const auto& c = a.config;
  const auto corpus = stage_corpus(a);
  const auto g = graph::build_user_graph(corpus, c.graph);
  const auto part = graph::walktrap(g, c.walk_steps);
  const auto cent = graph::centralities(g, c.pagerank, c.hits);
  const auto layout = graph::layout_fr(g, c.layout);
  const auto iso = graph::isolation_metrics(g, part);
  const auto header = header_line(provenance(c, a.stage));

  auto graphml = graphio::to_graphml(graph::attributed(g, part, cent, layout));
  insert_xml_comment(graphml, header);
  a.write("graph.graphml", graphml);
  a.write("communities.csv", graph::isolation_to_csv(iso, part, cent.pagerank, header));

  std::string csv = "# " + header + "\nuser,community,pagerank,hub,authority,betweenness\n";
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    csv += g.name(v) + "," + std::to_string(part.community_of[v]) + "," + graphio::format_number(cent.pagerank[v]) +
           "," + graphio::format_number(cent.hub[v]) + "," + graphio::format_number(cent.authority[v]) + "," +
           graphio::format_number(cent.betweenness[v]) + "\n";
  }
  a.write("centralities.csv", csv);
  std::size_t isolated = 0;
  for (const auto& r : iso) isolated += r.isolation < 0.1;
  return "graph: " + std::to_string(g.vertex_count()) + " users, " + std::to_string(g.edge_count()) + " edges, " +
         std::to_string(part.communities.size()) + " communities (" + std::to_string(isolated) +
         " with isolation < 0.1), modularity " + graphio::format_number(part.modularity);
}

std::string run_features(Artifacts& a) {
  const auto& c = a.config;
  const auto corpus = stage_corpus(a);
  const auto parts = split(corpus, c.valid_fraction, c.seed);
  if (parts.train.empty()) throw ValidationError("training split is empty");
  const auto fm = features::fit_features(parts.train, c.features);
  std::vector<features::FeatureBundle> train, valid;
  train.reserve(parts.train.size());
  for (const auto& t : parts.train) train.push_back(fm.bundle(t));
  for (const auto& t : parts.valid) valid.push_back(fm.bundle(t));
  const auto prov = provenance(c, a.stage);
  a.write("features.json", dump_doc(json_with_provenance(features::feature_model_to_json(fm), prov)));
  a.write("train_features.jsonl", bundles_jsonl(train, prov));
  a.write("valid_features.jsonl", bundles_jsonl(valid, prov));
  return "features: vocab " + std::to_string(fm.vocab.size()) + ", svd k " + std::to_string(fm.config.svd.k) + ", " +
         std::to_string(train.size()) + " train / " + std::to_string(valid.size()) + " valid";
}

std::string run_train(Artifacts& a) {
  const auto& c = a.config;
  const auto fm = features::feature_model_from_json(json::parse(read_text(a.require("features.json"))));
  const auto data = read_bundles(a.require("train_features.jsonl"));
  if (data.empty()) throw ValidationError("no training examples");
  for (const auto& b : data) {
    if (!b.label) throw ValidationError("training example " + b.tweet_id + " has no label");
  }
  auto tc = c.train;
  tc.seed = c.seed;
  const auto result = classifier::train(classifier::init_params(model_config_for(c, fm)), data, tc,
                                        [&](int epoch, double loss) {
                                          log::get().debug("epoch {} loss {}", epoch, loss);
                                        });
  const auto prov = provenance(c, a.stage);
  a.write("model.json", dump_doc(json_with_provenance(classifier::params_to_json(result.params), prov)));
  std::string log_csv = "# " + header_line(prov) + "\nepoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    log_csv += std::to_string(e + 1) + "," + graphio::format_number(result.epoch_loss[e]) + "\n";
  }
  a.write("train_log.csv", log_csv);
  const double last = result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back();
  return "train: " + std::to_string(data.size()) + " examples, " + std::to_string(result.epoch_loss.size()) +
         " epochs, final loss " + graphio::format_number(last);
}

std::string run_eval(Artifacts& a) {
  const auto& c = a.config;
  const auto params = classifier::params_from_json(json::parse(read_text(a.require("model.json"))));
  const auto data = read_bundles(a.require("valid_features.jsonl"));
  const auto m = classifier::evaluate(params, data, c.threshold);
  json doc = {{"metrics", classifier::metrics_to_json(m)}, {"examples", data.size()}, {"threshold", c.threshold}};
  a.write("metrics.json", dump_doc(json_with_provenance(doc, provenance(c, a.stage))));
  std::ostringstream s;
  s << "eval: " << data.size() << " examples, f1 " << graphio::format_number(m.f1) << ", precision "
    << graphio::format_number(m.precision) << ", recall " << graphio::format_number(m.recall) << ", accuracy "
    << graphio::format_number(m.accuracy);
  return s.str();
}

std::string run_analyze(Artifacts& a) {
  const auto& c = a.config;
  if (c.endpoint.url.empty()) throw ValidationError("llm.url is not set");
  const auto inputs = llm_inputs(c);
  std::vector<std::string> prompts;
  for (const auto& in : inputs) prompts.push_back(llm::build_prompt(c.task, in, c.question));
  llm::LlmClient client(c.endpoint);
  const auto out = client.query_batch(prompts);
  std::string jsonl = json{{"_meta", provenance(c, a.stage)}}.dump() + "\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    json row = {{"task", llm::to_string(c.task)}, {"input", inputs[i]}};
    if (out[i].text) {
      row["response"] = *out[i].text;
    } else {
      row["error"] = out[i].error;
      ++failed;
    }
    jsonl += row.dump() + "\n";
  }
  a.write("analysis.jsonl", jsonl);
  if (failed == out.size()) throw llm::NetworkError(c.endpoint.url, "every query failed");
  return "analyze: " + std::to_string(out.size() - failed) + " of " + std::to_string(out.size()) +
         " responses (" + llm::to_string(c.task) + ")";
}

std::string run_extract(Artifacts& a) {
  const auto& c = a.config;
  std::vector<std::pair<std::string, std::string>> responses;  // (source, text)
  if (!c.response_file.empty()) {
    responses.emplace_back(c.response_file.filename().string(), read_text(c.response_file));
  } else {
    if (c.endpoint.url.empty()) throw ValidationError("set llm.response_file or llm.url");
    const auto inputs = llm_inputs(c);
    std::vector<std::string> prompts;
    for (const auto& in : inputs) prompts.push_back(llm::build_prompt(llm::TaskKind::entity_sentiment, in, c.question));
    const auto out = llm::LlmClient(c.endpoint).query_batch(prompts);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!out[i].text) throw llm::NetworkError(c.endpoint.url, out[i].error);
      responses.emplace_back(inputs[i], *out[i].text);
    }
  }
  json docs = json::array();
  std::size_t records = 0;
  for (const auto& [source, text] : responses) {
    const auto parsed = llm::parse_entity_sentiments(text);
    for (const auto& w : parsed.warnings) log::get().warn("{}: {}", source, w);
    json d = {{"source", source}, {"records", llm::records_to_json(parsed.records)}, {"warnings", parsed.warnings}};
    if (!c.entity_registry.empty()) {
      d["features"] = llm::sentiment_features(parsed.records, c.entity_registry);
      d["registry"] = c.entity_registry;
    }
    records += parsed.records.size();
    docs.push_back(std::move(d));
  }
  a.write("entities.json", dump_doc(json_with_provenance({{"documents", docs}}, provenance(c, a.stage))));
  return "extract-entities: " + std::to_string(records) + " records from " + std::to_string(responses.size()) +
         " responses";
}

std::string run_emit_config(Artifacts& a) {
  const auto& c = a.config;
  const auto ft = llm::emit_finetune_config(c.finetune);
  const auto prov = provenance(c, a.stage);
  if (c.finetune_json) {
    a.write("finetune_config.json", dump_doc(json_with_provenance(llm::finetune_to_json(ft), prov)));
  } else {
    a.write("finetune_config.txt", llm::serialize_finetune(ft, header_line(prov)));
  }
  return "emit-config: " + ft.model_name + ", learning_rate " + graphio::format_number(ft.learning_rate) + ", " +
         std::to_string(ft.num_train_epochs) + " epochs";
}

std::string run_synth(Artifacts& a) {
  const auto& c = a.config;
  const auto corpus = synth::generate_synthetic(c.synth);
  const auto content = serialize_jsonl(corpus, provenance(c, a.stage));
  std::string where;
  if (c.synth_output.empty()) {
    a.write("synthetic.jsonl", content);
    where = (c.run_dir / "synthetic.jsonl").string();
  } else {
    write_text(c.synth_output, content);
    where = c.synth_output.string();
  }
  return "synth: " + std::to_string(c.synth.n_genuine) + " genuine + " + std::to_string(c.synth.n_fake) +
         " fake tweets -> " + where;
}

}  // namespace

std::string to_string(Stage s) {
  for (const auto& [st, name] : stage_names()) {
    if (st == s) return name;
  }
  return "?";
}

std::optional<Stage> parse_stage(const std::string& s) {
  for (const auto& [st, name] : stage_names()) {
    if (s == name) return st;
  }
  return std::nullopt;
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> v = [] {
    std::vector<Stage> out;
    for (const auto& [st, name] : stage_names()) out.push_back(st);
    return out;
  }();
  return v;
}

const ConfigValues& default_values() {
  static const ConfigValues d = [] {
    const synth::SyntheticSpec s;
    const features::FeatureConfig f;
    const classifier::ModelConfig m;
    const classifier::TrainConfig t;
    const llm::LlmEndpoint e;
    const auto num = [](double v) { return graphio::format_number(v); };
    ConfigValues v = {
        {"seed", "1"},
        {"run_dir", "run"},
        {"corpus.path", ""},
        {"corpus.format", ""},
        {"corpus.columns", ""},
        {"filter.min_retweets", "0"},
        {"filter.start", ""},
        {"filter.end", ""},
        {"filter.terms", ""},
        {"labels.rules", ""},
        {"trends.terms", ""},
        {"trends.bin", "day"},
        {"itemsets.min_support", "5"},
        {"itemsets.max_len", "3"},
        {"itemsets.min_confidence", "0.6"},
        {"itemsets.min_token_len", "3"},
        {"itemsets.stopwords", ""},
        {"graph.co_retweet", "false"},
        {"graph.walk_steps", "4"},
        {"graph.damping", "0.85"},
        {"graph.layout_iterations", "300"},
        {"graph.hits_tol", "1e-06"},
        {"graph.hits_max_iter", "100000"},
        {"features.min_freq", std::to_string(f.min_freq)},
        {"features.text_len", std::to_string(f.text_len)},
        {"features.mixed_len", std::to_string(f.mixed_len)},
        {"features.svd_k", std::to_string(f.svd.k)},
        {"features.oversample", std::to_string(f.svd.oversample)},
        {"features.power_iters", std::to_string(f.svd.power_iters)},
        {"features.valid_fraction", "0.25"},
        {"train.optimizer", classifier::to_string(t.optimizer)},
        {"train.learning_rate", num(t.learning_rate)},
        {"train.batch_size", std::to_string(t.batch_size)},
        {"train.epochs", std::to_string(t.epochs)},
        {"train.text_dim", std::to_string(m.text_dim)},
        {"train.mixed_dim", std::to_string(m.mixed_dim)},
        {"train.text_hidden", std::to_string(m.text_hidden)},
        {"train.mixed_hidden", std::to_string(m.mixed_hidden)},
        {"train.svd_hidden", std::to_string(m.svd_hidden)},
        {"train.head_hidden", std::to_string(m.head_hidden)},
        {"train.threshold", "0.5"},
        {"llm.url", ""},
        {"llm.timeout", num(e.timeout_seconds)},
        {"llm.max_retries", std::to_string(e.max_retries)},
        {"llm.max_concurrency", std::to_string(e.max_concurrency)},
        {"llm.temperature", num(e.temperature)},
        {"llm.max_new_tokens", std::to_string(e.max_new_tokens)},
        {"llm.style", "completion"},
        {"llm.model", ""},
        {"llm.task", "narrative-analysis"},
        {"llm.question", ""},
        {"llm.input", ""},
        {"llm.input_file", ""},
        {"llm.response_file", ""},
        {"llm.entities", ""},
        {"finetune.format", "text"},
        {"synth.n_genuine", std::to_string(s.n_genuine)},
        {"synth.n_fake", std::to_string(s.n_fake)},
        {"synth.organic_users", std::to_string(s.organic_users)},
        {"synth.organic_groups", std::to_string(s.organic_groups)},
        {"synth.organic_mixing", num(s.organic_mixing)},
        {"synth.max_organic_retweets", std::to_string(s.max_organic_retweets)},
        {"synth.bot_community_count", std::to_string(s.bot_community_count)},
        {"synth.bot_community_size", std::to_string(s.bot_community_size)},
        {"synth.operators_per_community", std::to_string(s.operators_per_community)},
        {"synth.amplification", std::to_string(s.amplification)},
        {"synth.leak_probability", num(s.leak_probability)},
        {"synth.fake_vocab_skew", num(s.fake_vocab_skew)},
        {"synth.genuine_topic_rate", num(s.genuine_topic_rate)},
        {"synth.start", timeutil::format_iso8601(s.start_time)},
        {"synth.days", std::to_string(s.days)},
        {"synth.fake_onset_day", std::to_string(s.fake_onset_day)},
        {"synth.seed", ""},
        {"synth.output", ""},
    };
    // Fine-tuning overrides are unset unless given; an empty value keeps the default.
    for (const char* k : {"model_name", "learning_rate", "num_train_epochs", "max_seq_length",
                          "gradient_accumulation_steps", "load_in_4bit", "bnb_4bit_quant_type", "lr_scheduler_type"}) {
      v[std::string("finetune.") + k] = "";
    }
    return v;
  }();
  return d;
}

ConfigValues parse_ini(const std::string& content) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(content);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  ConfigValues out;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      out[key] = node.data();
      continue;
    }
    for (const auto& [sub, leaf] : node) out[key + "." + sub] = leaf.data();
  }
  return out;
}

ConfigValues read_ini(const fs::path& path) {
  const auto values = parse_ini(read_text(path));
  // Relative paths in the file are taken relative to the file itself.
  ConfigValues out = values;
  for (auto& [k, v] : out) {
    if (path_keys().contains(k) && !v.empty() && fs::path(v).is_relative()) {
      v = (path.parent_path() / v).lexically_normal().string();
    }
  }
  return out;
}

void apply_override(ConfigValues& values, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("expected key=value, got '" + assignment + "'");
  const auto key = text::trim(assignment.substr(0, eq));
  if (!default_values().contains(key)) throw ValidationError("unknown config key '" + key + "'");
  values[key] = text::trim(assignment.substr(eq + 1));
}

PipelineConfig make_config(const ConfigValues& given) {
  PipelineConfig c;
  c.values = default_values();
  for (const auto& [k, v] : given) {
    if (!c.values.contains(k)) throw ValidationError("unknown config key '" + k + "'");
    c.values[k] = v;
  }
  const auto& v = c.values;
  const auto str = [&](const std::string& k) -> const std::string& { return v.at(k); };

  c.seed = as_u64(v, "seed");
  if (str("run_dir").empty()) throw ValidationError("run_dir must not be empty");
  c.run_dir = str("run_dir");

  c.corpus_path = str("corpus.path");
  if (const auto& f = str("corpus.format"); f == "jsonl") {
    c.corpus_format = CorpusFormat::jsonl;
  } else if (f == "csv") {
    c.corpus_format = CorpusFormat::csv;
  } else if (!f.empty()) {
    throw ValidationError("corpus.format: expected jsonl or csv, got '" + f + "'");
  }
  for (const auto& pair : split_list(str("corpus.columns"), ';')) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos) throw ValidationError("corpus.columns: expected field=column, got '" + pair + "'");
    c.columns[text::trim(pair.substr(0, eq))] = text::trim(pair.substr(eq + 1));
  }

  c.filter.min_retweets = as_size(v, "filter.min_retweets");
  if (!str("filter.start").empty() || !str("filter.end").empty()) {
    const auto bound = [&](const std::string& k, std::int64_t fallback) {
      if (str(k).empty()) return fallback;
      const auto t = timeutil::parse_iso8601(str(k));
      if (!t) throw ValidationError(k + ": expected an ISO-8601 date, got '" + str(k) + "'");
      return *t;
    };
    DateRange r{bound("filter.start", 0), bound("filter.end", std::numeric_limits<std::int64_t>::max())};
    if (r.start > r.end) throw ValidationError("filter.start is after filter.end");
    c.filter.date_range = r;
  }
  c.filter.required_terms = split_list(str("filter.terms"), ' ');
  c.label_rules = str("labels.rules");

  c.trend_terms = split_list(str("trends.terms"), ' ');
  try {
    c.trend_bin = trends::parse_bin_width(str("trends.bin"));
  } catch (const Error& e) {
    throw ValidationError(std::string("trends.bin: ") + e.what());
  }

  c.min_support = as_u64(v, "itemsets.min_support");
  if (c.min_support < 1) throw ValidationError("itemsets.min_support must be at least 1");
  c.max_itemset_len = as_size(v, "itemsets.max_len");
  if (c.max_itemset_len < 1) throw ValidationError("itemsets.max_len must be at least 1");
  c.min_confidence = as_probability(v, "itemsets.min_confidence");
  c.min_token_len = as_size(v, "itemsets.min_token_len");
  c.stopwords = str("itemsets.stopwords");

  c.graph.co_retweet = as_bool(v, "graph.co_retweet");
  c.walk_steps = as_int(v, "graph.walk_steps");
  if (c.walk_steps < 1) throw ValidationError("graph.walk_steps must be at least 1");
  c.pagerank.damping = as_double(v, "graph.damping");
  if (!(c.pagerank.damping > 0.0 && c.pagerank.damping < 1.0)) throw ValidationError("graph.damping must lie in (0, 1)");
  c.layout.iterations = as_int(v, "graph.layout_iterations");
  c.hits.tol = as_double(v, "graph.hits_tol");
  if (!(c.hits.tol > 0.0)) throw ValidationError("graph.hits_tol must be positive");
  c.hits.max_iter = as_int(v, "graph.hits_max_iter");
  if (c.hits.max_iter < 1) throw ValidationError("graph.hits_max_iter must be at least 1");
  c.layout.seed = c.seed;

  c.features.min_freq = as_size(v, "features.min_freq");
  if (c.features.min_freq < 1) throw ValidationError("features.min_freq must be at least 1");
  c.features.text_len = as_size(v, "features.text_len");
  c.features.mixed_len = as_size(v, "features.mixed_len");
  if (c.features.text_len < 1 || c.features.mixed_len < 1) {
    throw ValidationError("features.text_len and features.mixed_len must be at least 1");
  }
  c.features.svd.k = as_size(v, "features.svd_k");
  if (c.features.svd.k < 1) throw ValidationError("features.svd_k must be at least 1");
  c.features.svd.oversample = as_size(v, "features.oversample");
  c.features.svd.power_iters = as_size(v, "features.power_iters");
  c.features.svd.seed = c.seed;
  c.valid_fraction = as_double(v, "features.valid_fraction");
  if (!(c.valid_fraction >= 0.0 && c.valid_fraction < 1.0)) {
    throw ValidationError("features.valid_fraction must lie in [0, 1)");
  }

  try {
    c.train.optimizer = classifier::parse_optimizer(str("train.optimizer"));
  } catch (const Error& e) {
    throw ValidationError(std::string("train.optimizer: ") + e.what());
  }
  c.train.learning_rate = as_double(v, "train.learning_rate");
  c.train.batch_size = as_size(v, "train.batch_size");
  c.train.epochs = as_int(v, "train.epochs");
  c.train.seed = c.seed;
  try {
    c.train.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("train: ") + e.what());
  }
  c.model.text_dim = as_size(v, "train.text_dim");
  c.model.mixed_dim = as_size(v, "train.mixed_dim");
  c.model.text_hidden = as_size(v, "train.text_hidden");
  c.model.mixed_hidden = as_size(v, "train.mixed_hidden");
  c.model.svd_hidden = as_size(v, "train.svd_hidden");
  c.model.head_hidden = as_size(v, "train.head_hidden");
  c.model.seed = c.seed;
  try {
    c.model.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("train: ") + e.what());
  }
  c.threshold = as_probability(v, "train.threshold");

  c.endpoint.url = str("llm.url");
  c.endpoint.timeout_seconds = as_double(v, "llm.timeout");
  c.endpoint.max_retries = as_int(v, "llm.max_retries");
  c.endpoint.max_concurrency = as_size(v, "llm.max_concurrency");
  c.endpoint.temperature = as_double(v, "llm.temperature");
  c.endpoint.max_new_tokens = as_int(v, "llm.max_new_tokens");
  if (const auto& s = str("llm.style"); s == "completion") {
    c.endpoint.style = llm::WireStyle::completion;
  } else if (s == "chat") {
    c.endpoint.style = llm::WireStyle::chat;
  } else {
    throw ValidationError("llm.style: expected completion or chat, got '" + s + "'");
  }
  c.endpoint.model = str("llm.model");
  if (!c.endpoint.url.empty()) {
    try {
      c.endpoint.validate();
    } catch (const Error& e) {
      throw ValidationError(std::string("llm: ") + e.what());
    }
  }
  try {
    c.task = llm::parse_task(str("llm.task"));
  } catch (const Error& e) {
    throw ValidationError(std::string("llm.task: ") + e.what());
  }
  if (!str("llm.question").empty()) c.question = str("llm.question");
  c.input_text = str("llm.input");
  c.input_file = str("llm.input_file");
  c.response_file = str("llm.response_file");
  c.entity_registry = split_list(str("llm.entities"), ';');

  for (const auto& [k, val] : v) {
    if (!k.starts_with("finetune.") || k == "finetune.format" || val.empty()) continue;
    c.finetune.set(k.substr(9), val);
  }
  if (const auto& f = str("finetune.format"); f == "json") {
    c.finetune_json = true;
  } else if (f != "text") {
    throw ValidationError("finetune.format: expected text or json, got '" + f + "'");
  }

  auto& s = c.synth;
  s.n_genuine = as_size(v, "synth.n_genuine");
  s.n_fake = as_size(v, "synth.n_fake");
  s.organic_users = as_size(v, "synth.organic_users");
  s.organic_groups = as_size(v, "synth.organic_groups");
  s.organic_mixing = as_double(v, "synth.organic_mixing");
  s.max_organic_retweets = as_size(v, "synth.max_organic_retweets");
  s.bot_community_count = as_size(v, "synth.bot_community_count");
  s.bot_community_size = as_size(v, "synth.bot_community_size");
  s.operators_per_community = as_size(v, "synth.operators_per_community");
  s.amplification = as_size(v, "synth.amplification");
  s.leak_probability = as_double(v, "synth.leak_probability");
  s.fake_vocab_skew = as_double(v, "synth.fake_vocab_skew");
  s.genuine_topic_rate = as_double(v, "synth.genuine_topic_rate");
  const auto start = timeutil::parse_iso8601(str("synth.start"));
  if (!start) throw ValidationError("synth.start: expected an ISO-8601 date, got '" + str("synth.start") + "'");
  s.start_time = *start;
  s.days = as_int(v, "synth.days");
  s.fake_onset_day = as_int(v, "synth.fake_onset_day");
  s.seed = str("synth.seed").empty() ? c.seed : as_u64(v, "synth.seed");
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("synth: ") + e.what());
  }
  c.synth_output = str("synth.output");
  return c;
}

json provenance(const PipelineConfig& config, Stage stage) {
  json cfg = json::object();
  for (const auto& section : stage_sections(stage)) {
    json sec = json::object();
    const auto prefix = section + ".";
    for (const auto& [k, v] : config.values) {
      if (k.starts_with(prefix) && !path_keys().contains(k) && !v.empty()) sec[k.substr(prefix.size())] = v;
    }
    cfg[section] = std::move(sec);
  }
  const auto seed = stage == Stage::synth ? config.synth.seed : config.seed;
  return {{"stage", to_string(stage)}, {"seed", seed}, {"config", std::move(cfg)}};
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
  return out.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

json read_manifest(const fs::path& run_dir) {
  const auto p = run_dir / "manifest.json";
  if (!fs::exists(p)) return {{"artifacts", json::object()}};
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw ParseError("manifest.json: " + std::string(e.what()), 0);
  }
}

StageResult run_stage(Stage stage, const PipelineConfig& config) {
  if (stage == Stage::pipeline) {
    StageResult all;
    for (const auto s : {Stage::ingest, Stage::features, Stage::train, Stage::eval}) {
      auto r = run_stage(s, config);
      all.artifacts.insert(all.artifacts.end(), r.artifacts.begin(), r.artifacts.end());
      all.summary = r.summary;
    }
    all.summary = "pipeline: " + all.summary;
    return all;
  }
  Artifacts a{config, stage, {}};
  std::string summary;
  try {
    fs::create_directories(config.run_dir);
    switch (stage) {
      case Stage::ingest: summary = run_ingest(a); break;
      case Stage::trends: summary = run_trends(a); break;
      case Stage::itemsets: summary = run_itemsets(a); break;
      case Stage::graph: summary = run_graph(a); break;
      case Stage::features: summary = run_features(a); break;
      case Stage::train: summary = run_train(a); break;
      case Stage::eval: summary = run_eval(a); break;
      case Stage::analyze: summary = run_analyze(a); break;
      case Stage::extract_entities: summary = run_extract(a); break;
      case Stage::emit_config: summary = run_emit_config(a); break;
      case Stage::synth: summary = run_synth(a); break;
      case Stage::pipeline: break;
    }
    update_manifest(config.run_dir, a.written, stage);
  } catch (const StageError&) {
    throw;
  } catch (const fs::filesystem_error& e) {
    throw StageError(stage, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw StageError(stage, e.what());
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }
  return {summary, a.written};
}

}  // namespace disinfo::pipeline

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "disinfo/corpus.hpp"
#include "disinfo/features.hpp"
#include "disinfo/itemsets.hpp"
#include "disinfo/llmclient.hpp"
#include "disinfo/pipeline.hpp"
#include "disinfo/synth.hpp"
#include "disinfo/timeutil.hpp"
#include "disinfo/trends.hpp"
#include "disinfo/usergraph.hpp"

namespace py = pybind11;
using namespace disinfo;
using nlohmann::json;

namespace {

// Python objects cross the boundary as JSON so that the corpus schema and its
// validation stay in one place.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Corpus corpus_from_py(const py::iterable& tweets) {
  std::vector<Tweet> out;
  for (const auto& t : tweets) out.push_back(tweet_from_json(from_py(t)));
  return Corpus(std::move(out));
}

py::list corpus_to_py(const Corpus& c) {
  py::list out;
  for (const auto& t : c) out.append(to_py(tweet_to_json(t)));
  return out;
}

std::vector<itemsets::Transaction> transactions_from_py(const std::vector<std::vector<std::string>>& raw) {
  std::vector<itemsets::Transaction> tx;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto items = raw[i];
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    tx.push_back({std::to_string(i), std::move(items)});
  }
  return tx;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Disinformation analytics core: corpora, trends, itemsets, user graphs, features and LLM prompts";

  auto base = py::register_exception<Error>(m, "DisinfoError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def(
      "generate_synthetic",
      [](const py::kwargs& kw) {
        synth::SyntheticSpec s;
        for (const auto& [k, v] : kw) {
          const auto key = k.cast<std::string>();
          if (key == "n_genuine") s.n_genuine = v.cast<std::size_t>();
          else if (key == "n_fake") s.n_fake = v.cast<std::size_t>();
          else if (key == "organic_users") s.organic_users = v.cast<std::size_t>();
          else if (key == "organic_groups") s.organic_groups = v.cast<std::size_t>();
          else if (key == "organic_mixing") s.organic_mixing = v.cast<double>();
          else if (key == "max_organic_retweets") s.max_organic_retweets = v.cast<std::size_t>();
          else if (key == "bot_community_count") s.bot_community_count = v.cast<std::size_t>();
          else if (key == "bot_community_size") s.bot_community_size = v.cast<std::size_t>();
          else if (key == "operators_per_community") s.operators_per_community = v.cast<std::size_t>();
          else if (key == "amplification") s.amplification = v.cast<std::size_t>();
          else if (key == "leak_probability") s.leak_probability = v.cast<double>();
          else if (key == "fake_vocab_skew") s.fake_vocab_skew = v.cast<double>();
          else if (key == "genuine_topic_rate") s.genuine_topic_rate = v.cast<double>();
          else if (key == "days") s.days = v.cast<int>();
          else if (key == "fake_onset_day") s.fake_onset_day = v.cast<int>();
          else if (key == "seed") s.seed = v.cast<std::uint64_t>();
          else throw ValidationError("unknown synthetic spec field '" + key + "'");
        }
        return corpus_to_py(synth::generate_synthetic(s));
      },
      "Synthetic planted-amplification corpus as a list of tweet dicts. Keyword arguments override the spec.");
  m.def("is_bot_account", &synth::is_bot_account, py::arg("username"));

  m.def(
      "load_corpus",
      [](const std::string& path, const std::optional<std::string>& format) {
        CorpusFormat f = format_from_path(path);
        if (format) {
          if (*format == "csv") f = CorpusFormat::csv;
          else if (*format == "jsonl") f = CorpusFormat::jsonl;
          else throw ValidationError("format must be jsonl or csv");
        }
        return corpus_to_py(load_corpus(path, f));
      },
      py::arg("path"), py::arg("format") = py::none());
  m.def(
      "save_corpus", [](const py::iterable& tweets, const std::string& path) { save_jsonl(corpus_from_py(tweets), path); },
      py::arg("tweets"), py::arg("path"));

  m.def(
      "thematic_series",
      [](const py::iterable& tweets, const std::vector<std::string>& terms, const std::string& bin) {
        const auto s = trends::count_series(corpus_from_py(tweets), terms, trends::parse_bin_width(bin));
        std::vector<std::pair<std::string, std::uint64_t>> out;
        for (const auto& b : s.bins) out.emplace_back(timeutil::format_iso8601(b.start), b.count);
        return out;
      },
      py::arg("tweets"), py::arg("terms"), py::arg("bin") = "day",
      "(bin start, matching tweet count) pairs; an empty term list counts every tweet.");

  m.def(
      "mine_frequent",
      [](const std::vector<std::vector<std::string>>& transactions, std::uint64_t min_support, std::size_t max_len) {
        std::vector<std::tuple<std::vector<std::string>, std::uint64_t, double>> out;
        for (const auto& f : itemsets::mine_frequent(transactions_from_py(transactions), min_support, max_len)) {
          out.emplace_back(f.items, f.support, f.support_ratio);
        }
        return out;
      },
      py::arg("transactions"), py::arg("min_support"), py::arg("max_len") = 4,
      "(items, support, support ratio) for every frequent itemset.");
  m.def(
      "association_rules",
      [](const std::vector<std::vector<std::string>>& transactions, std::uint64_t min_support, double min_confidence,
         std::size_t max_len) {
        const auto f = itemsets::mine_frequent(transactions_from_py(transactions), min_support, max_len);
        py::list out;
        for (const auto& r : itemsets::derive_rules(f, min_confidence)) {
          py::dict d;
          d["antecedent"] = r.antecedent;
          d["consequent"] = r.consequent;
          d["support"] = r.support_ratio;
          d["confidence"] = r.confidence;
          d["lift"] = r.lift;
          out.append(d);
        }
        return out;
      },
      py::arg("transactions"), py::arg("min_support"), py::arg("min_confidence"), py::arg("max_len") = 4);

  m.def(
      "analyze_users",
      [](const py::iterable& tweets, int walk_steps, bool co_retweet) {
        const auto g = graph::build_user_graph(corpus_from_py(tweets), {.co_retweet = co_retweet});
        const auto part = graph::walktrap(g, walk_steps);
        const auto c = graph::centralities(g, {}, {.tol = 1e-6});
        py::list iso;
        for (const auto& r : graph::isolation_metrics(g, part)) {
          py::dict d;
          d["community"] = r.community;
          d["size"] = r.size;
          d["internal_weight"] = r.internal_weight;
          d["external_weight"] = r.external_weight;
          d["isolation"] = r.isolation;
          iso.append(d);
        }
        py::dict out;
        out["users"] = g.names();
        out["community"] = part.community_of;
        out["modularity"] = part.modularity;
        out["pagerank"] = c.pagerank;
        out["hub"] = c.hub;
        out["authority"] = c.authority;
        out["betweenness"] = c.betweenness;
        out["isolation"] = iso;
        return out;
      },
      py::arg("tweets"), py::arg("walk_steps") = 4, py::arg("co_retweet") = false,
      "User graph of a corpus: walktrap communities, centralities and per-community isolation.");

  m.def(
      "truncated_svd",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> a, std::size_t k, std::uint64_t seed,
         std::size_t oversample, std::size_t power_iters) {
        if (a.ndim() != 2) throw ValidationError("expected a 2-D array");
        linalg::Matrix mat(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
        std::copy(a.data(), a.data() + a.size(), mat.data.begin());
        const auto fit = features::truncated_svd(mat, {.k = k, .seed = seed, .oversample = oversample, .power_iters = power_iters});
        const auto to_array = [](const linalg::Matrix& x) {
          py::array_t<double> out({x.rows, x.cols});
          std::copy(x.data.begin(), x.data.end(), out.mutable_data());
          return out;
        };
        return py::make_tuple(to_array(fit.u), py::array_t<double>(fit.model.sigma.size(), fit.model.sigma.data()),
                              to_array(fit.model.v));
      },
      py::arg("a"), py::arg("k"), py::arg("seed") = 1, py::arg("oversample") = 10, py::arg("power_iters") = 4,
      "Randomized truncated SVD: returns (U, sigma, V) with A ≈ U·diag(sigma)·Vᵀ.");

  m.def("tasks", [] {
    std::vector<std::string> out;
    for (auto t : llm::all_tasks()) out.push_back(llm::to_string(t));
    return out;
  });
  m.def(
      "build_prompt",
      [](const std::string& task, const std::string& text, const std::optional<std::string>& question) {
        return llm::build_prompt(llm::parse_task(task), text, question);
      },
      py::arg("task"), py::arg("text"), py::arg("question") = py::none());
  m.def(
      "parse_entity_sentiments",
      [](const std::string& response) {
        const auto parsed = llm::parse_entity_sentiments(response);
        return py::make_tuple(to_py(llm::records_to_json(parsed.records)), parsed.warnings);
      },
      py::arg("response"), "(records, warnings) from a model response holding a JSON array of entity sentiments.");
  m.def(
      "emit_finetune_config",
      [](const std::map<std::string, std::string>& overrides, bool as_json) {
        llm::FinetuneOverrides o;
        for (const auto& [k, v] : overrides) o.set(k, v);
        const auto c = llm::emit_finetune_config(o);
        return as_json ? llm::finetune_to_json(c).dump(2) : llm::serialize_finetune(c);
      },
      py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("as_json") = false);

  m.def("default_config", [] { return pipeline::default_values(); });
  m.def(
      "run_stage",
      [](const std::string& stage, const std::map<std::string, std::string>& config) {
        const auto s = pipeline::parse_stage(stage);
        if (!s) throw ValidationError("unknown stage '" + stage + "'");
        pipeline::ConfigValues v(config.begin(), config.end());
        const auto r = pipeline::run_stage(*s, pipeline::make_config(v));
        return py::make_tuple(r.summary, r.artifacts);
      },
      py::arg("stage"), py::arg("config"),
      "Runs one CLI stage with flat section.key config values; returns (summary, artifact names).");
  m.def("sha256_hex", [](const py::bytes& b) { return pipeline::sha256_hex(b.cast<std::string>()); });

  (void)base;
}

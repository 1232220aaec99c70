#include "disinfo/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "disinfo/error.hpp"
#include "disinfo/rng.hpp"
#include "disinfo/text.hpp"

namespace disinfo::features {

using nlohmann::json;
using linalg::Matrix;

namespace {
constexpr const char* kUnknown = "<unk>";
}

Vocab::Vocab() : tokens_{kUnknown}, freq_{0} {}

TokenId Vocab::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? 0 : it->second;
}

Vocab Vocab::from_counts(const std::vector<std::pair<std::string, std::uint64_t>>& counts, std::size_t min_freq) {
  Vocab v;
  v.min_freq_ = min_freq;
  for (const auto& [tok, n] : counts) {
    if (tok.empty() || tok == kUnknown) throw ValidationError("invalid vocabulary token: '" + tok + "'");
    const auto id = static_cast<TokenId>(v.tokens_.size());
    if (!v.ids_.emplace(tok, id).second) throw ValidationError("duplicate vocabulary token: " + tok);
    v.tokens_.push_back(tok);
    v.freq_.push_back(n);
  }
  return v;
}

Vocab build_vocab(const Corpus& corpus, std::size_t min_freq, bool include_usernames) {
  if (min_freq < 1) throw ValidationError("min_freq must be at least 1");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& t : corpus) {
    for (auto& tok : text::tokenize(t.text)) ++counts[std::move(tok)];
    if (include_usernames) {
      for (const auto& r : t.retweeters) ++counts["@" + r];
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq) kept.emplace_back(tok, n);
  }
  // counts is lexicographic already, so a stable sort on frequency suffices.
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return Vocab::from_counts(kept, min_freq);
}

json vocab_to_json(const Vocab& v) {
  json tokens = json::array();
  for (TokenId i = 1; i < v.size(); ++i) tokens.push_back(json::array({v.token(i), v.frequency(i)}));
  return {{"min_freq", v.min_freq()}, {"tokens", std::move(tokens)}};
}

Vocab vocab_from_json(const json& j) {
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  for (const auto& e : j.at("tokens")) counts.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::uint64_t>());
  return Vocab::from_counts(counts, j.at("min_freq").get<std::size_t>());
}

Encoded encode(const Tweet& tweet, const Vocab& vocab, std::size_t text_len, std::size_t mixed_len) {
  if (text_len == 0 || mixed_len == 0) throw ValidationError("encoding length must be at least 1");
  Encoded e;
  for (const auto& tok : text::tokenize(tweet.text)) {
    const TokenId id = vocab.id(tok);
    if (e.text_ids.size() < text_len) e.text_ids.push_back(id);
    if (e.mixed_ids.size() < mixed_len) e.mixed_ids.push_back(id);
  }
  for (const auto& r : tweet.retweeters) {
    if (e.mixed_ids.size() >= mixed_len) break;
    e.mixed_ids.push_back(vocab.id("@" + r));
  }
  e.text_ids.resize(text_len, 0);
  e.mixed_ids.resize(mixed_len, 0);
  return e;
}

std::vector<std::string> decode(const std::vector<TokenId>& ids, const Vocab& vocab) {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id != 0) out.push_back(vocab.token(id));
  }
  return out;
}

std::optional<std::uint32_t> TfIdfModel::column(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void TfIdfModel::rebuild_index() {
  if (idf.size() != columns.size()) throw ValidationError("idf length differs from column count");
  index_.clear();
  for (std::uint32_t c = 0; c < columns.size(); ++c) {
    if (!index_.emplace(columns[c], c).second) throw ValidationError("duplicate column: " + columns[c]);
  }
}

namespace {

void normalize_row(SparseRow& row) {
  double s = 0.0;
  for (const auto& [c, x] : row) s += x * x;
  if (s == 0.0) return;
  s = std::sqrt(s);
  for (auto& [c, x] : row) x /= s;
}

SparseRow term_counts(const std::vector<std::uint32_t>& cols) {
  std::map<std::uint32_t, double> tf;
  for (auto c : cols) tf[c] += 1.0;
  return SparseRow(tf.begin(), tf.end());
}

}  // namespace

SparseRow TfIdfModel::transform(const std::vector<std::string>& retweeters) const {
  std::vector<std::uint32_t> cols;
  for (const auto& r : retweeters) {
    if (auto c = column(r)) cols.push_back(*c);
  }
  SparseRow row = term_counts(cols);
  for (auto& [c, x] : row) x *= idf[c];
  normalize_row(row);
  return row;
}

TfIdfFit tfidf(const Corpus& corpus) {
  TfIdfFit fit;
  auto& m = fit.model;
  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<std::vector<std::uint32_t>> docs;
  std::vector<std::uint64_t> df;
  bool any = false;
  for (const auto& t : corpus) {
    std::vector<std::uint32_t> cols;
    for (const auto& r : t.retweeters) {
      const auto [it, inserted] = index.emplace(r, static_cast<std::uint32_t>(m.columns.size()));
      if (inserted) {
        m.columns.push_back(r);
        df.push_back(0);
      }
      cols.push_back(it->second);
    }
    any = any || !cols.empty();
    std::vector<std::uint32_t> uniq = cols;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto c : uniq) ++df[c];
    docs.push_back(std::move(cols));
  }
  if (!any) throw ValidationError("tf-idf needs at least one tweet with retweeters");
  m.documents = corpus.size();
  const double n = static_cast<double>(m.documents);
  for (auto d : df) m.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(d))) + 1.0);
  m.rebuild_index();
  fit.matrix.cols = m.columns.size();
  for (const auto& cols : docs) {
    SparseRow row = term_counts(cols);
    for (auto& [c, x] : row) x *= m.idf[c];
    normalize_row(row);
    fit.matrix.rows.push_back(std::move(row));
  }
  return fit;
}

namespace {

// A·X and Aᵀ·X for the two storage forms.
Matrix times(const Matrix& a, const Matrix& x) { return linalg::multiply(a, x); }
Matrix times_t(const Matrix& a, const Matrix& x) { return linalg::multiply_tn(a, x); }
std::size_t row_count(const Matrix& a) { return a.rows; }
std::size_t col_count(const Matrix& a) { return a.cols; }
bool all_zero(const Matrix& a) {
  return std::all_of(a.data.begin(), a.data.end(), [](double x) { return x == 0.0; });
}

Matrix times(const TfIdfMatrix& a, const Matrix& x) {
  Matrix y(a.rows.size(), x.cols);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    for (const auto& [c, v] : a.rows[i]) {
      for (std::size_t j = 0; j < x.cols; ++j) y(i, j) += v * x(c, j);
    }
  }
  return y;
}
Matrix times_t(const TfIdfMatrix& a, const Matrix& x) {
  Matrix y(a.cols, x.cols);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    for (const auto& [c, v] : a.rows[i]) {
      for (std::size_t j = 0; j < x.cols; ++j) y(c, j) += v * x(i, j);
    }
  }
  return y;
}
std::size_t row_count(const TfIdfMatrix& a) { return a.rows.size(); }
std::size_t col_count(const TfIdfMatrix& a) { return a.cols; }
bool all_zero(const TfIdfMatrix& a) {
  for (const auto& row : a.rows) {
    for (const auto& [c, v] : row) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

template <typename A>
SvdFit randomized_svd(const A& a, const SvdOptions& o) {
  const std::size_t m = row_count(a);
  const std::size_t n = col_count(a);
  if (o.k < 1 || o.k > std::min(m, n)) {
    throw ValidationError("svd rank k=" + std::to_string(o.k) + " outside [1, " + std::to_string(std::min(m, n)) + "]");
  }
  if (all_zero(a)) throw ValidationError("svd of an all-zero matrix");
  const std::size_t l = std::min(o.k + o.oversample, std::min(m, n));

  Rng rng(o.seed);
  Matrix omega(n, l);
  for (auto& x : omega.data) x = rng.normal();
  Matrix q = linalg::orthonormal_basis(times(a, omega));
  for (std::size_t it = 0; it < o.power_iters; ++it) {
    const Matrix z = linalg::orthonormal_basis(times_t(a, q));
    q = linalg::orthonormal_basis(times(a, z));
  }
  // Bᵀ = Aᵀ·Q is n × l; its SVD Bᵀ = V·Σ·Wᵀ gives A ≈ (Q·W)·Σ·Vᵀ.
  const Matrix bt = times_t(a, q);
  const linalg::Svd small = linalg::jacobi_svd(bt);
  const Matrix qw = linalg::multiply(q, small.v);

  SvdFit fit;
  fit.model.k = o.k;
  fit.model.sigma.assign(small.sigma.begin(), small.sigma.begin() + static_cast<std::ptrdiff_t>(o.k));
  fit.model.v = Matrix(n, o.k);
  fit.u = Matrix(m, o.k);
  for (std::size_t c = 0; c < o.k; ++c) {
    for (std::size_t i = 0; i < n; ++i) fit.model.v(i, c) = small.u(i, c);
    for (std::size_t i = 0; i < m; ++i) fit.u(i, c) = qw(i, c);
  }
  return fit;
}

}  // namespace

SvdFit truncated_svd(const TfIdfMatrix& a, const SvdOptions& options) { return randomized_svd(a, options); }
SvdFit truncated_svd(const Matrix& a, const SvdOptions& options) { return randomized_svd(a, options); }

std::vector<double> project(const SvdModel& model, const SparseRow& row) {
  std::vector<double> out(model.k, 0.0);
  for (const auto& [c, x] : row) {
    if (c >= model.v.rows) continue;
    for (std::size_t j = 0; j < model.k; ++j) out[j] += x * model.v(c, j);
  }
  return out;
}

RetweeterModel fit_retweeter_model(const Corpus& corpus, const SvdOptions& options) {
  auto fit = tfidf(corpus);
  RetweeterModel m;
  m.svd = truncated_svd(fit.matrix, options).model;
  m.tfidf = std::move(fit.model);
  return m;
}

namespace {
constexpr int kFormatVersion = 1;

void check_header(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw ParseError(std::string("not a ") + format + " document", 0);
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw ParseError(std::string("unsupported ") + format + " version " + j.value("version", json()).dump(), 0);
  }
}
}  // namespace

json retweeter_model_to_json(const RetweeterModel& m) {
  json components = json::array();
  for (std::size_t i = 0; i < m.svd.v.rows; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.svd.k; ++j) row.push_back(m.svd.v(i, j));
    components.push_back(std::move(row));
  }
  return {{"format", "disinfo-retweeter-svd"},
          {"version", kFormatVersion},
          {"k", m.svd.k},
          {"documents", m.tfidf.documents},
          {"sigma", m.svd.sigma},
          {"columns", m.tfidf.columns},
          {"idf", m.tfidf.idf},
          {"components", std::move(components)}};
}

RetweeterModel retweeter_model_from_json(const json& j) {
  check_header(j, "disinfo-retweeter-svd");
  RetweeterModel m;
  m.tfidf.columns = j.at("columns").get<std::vector<std::string>>();
  m.tfidf.idf = j.at("idf").get<std::vector<double>>();
  m.tfidf.documents = j.at("documents").get<std::size_t>();
  m.tfidf.rebuild_index();
  m.svd.k = j.at("k").get<std::size_t>();
  m.svd.sigma = j.at("sigma").get<std::vector<double>>();
  const auto& comp = j.at("components");
  if (m.svd.sigma.size() != m.svd.k || comp.size() != m.tfidf.columns.size()) {
    throw ParseError("svd model dimensions are inconsistent", 0);
  }
  m.svd.v = Matrix(comp.size(), m.svd.k);
  for (std::size_t i = 0; i < comp.size(); ++i) {
    if (comp[i].size() != m.svd.k) throw ParseError("svd component row has wrong length", 0);
    for (std::size_t c = 0; c < m.svd.k; ++c) m.svd.v(i, c) = comp[i][c].get<double>();
  }
  return m;
}

FeatureBundle FeatureModel::bundle(const Tweet& t) const {
  auto e = encode(t, vocab, config.text_len, config.mixed_len);
  FeatureBundle b;
  b.text_ids = std::move(e.text_ids);
  b.mixed_ids = std::move(e.mixed_ids);
  b.svd_vec = retweeters.features(t.retweeters);
  b.label = t.label;
  b.tweet_id = t.id;
  return b;
}

FeatureModel fit_features(const Corpus& train, const FeatureConfig& config) {
  FeatureModel m;
  m.config = config;
  m.vocab = build_vocab(train, config.min_freq, true);
  const auto fit = tfidf(train);
  // Small corpora cannot support the configured rank; use what they allow.
  m.config.svd.k = std::min(config.svd.k, std::min(fit.matrix.rows.size(), fit.matrix.cols));
  m.retweeters.svd = truncated_svd(fit.matrix, m.config.svd).model;
  m.retweeters.tfidf = fit.model;
  return m;
}

json feature_model_to_json(const FeatureModel& m) {
  const auto& c = m.config;
  return {{"format", "disinfo-features"},
          {"version", kFormatVersion},
          {"config",
           {{"min_freq", c.min_freq},
            {"text_len", c.text_len},
            {"mixed_len", c.mixed_len},
            {"svd_k", c.svd.k},
            {"svd_seed", c.svd.seed},
            {"svd_oversample", c.svd.oversample},
            {"svd_power_iters", c.svd.power_iters}}},
          {"vocab", vocab_to_json(m.vocab)},
          {"retweeters", retweeter_model_to_json(m.retweeters)}};
}

FeatureModel feature_model_from_json(const json& j) {
  check_header(j, "disinfo-features");
  FeatureModel m;
  const auto& c = j.at("config");
  m.config.min_freq = c.at("min_freq").get<std::size_t>();
  m.config.text_len = c.at("text_len").get<std::size_t>();
  m.config.mixed_len = c.at("mixed_len").get<std::size_t>();
  m.config.svd.k = c.at("svd_k").get<std::size_t>();
  m.config.svd.seed = c.at("svd_seed").get<std::uint64_t>();
  m.config.svd.oversample = c.at("svd_oversample").get<std::size_t>();
  m.config.svd.power_iters = c.at("svd_power_iters").get<std::size_t>();
  m.vocab = vocab_from_json(j.at("vocab"));
  m.retweeters = retweeter_model_from_json(j.at("retweeters"));
  return m;
}

json bundle_to_json(const FeatureBundle& b) {
  json j = {{"id", b.tweet_id}, {"text_ids", b.text_ids}, {"mixed_ids", b.mixed_ids}, {"svd", b.svd_vec}};
  if (!b.sentiment_vec.empty()) j["sentiment"] = b.sentiment_vec;
  if (!b.text_vec.empty()) j["text_vec"] = b.text_vec;
  j["label"] = b.label ? json(static_cast<int>(*b.label)) : json(nullptr);
  return j;
}

FeatureBundle bundle_from_json(const json& j) {
  FeatureBundle b;
  b.tweet_id = j.value("id", "");
  b.text_ids = j.at("text_ids").get<std::vector<TokenId>>();
  b.mixed_ids = j.at("mixed_ids").get<std::vector<TokenId>>();
  b.svd_vec = j.at("svd").get<std::vector<double>>();
  if (j.contains("sentiment")) b.sentiment_vec = j.at("sentiment").get<std::vector<double>>();
  if (j.contains("text_vec")) b.text_vec = j.at("text_vec").get<std::vector<double>>();
  if (j.contains("label") && !j.at("label").is_null()) {
    const int l = j.at("label").get<int>();
    if (l != 0 && l != 1) throw ParseError("label must be 0 or 1", 0);
    b.label = static_cast<Label>(l);
  }
  return b;
}

}  // namespace disinfo::features

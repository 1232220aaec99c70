#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "disinfo/corpus.hpp"
#include "disinfo/linalg.hpp"

namespace disinfo::features {

using TokenId = std::uint32_t;

// Token → id map. Id 0 is reserved for unknown and padding. Usernames are
// stored with an "@" prefix so they never collide with words.
class Vocab {
 public:
  Vocab();

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId id(const std::string& token) const;  // 0 when absent
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  bool is_username(TokenId id) const { return id < tokens_.size() && tokens_[id].starts_with('@'); }
  std::uint64_t frequency(TokenId id) const { return freq_.at(id); }
  std::size_t min_freq() const noexcept { return min_freq_; }

  // Ids follow the order of `counts` (caller sorts); used by build_vocab and
  // deserialization.
  static Vocab from_counts(const std::vector<std::pair<std::string, std::uint64_t>>& counts, std::size_t min_freq);

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_ && a.freq_ == b.freq_ && a.min_freq_ == b.min_freq_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> freq_;
  std::unordered_map<std::string, TokenId> ids_;
  std::size_t min_freq_ = 1;
};

// Ids by descending frequency, ties lexicographic. Words come from the same
// tokenizer as the itemsets module (no stopword removal); retweeter names are
// added as "@name" when include_usernames is set.
Vocab build_vocab(const Corpus& corpus, std::size_t min_freq, bool include_usernames);

nlohmann::json vocab_to_json(const Vocab& v);
Vocab vocab_from_json(const nlohmann::json& j);

struct Encoded {
  std::vector<TokenId> text_ids;   // words only
  std::vector<TokenId> mixed_ids;  // words, then "@" retweeters
};

// Truncate or pad with 0 to the given lengths. Throws ValidationError when a
// length is 0.
Encoded encode(const Tweet& tweet, const Vocab& vocab, std::size_t text_len, std::size_t mixed_len);
inline Encoded encode(const Tweet& tweet, const Vocab& vocab, std::size_t max_len) {
  return encode(tweet, vocab, max_len, max_len);
}

// Tokens of the nonzero ids, in order.
std::vector<std::string> decode(const std::vector<TokenId>& ids, const Vocab& vocab);

using SparseRow = std::vector<std::pair<std::uint32_t, double>>;  // sorted by column

struct TfIdfModel {
  std::vector<std::string> columns;  // retweeter names, first-appearance order
  std::vector<double> idf;
  std::size_t documents = 0;

  std::optional<std::uint32_t> column(const std::string& name) const;
  // Unknown names are dropped; the row is L2-normalized when nonzero.
  SparseRow transform(const std::vector<std::string>& retweeters) const;

  void rebuild_index();

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct TfIdfMatrix {
  std::size_t cols = 0;
  std::vector<SparseRow> rows;
};

struct TfIdfFit {
  TfIdfModel model;
  TfIdfMatrix matrix;
};

// tf = occurrences in the retweeter list, idf = ln((1+N)/(1+df)) + 1, rows
// L2-normalized. Throws ValidationError when every retweeter list is empty.
TfIdfFit tfidf(const Corpus& corpus);

struct SvdOptions {
  std::size_t k = 64;
  std::uint64_t seed = 1;
  std::size_t oversample = 10;
  std::size_t power_iters = 4;
};

struct SvdModel {
  std::size_t k = 0;
  std::vector<double> sigma;  // non-increasing
  linalg::Matrix v;           // cols × k, orthonormal columns
};

struct SvdFit {
  SvdModel model;
  linalg::Matrix u;  // rows × k
};

// Randomized range finder with power iterations, then an exact SVD of the
// small projected matrix. Throws ValidationError for k outside
// [1, min(rows, cols)] or an all-zero matrix.
SvdFit truncated_svd(const TfIdfMatrix& a, const SvdOptions& options);
SvdFit truncated_svd(const linalg::Matrix& a, const SvdOptions& options);

// row·V.
std::vector<double> project(const SvdModel& model, const SparseRow& row);

// TF-IDF weighting plus SVD basis: everything needed to turn a retweeter
// list into the k-dimensional view.
struct RetweeterModel {
  TfIdfModel tfidf;
  SvdModel svd;

  std::vector<double> features(const std::vector<std::string>& retweeters) const {
    return project(svd, tfidf.transform(retweeters));
  }
};

RetweeterModel fit_retweeter_model(const Corpus& corpus, const SvdOptions& options);

// Versioned JSON document holding k, σ, V and the column registry with idf.
nlohmann::json retweeter_model_to_json(const RetweeterModel& m);
RetweeterModel retweeter_model_from_json(const nlohmann::json& j);

struct FeatureConfig {
  std::size_t min_freq = 2;
  std::size_t text_len = 48;
  std::size_t mixed_len = 96;
  SvdOptions svd;
};

// Inputs for one tweet, as consumed by the classifier.
struct FeatureBundle {
  std::vector<TokenId> text_ids;
  std::vector<TokenId> mixed_ids;
  std::vector<double> svd_vec;
  std::vector<double> sentiment_vec;  // empty when unused
  std::vector<double> text_vec;       // external text embedding, empty when unused
  std::optional<Label> label;
  std::string tweet_id;
};

// Fitted state for turning tweets into bundles.
struct FeatureModel {
  FeatureConfig config;
  Vocab vocab;
  RetweeterModel retweeters;

  FeatureBundle bundle(const Tweet& t) const;
};

FeatureModel fit_features(const Corpus& train, const FeatureConfig& config);

nlohmann::json feature_model_to_json(const FeatureModel& m);
FeatureModel feature_model_from_json(const nlohmann::json& j);

nlohmann::json bundle_to_json(const FeatureBundle& b);
FeatureBundle bundle_from_json(const nlohmann::json& j);

}  // namespace disinfo::features

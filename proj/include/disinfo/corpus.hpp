#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace disinfo {

enum class Label : int { genuine = 0, fake = 1 };

struct Tweet {
  std::string id;
  std::string text;
  std::string author;
  std::vector<std::string> retweeters;
  std::vector<std::string> hashtags;  // lowercase
  std::int64_t timestamp = 0;         // epoch seconds, UTC
  std::optional<Label> label;

  bool operator==(const Tweet&) const = default;
};

// Ordered collection of tweets with unique ids. Immutable once built.
class Corpus {
 public:
  Corpus() = default;
  // Throws ValidationError on a duplicate id, empty id, empty retweeter name
  // or negative timestamp.
  explicit Corpus(std::vector<Tweet> tweets);

  const std::vector<Tweet>& tweets() const noexcept { return tweets_; }
  std::size_t size() const noexcept { return tweets_.size(); }
  bool empty() const noexcept { return tweets_.empty(); }
  const Tweet& operator[](std::size_t i) const { return tweets_[i]; }
  auto begin() const noexcept { return tweets_.begin(); }
  auto end() const noexcept { return tweets_.end(); }

  const Tweet* find(const std::string& id) const;

  bool operator==(const Corpus& other) const { return tweets_ == other.tweets_; }

 private:
  std::vector<Tweet> tweets_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class CorpusFormat { jsonl, csv };

// Picks the format from the file extension (".csv" or anything else -> jsonl).
CorpusFormat format_from_path(const std::filesystem::path& path);

// Maps Tweet field names (id, text, author, retweeters, hashtags, timestamp,
// label) to the CSV header names actually present. Unmapped fields use their
// own name.
using ColumnMap = std::map<std::string, std::string>;

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const ColumnMap& columns = {});
Corpus parse_jsonl(const std::string& content);
Corpus parse_csv(const std::string& content, const ColumnMap& columns = {});

nlohmann::json tweet_to_json(const Tweet& t);
Tweet tweet_from_json(const nlohmann::json& j);

// One JSON object per line. A non-null meta object is written first as
// {"_meta": ...}; loaders skip such lines.
std::string serialize_jsonl(const Corpus& corpus, const nlohmann::json& meta = nullptr);
void save_jsonl(const Corpus& corpus, const std::filesystem::path& path,
                const nlohmann::json& meta = nullptr);

struct DateRange {
  std::int64_t start = 0;
  std::int64_t end = 0;  // inclusive
};

struct CorpusFilter {
  std::size_t min_retweets = 0;
  std::optional<DateRange> date_range;
  std::vector<std::string> required_terms;
};

// Keeps tweets with at least min_retweets retweeters, timestamp inside the
// range and every required term present as a whole word. Order preserved.
Corpus apply_filter(const Corpus& corpus, const CorpusFilter& filter);

enum class RuleKind { by_tweet_id, by_author, by_hashtag };

struct LabelRule {
  RuleKind kind;
  std::string value;
  Label label;
};

// Last matching rule wins. Hashtag and author matches are case-insensitive.
Corpus apply_labels(const Corpus& corpus, std::span<const LabelRule> rules);

// Reads rules from lines "<kind> <value> <label>" where kind is one of
// tweet_id, author, hashtag. Blank lines and '#' comments are skipped.
std::vector<LabelRule> parse_label_rules(const std::string& content);

struct Split {
  Corpus train;
  Corpus valid;
};

// Stratified by label, deterministic for a given seed. |valid| is
// round(valid_fraction * N). Both parts keep corpus order.
Split split(const Corpus& corpus, double valid_fraction, std::uint64_t seed);

}  // namespace disinfo

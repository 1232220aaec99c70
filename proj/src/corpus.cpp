#include "disinfo/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "disinfo/error.hpp"
#include "disinfo/rng.hpp"
#include "disinfo/text.hpp"
#include "disinfo/timeutil.hpp"

namespace disinfo {

using nlohmann::json;

Corpus::Corpus(std::vector<Tweet> tweets) : tweets_(std::move(tweets)) {
  index_.reserve(tweets_.size());
  for (std::size_t i = 0; i < tweets_.size(); ++i) {
    const Tweet& t = tweets_[i];
    if (t.id.empty()) throw ValidationError("tweet at position " + std::to_string(i) + " has empty id");
    if (t.timestamp < 0) throw ValidationError("tweet " + t.id + " has negative timestamp");
    for (const auto& r : t.retweeters) {
      if (r.empty()) throw ValidationError("tweet " + t.id + " has an empty retweeter name");
    }
    if (!index_.emplace(t.id, i).second) throw ValidationError("duplicate tweet id: " + t.id);
  }
}

const Tweet* Corpus::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &tweets_[it->second];
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lowercase_all(std::vector<std::string> v) {
  for (auto& s : v) s = text::to_lower(s);
  return v;
}

std::optional<Label> label_from_int(long long v, std::size_t line) {
  if (v == 0) return Label::genuine;
  if (v == 1) return Label::fake;
  throw ParseError("label must be 0 or 1, got " + std::to_string(v), line);
}

// RFC 4180 records; each record carries the 1-based line where it starts.
struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line;
};

std::vector<CsvRecord> parse_csv_records(const std::string& s) {
  std::vector<CsvRecord> records;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < s.size()) {
    CsvRecord rec{{}, line};
    std::string field;
    bool in_quotes = false;
    bool end_of_record = false;
    while (i < s.size() && !end_of_record) {
      const char c = s[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < s.size() && s[i + 1] == '"') {
            field.push_back('"');
            i += 2;
            continue;
          }
          in_quotes = false;
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        ++i;
        continue;
      }
      switch (c) {
        case '"':
          if (!field.empty()) throw ParseError("unexpected quote inside unquoted field", line);
          in_quotes = true;
          break;
        case ',':
          rec.fields.push_back(std::move(field));
          field.clear();
          break;
        case '\r':
          break;
        case '\n':
          ++line;
          end_of_record = true;
          break;
        default:
          field.push_back(c);
      }
      ++i;
    }
    if (in_quotes) throw ParseError("unterminated quoted field", rec.line);
    rec.fields.push_back(std::move(field));
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // blank line
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ';')) {
    auto t = text::trim(cur);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

json tweet_to_json(const Tweet& t) {
  json j;
  j["id"] = t.id;
  j["text"] = t.text;
  j["author"] = t.author;
  j["retweeters"] = t.retweeters;
  j["hashtags"] = t.hashtags;
  j["timestamp"] = t.timestamp;
  j["label"] = t.label ? json(static_cast<int>(*t.label)) : json(nullptr);
  return j;
}

Tweet tweet_from_json(const json& j) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  Tweet t;
  if (!j.contains("id") || !j.contains("text")) throw Error("record lacks id or text");
  const auto& id = j.at("id");
  t.id = id.is_string() ? id.get<std::string>() : id.dump();
  t.text = j.at("text").get<std::string>();
  if (auto it = j.find("author"); it != j.end() && !it->is_null()) t.author = it->get<std::string>();
  if (auto it = j.find("retweeters"); it != j.end() && !it->is_null()) {
    t.retweeters = it->get<std::vector<std::string>>();
  }
  if (auto it = j.find("hashtags"); it != j.end() && !it->is_null()) {
    t.hashtags = lowercase_all(it->get<std::vector<std::string>>());
  }
  if (auto it = j.find("timestamp"); it != j.end() && !it->is_null()) {
    t.timestamp = it->get<std::int64_t>();
  }
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    t.label = label_from_int(it->get<long long>(), 0);
  }
  return t;
}

Corpus parse_jsonl(const std::string& content) {
  std::vector<Tweet> tweets;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (j.is_object() && j.contains("_meta")) continue;
    try {
      tweets.push_back(tweet_from_json(j));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const std::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), lineno);
    }
  }
  return Corpus(std::move(tweets));
}

Corpus parse_csv(const std::string& content, const ColumnMap& columns) {
  const auto records = parse_csv_records(content);
  if (records.empty()) return Corpus{};
  const auto& header = records.front().fields;
  const auto column_of = [&](const std::string& field) -> std::optional<std::size_t> {
    const auto m = columns.find(field);
    const std::string& name = m == columns.end() ? field : m->second;
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = column_of("id");
  const auto text_col = column_of("text");
  if (!id_col || !text_col) throw ParseError("CSV header lacks id or text column", records.front().line);
  const auto author_col = column_of("author");
  const auto rt_col = column_of("retweeters");
  const auto tag_col = column_of("hashtags");
  const auto ts_col = column_of("timestamp");
  const auto label_col = column_of("label");

  std::vector<Tweet> tweets;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const auto get = [&](std::optional<std::size_t> col) -> std::string {
      if (!col) return {};
      if (*col >= rec.fields.size()) throw ParseError("record has too few fields", rec.line);
      return rec.fields[*col];
    };
    Tweet t;
    t.id = get(id_col);
    t.text = get(text_col);
    if (t.id.empty()) throw ParseError("record has empty id", rec.line);
    t.author = get(author_col);
    t.retweeters = split_list(get(rt_col));
    t.hashtags = lowercase_all(split_list(get(tag_col)));
    const std::string ts = text::trim(get(ts_col));
    if (!ts.empty()) {
      try {
        std::size_t used = 0;
        t.timestamp = std::stoll(ts, &used);
        if (used != ts.size()) throw std::invalid_argument(ts);
      } catch (const std::exception&) {
        const auto parsed = timeutil::parse_iso8601(ts);
        if (!parsed) throw ParseError("bad timestamp '" + ts + "'", rec.line);
        t.timestamp = *parsed;
      }
    }
    const std::string lab = text::trim(get(label_col));
    if (lab == "0" || lab == "1") {
      t.label = lab == "1" ? Label::fake : Label::genuine;
    } else if (!lab.empty()) {
      throw ParseError("label must be 0 or 1, got '" + lab + "'", rec.line);
    }
    tweets.push_back(std::move(t));
  }
  return Corpus(std::move(tweets));
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const ColumnMap& columns) {
  const std::string content = read_file(path);
  return format == CorpusFormat::csv ? parse_csv(content, columns) : parse_jsonl(content);
}

std::string serialize_jsonl(const Corpus& corpus, const json& meta) {
  std::string out;
  if (!meta.is_null()) out += json{{"_meta", meta}}.dump() + "\n";
  for (const auto& t : corpus) out += tweet_to_json(t).dump() + "\n";
  return out;
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path, const json& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_jsonl(corpus, meta);
}

Corpus apply_filter(const Corpus& corpus, const CorpusFilter& filter) {
  if (filter.date_range && filter.date_range->start > filter.date_range->end) {
    throw ValidationError("date range start is after end");
  }
  std::vector<Tweet> kept;
  for (const auto& t : corpus) {
    if (t.retweeters.size() < filter.min_retweets) continue;
    if (filter.date_range &&
        (t.timestamp < filter.date_range->start || t.timestamp > filter.date_range->end)) {
      continue;
    }
    if (!filter.required_terms.empty() && !text::contains_all_words(t.text, filter.required_terms)) {
      continue;
    }
    kept.push_back(t);
  }
  return Corpus(std::move(kept));
}

Corpus apply_labels(const Corpus& corpus, std::span<const LabelRule> rules) {
  for (const auto& r : rules) {
    if (r.value.empty()) throw ValidationError("label rule with empty value");
  }
  std::vector<Tweet> out(corpus.begin(), corpus.end());
  for (auto& t : out) {
    const std::string author = text::to_lower(t.author);
    for (const auto& r : rules) {
      bool hit = false;
      switch (r.kind) {
        case RuleKind::by_tweet_id:
          hit = t.id == r.value;
          break;
        case RuleKind::by_author:
          hit = author == text::to_lower(r.value);
          break;
        case RuleKind::by_hashtag: {
          std::string tag = text::to_lower(r.value);
          if (!tag.empty() && tag.front() == '#') tag.erase(0, 1);
          hit = std::find(t.hashtags.begin(), t.hashtags.end(), tag) != t.hashtags.end();
          break;
        }
      }
      if (hit) t.label = r.label;
    }
  }
  return Corpus(std::move(out));
}

std::vector<LabelRule> parse_label_rules(const std::string& content) {
  std::vector<LabelRule> rules;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls(t);
    std::string kind, value, label;
    if (!(ls >> kind >> value >> label)) throw ParseError("expected '<kind> <value> <label>'", lineno);
    LabelRule rule;
    if (kind == "tweet_id" || kind == "id") {
      rule.kind = RuleKind::by_tweet_id;
    } else if (kind == "author") {
      rule.kind = RuleKind::by_author;
    } else if (kind == "hashtag") {
      rule.kind = RuleKind::by_hashtag;
    } else {
      throw ParseError("unknown rule kind '" + kind + "'", lineno);
    }
    if (label != "0" && label != "1") throw ParseError("label must be 0 or 1", lineno);
    rule.value = value;
    rule.label = label == "1" ? Label::fake : Label::genuine;
    rules.push_back(std::move(rule));
  }
  return rules;
}

Split split(const Corpus& corpus, double valid_fraction, std::uint64_t seed) {
  if (!(valid_fraction >= 0.0 && valid_fraction <= 1.0)) {
    throw ValidationError("valid_fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& t = corpus[i];
    if (!t.label) throw ValidationError("cannot split: tweet " + t.id + " is unlabeled");
    by_class[static_cast<int>(*t.label)].push_back(i);
  }
  const auto total = static_cast<std::size_t>(std::llround(valid_fraction * corpus.size()));

  // Largest-remainder allocation keeps each class within one tweet of its
  // exact share.
  std::size_t quota[2];
  double remainder[2];
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = valid_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += quota[c];
  }
  while (assigned < total) {
    const int c = (remainder[1] > remainder[0] && quota[1] < by_class[1].size()) ||
                          quota[0] >= by_class[0].size()
                      ? 1
                      : 0;
    ++quota[c];
    remainder[c] = -1.0;
    ++assigned;
  }

  Rng rng(seed);
  std::vector<char> in_valid(corpus.size(), 0);
  for (int c = 0; c < 2; ++c) {
    auto members = by_class[c];
    rng.shuffle(members);
    for (std::size_t k = 0; k < quota[c]; ++k) in_valid[members[k]] = 1;
  }
  std::vector<Tweet> train, valid;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (in_valid[i] ? valid : train).push_back(corpus[i]);
  }
  return {Corpus(std::move(train)), Corpus(std::move(valid))};
}

}  // namespace disinfo

#include <doctest.h>

#include <algorithm>
#include <set>

#include "disinfo/corpus.hpp"
#include "disinfo/error.hpp"
#include "test_support.hpp"

using namespace disinfo;
using disinfo::testing::random_tweets;
using disinfo::testing::TempDir;
using disinfo::testing::write_file;

namespace {

Tweet make(std::string id, std::string text, std::string author = "a",
           std::vector<std::string> rts = {}, std::vector<std::string> tags = {},
           std::int64_t ts = 0, std::optional<Label> label = std::nullopt) {
  return Tweet{std::move(id), std::move(text), std::move(author), std::move(rts), std::move(tags), ts, label};
}

std::set<std::string> ids(const Corpus& c) {
  std::set<std::string> s;
  for (const auto& t : c) s.insert(t.id);
  return s;
}

Corpus labeled_corpus(std::size_t n_genuine, std::size_t n_fake) {
  std::vector<Tweet> v;
  for (std::size_t i = 0; i < n_genuine + n_fake; ++i) {
    v.push_back(make("t" + std::to_string(i), "x", "a", {}, {}, 0,
                     i < n_genuine ? Label::genuine : Label::fake));
  }
  return Corpus(std::move(v));
}

}  // namespace

TEST_CASE("load_corpus: empty file gives empty corpus") {
  TempDir dir("corpus");
  write_file(dir.path() / "empty.jsonl", "");
  write_file(dir.path() / "empty.csv", "");
  CHECK(load_corpus(dir.path() / "empty.jsonl", CorpusFormat::jsonl).empty());
  CHECK(load_corpus(dir.path() / "empty.csv", CorpusFormat::csv).empty());
}

TEST_CASE("load_corpus: duplicate id is rejected and named") {
  const std::string content =
      "{\"id\":\"t1\",\"text\":\"a\"}\n{\"id\":\"t2\",\"text\":\"b\"}\n{\"id\":\"t1\",\"text\":\"c\"}\n";
  try {
    parse_jsonl(content);
    FAIL("expected duplicate-id error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("t1") != std::string::npos);
  }
}

TEST_CASE("load_corpus: malformed record reports its line") {
  const std::string content = "{\"id\":\"t1\",\"text\":\"a\"}\n\n{\"id\":\"t2\"}\n";
  try {
    parse_jsonl(content);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_jsonl("{not json}\n"), ParseError);
  CHECK_THROWS_AS(parse_jsonl("{\"id\":\"t\",\"text\":\"x\",\"label\":2}\n"), ParseError);
  CHECK_THROWS_AS(load_corpus("/nonexistent/file.jsonl", CorpusFormat::jsonl), IoError);
}

TEST_CASE("load_corpus: optional fields default to empty") {
  const auto c = parse_jsonl("{\"id\":\"t1\",\"text\":\"hello\"}\n");
  REQUIRE(c.size() == 1);
  CHECK(c[0].author.empty());
  CHECK(c[0].retweeters.empty());
  CHECK(c[0].timestamp == 0);
  CHECK_FALSE(c[0].label.has_value());
}

TEST_CASE("load_corpus: 1000-record round trip equals the generator's records") {
  const auto generated = random_tweets(1000, 7);
  const Corpus original(generated);
  TempDir dir("corpus");
  save_jsonl(original, dir.path() / "c.jsonl", {{"stage", "test"}});
  const auto loaded = load_corpus(dir.path() / "c.jsonl", CorpusFormat::jsonl);
  REQUIRE(loaded.size() == 1000);
  for (std::size_t i = 0; i < generated.size(); ++i) {
    CHECK(loaded[i].id == generated[i].id);
    CHECK(loaded[i].text == generated[i].text);
    CHECK(loaded[i].author == generated[i].author);
    CHECK(loaded[i].retweeters == generated[i].retweeters);
    CHECK(loaded[i].hashtags == generated[i].hashtags);
    CHECK(loaded[i].timestamp == generated[i].timestamp);
    CHECK(loaded[i].label == generated[i].label);
  }
}

TEST_CASE("csv: quoted fields, list columns and column map") {
  const std::string csv =
      "tweet_id,body,user,rts,tags,created,label\n"
      "1,\"hello, \"\"world\"\"\nsecond line\",alice,bob;carol,UA;War,1645660800,1\n"
      "2,plain,dave,,,2022-02-25,\n";
  const ColumnMap map{{"id", "tweet_id"},   {"text", "body"},       {"author", "user"},
                      {"retweeters", "rts"}, {"hashtags", "tags"}, {"timestamp", "created"}};
  const auto c = parse_csv(csv, map);
  REQUIRE(c.size() == 2);
  CHECK(c[0].text == "hello, \"world\"\nsecond line");
  CHECK(c[0].retweeters == std::vector<std::string>{"bob", "carol"});
  CHECK(c[0].hashtags == std::vector<std::string>{"ua", "war"});
  CHECK(c[0].label == Label::fake);
  CHECK(c[1].timestamp == 1645747200);
  CHECK_FALSE(c[1].label);
  try {
    parse_csv("id,text,timestamp\n1,a,0\n2,b,notatime\n");
    FAIL("expected error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("apply_filter") {
  const Corpus c({make("a", "ukraine news", "x", {}, {}, 10), make("b", "ukraine nazi claims", "x", {"u1", "u2", "u3", "u4", "u5"}, {}, 20),
                  make("c", "nazi", "x", std::vector<std::string>(12, "u"), {}, 30)});
  SUBCASE("min_retweets 0 and no range is identity") { CHECK(apply_filter(c, {}) == c); }
  SUBCASE("retweet threshold keeps counts 5 and 12") {
    CHECK(ids(apply_filter(c, {.min_retweets = 5})) == std::set<std::string>{"b", "c"});
  }
  SUBCASE("required terms are conjunctive") {
    CHECK(ids(apply_filter(c, {.required_terms = {"ukraine", "nazi"}})) == std::set<std::string>{"b"});
  }
  SUBCASE("date range is inclusive") {
    CHECK(ids(apply_filter(c, {.date_range = DateRange{20, 30}})) == std::set<std::string>{"b", "c"});
    CHECK_THROWS_AS(apply_filter(c, {.date_range = DateRange{30, 20}}), ValidationError);
  }
  SUBCASE("monotone in min_retweets") {
    const Corpus big(random_tweets(300, 3));
    std::size_t prev = big.size();
    for (std::size_t m = 0; m < 7; ++m) {
      const auto f = apply_filter(big, {.min_retweets = m});
      CHECK(f.size() <= prev);
      prev = f.size();
    }
  }
}

TEST_CASE("apply_labels") {
  const Corpus c({make("t1", "x", "X", {}, {"bioweapon"}), make("t2", "y", "Y", {}, {"bioweapon", "ua"}),
                  make("t3", "z", "X"), make("t4", "w", "Z", {}, {}, 0, Label::genuine)});
  SUBCASE("empty rule list leaves corpus unchanged") { CHECK(apply_labels(c, {}) == c); }
  SUBCASE("hashtag rule labels exactly the tagged tweets") {
    const std::vector<LabelRule> rules{{RuleKind::by_hashtag, "#BioWeapon", Label::fake}};
    const auto out = apply_labels(c, rules);
    CHECK(out[0].label == Label::fake);
    CHECK(out[1].label == Label::fake);
    CHECK_FALSE(out[2].label);
    CHECK(out[3].label == Label::genuine);
  }
  SUBCASE("last matching rule wins") {
    const std::vector<LabelRule> rules{{RuleKind::by_author, "X", Label::fake},
                                       {RuleKind::by_tweet_id, "t1", Label::genuine}};
    const auto out = apply_labels(c, rules);
    CHECK(out[0].label == Label::genuine);
    CHECK(out[2].label == Label::fake);
    CHECK(apply_labels(out, rules) == out);
  }
  SUBCASE("idempotent on random corpora") {
    const Corpus big(random_tweets(200, 9));
    const std::vector<LabelRule> rules{{RuleKind::by_hashtag, "tag1", Label::fake},
                                       {RuleKind::by_author, "user3", Label::genuine},
                                       {RuleKind::by_tweet_id, "t17", Label::fake}};
    const auto once = apply_labels(big, rules);
    CHECK(apply_labels(once, rules) == once);
  }
  SUBCASE("rule file parsing") {
    const auto rules = parse_label_rules("# comment\nhashtag bioweapon 1\nauthor X 1\n\ntweet_id t1 0\n");
    REQUIRE(rules.size() == 3);
    CHECK(rules[2].kind == RuleKind::by_tweet_id);
    CHECK_THROWS_AS(parse_label_rules("color red 1\n"), ParseError);
  }
}

TEST_CASE("split") {
  SUBCASE("fraction 0.25 of 100 gives 75/25") {
    const auto s = split(labeled_corpus(60, 40), 0.25, 1);
    CHECK(s.train.size() == 75);
    CHECK(s.valid.size() == 25);
  }
  SUBCASE("fraction 0 keeps everything in train") {
    const auto s = split(labeled_corpus(10, 5), 0.0, 1);
    CHECK(s.train.size() == 15);
    CHECK(s.valid.empty());
  }
  SUBCASE("unlabeled tweet is an error") {
    CHECK_THROWS_AS(split(Corpus({make("a", "x")}), 0.5, 1), ValidationError);
  }
  SUBCASE("deterministic per seed, disjoint, exhaustive and stratified") {
    const auto c = labeled_corpus(700, 300);
    const auto a = split(c, 0.25, 42);
    const auto b = split(c, 0.25, 42);
    const auto d = split(c, 0.25, 43);
    CHECK(ids(a.valid) == ids(b.valid));
    CHECK(ids(a.valid) != ids(d.valid));
    std::set<std::string> all = ids(a.train);
    for (const auto& id : ids(a.valid)) CHECK(all.insert(id).second);
    CHECK(all.size() == c.size());
    const auto fakes = std::count_if(a.valid.begin(), a.valid.end(),
                                     [](const Tweet& t) { return t.label == Label::fake; });
    CHECK(std::abs(static_cast<double>(fakes) - 75.0) <= 1.0);
  }
  SUBCASE("odd sizes stay within one tweet per class") {
    for (std::size_t g = 0; g < 12; ++g) {
      for (std::size_t f = 0; f < 9; ++f) {
        if (g + f == 0) continue;
        for (double frac : {0.1, 0.25, 0.5, 0.9}) {
          const auto s = split(labeled_corpus(g, f), frac, g * 31 + f);
          CHECK(s.valid.size() == static_cast<std::size_t>(std::llround(frac * (g + f))));
          const auto fakes = std::count_if(s.valid.begin(), s.valid.end(),
                                           [](const Tweet& t) { return t.label == Label::fake; });
          CHECK(std::abs(static_cast<double>(fakes) - frac * f) <= 1.0);
        }
      }
    }
  }
}

#include <doctest.h>

#include <algorithm>
#include <map>

#include "disinfo/error.hpp"
#include "disinfo/synth.hpp"
#include "disinfo/usergraph.hpp"

using namespace disinfo;
using namespace disinfo::synth;

TEST_CASE("default spec yields the requested class counts") {
  const auto c = generate_synthetic(SyntheticSpec{});
  std::size_t fake = 0, genuine = 0;
  for (const auto& t : c) {
    REQUIRE(t.label.has_value());
    (*t.label == Label::fake ? fake : genuine)++;
  }
  CHECK(fake == 500);
  CHECK(genuine == 1500);
}

TEST_CASE("n_fake = 0 labels everything genuine") {
  SyntheticSpec s;
  s.n_fake = 0;
  s.n_genuine = 300;
  const auto c = generate_synthetic(s);
  CHECK(c.size() == 300);
  for (const auto& t : c) CHECK(t.label == Label::genuine);
}

TEST_CASE("same seed gives a byte-identical file, another seed does not") {
  SyntheticSpec s;
  s.seed = 9;
  const auto a = serialize_jsonl(generate_synthetic(s));
  const auto b = serialize_jsonl(generate_synthetic(s));
  CHECK(a == b);
  s.seed = 10;
  CHECK(serialize_jsonl(generate_synthetic(s)) != a);
}

TEST_CASE("fake tweets are amplified by their own community's bots") {
  SyntheticSpec s;
  s.leak_probability = 0.0;
  const auto c = generate_synthetic(s);
  for (const auto& t : c) {
    if (t.label != Label::fake) {
      CHECK_FALSE(is_bot_account(t.author));
      for (const auto& r : t.retweeters) CHECK_FALSE(is_bot_account(r));
      continue;
    }
    CHECK(is_bot_account(t.author));
    CHECK(t.retweeters.size() == s.amplification);
    const auto prefix = t.author.substr(0, t.author.find('_') + 1);
    for (const auto& r : t.retweeters) CHECK(r.starts_with(prefix));
    CHECK(t.timestamp >= s.start_time + std::int64_t{s.fake_onset_day} * 86400);
    CHECK(t.timestamp < s.start_time + std::int64_t{s.days} * 86400);
  }
}

TEST_CASE("two bot communities of 20 show up as isolated walktrap communities") {
  SyntheticSpec s;
  s.bot_community_count = 2;
  s.bot_community_size = 20;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    s.seed = seed;
    const auto g = graph::build_user_graph(generate_synthetic(s));
    const auto p = graph::walktrap(g);
    const auto rows = graph::isolation_metrics(g, p);
    const auto isolated = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.isolation < 0.1; });
    CHECK(isolated >= 2);
  }
}

TEST_CASE("infeasible specs are rejected") {
  SyntheticSpec s;
  s.amplification = 18;  // 20 members, 3 of them operators
  CHECK_THROWS_AS(generate_synthetic(s), ValidationError);
  s = {};
  s.bot_community_count = 0;
  CHECK_THROWS_AS(generate_synthetic(s), ValidationError);
  s = {};
  s.leak_probability = 1.5;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = {};
  s.fake_onset_day = 60;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = {};
  s.amplification = 17;
  CHECK_NOTHROW(s.validate());
}

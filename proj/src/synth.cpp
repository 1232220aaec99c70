#include "disinfo/synth.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "disinfo/error.hpp"
#include "disinfo/rng.hpp"

namespace disinfo::synth {

namespace {

const std::vector<std::string>& propaganda_words() {
  static const std::vector<std::string> w = {"nazi",      "biolab",     "denazification", "provocation", "staged",
                                             "west",      "puppet",     "regime",         "nato",        "aggression",
                                             "liberation", "genocide",  "donbas",         "weapons",     "pentagon",
                                             "secret",    "laboratories", "russophobia",  "sanctions",   "backfire"};
  return w;
}

const std::vector<std::string>& general_words() {
  static const std::vector<std::string> w = {
      "ukraine", "people",   "city",     "help",      "refugees", "support", "today",   "news",   "report",
      "kyiv",    "family",   "border",   "donate",    "children", "shelter", "volunteers", "peace", "talks",
      "europe",  "students", "train",    "station",   "food",     "water",   "doctors", "school", "stand",
      "with",    "the",      "and",      "for",       "our",      "we",      "thank",   "brave",  "morning",
      "night",   "sirens",   "reporters", "photo",    "video",    "update",  "live",    "heart",  "hope"};
  return w;
}

std::string pick(Rng& rng, const std::vector<std::string>& v) { return v[rng.below(v.size())]; }

std::string make_text(Rng& rng, bool fake, const SyntheticSpec& s) {
  const std::size_t len = 6 + rng.below(10);
  std::string text;
  for (std::size_t i = 0; i < len; ++i) {
    const double p = fake ? s.fake_vocab_skew : s.genuine_topic_rate;
    if (i) text += ' ';
    text += rng.bernoulli(p) ? pick(rng, propaganda_words()) : pick(rng, general_words());
  }
  return text;
}

// k distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

std::string organic_name(std::size_t i) { return "user" + std::to_string(i); }
std::string bot_name(std::size_t c, std::size_t i) { return "bot" + std::to_string(c) + "_" + std::to_string(i); }

}  // namespace

void SyntheticSpec::validate() const {
  if (n_fake > 0) {
    if (bot_community_count == 0) throw ValidationError("fake tweets need at least one bot community");
    if (operators_per_community < 1 || operators_per_community >= bot_community_size) {
      throw ValidationError("operators_per_community must be in [1, bot_community_size)");
    }
    if (amplification > bot_community_size - operators_per_community) {
      throw ValidationError("amplification " + std::to_string(amplification) + " exceeds the " +
                            std::to_string(bot_community_size - operators_per_community) +
                            " non-operator bots of a community of size " + std::to_string(bot_community_size));
    }
  }
  if (n_genuine > 0 && organic_users < 2) throw ValidationError("genuine tweets need at least two organic users");
  if (max_organic_retweets >= organic_users && n_genuine > 0) {
    throw ValidationError("max_organic_retweets must be below organic_users");
  }
  if (n_genuine > 0 && (organic_groups < 1 || organic_groups > organic_users)) {
    throw ValidationError("organic_groups must be in [1, organic_users]");
  }
  const auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
  };
  prob(leak_probability, "leak_probability");
  prob(organic_mixing, "organic_mixing");
  prob(fake_vocab_skew, "fake_vocab_skew");
  prob(genuine_topic_rate, "genuine_topic_rate");
  if (days < 1) throw ValidationError("days must be at least 1");
  if (fake_onset_day < 0 || fake_onset_day >= days) throw ValidationError("fake_onset_day must lie in [0, days)");
  if (start_time < 0) throw ValidationError("start_time must not be negative");
}

nlohmann::json spec_to_json(const SyntheticSpec& s) {
  return {{"n_genuine", s.n_genuine},
          {"n_fake", s.n_fake},
          {"organic_users", s.organic_users},
          {"bot_community_count", s.bot_community_count},
          {"bot_community_size", s.bot_community_size},
          {"operators_per_community", s.operators_per_community},
          {"amplification", s.amplification},
          {"max_organic_retweets", s.max_organic_retweets},
          {"organic_groups", s.organic_groups},
          {"organic_mixing", s.organic_mixing},
          {"leak_probability", s.leak_probability},
          {"fake_vocab_skew", s.fake_vocab_skew},
          {"genuine_topic_rate", s.genuine_topic_rate},
          {"start_time", s.start_time},
          {"days", s.days},
          {"fake_onset_day", s.fake_onset_day},
          {"seed", s.seed}};
}

Corpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::int64_t day = 86400;
  std::vector<Tweet> tweets;
  tweets.reserve(spec.n_genuine + spec.n_fake);

  // Interleave the two classes at random so ids carry no label signal.
  std::vector<bool> is_fake(spec.n_genuine + spec.n_fake, false);
  std::fill(is_fake.begin(), is_fake.begin() + static_cast<std::ptrdiff_t>(spec.n_fake), true);
  rng.shuffle(is_fake);

  std::size_t serial = 0;
  for (const bool fake : is_fake) {
    Tweet t;
    t.id = std::to_string(1000000 + serial++);
    t.text = make_text(rng, fake, spec);
    if (fake) {
      const std::size_t c = rng.below(spec.bot_community_count);
      t.author = bot_name(c, rng.below(spec.operators_per_community));
      const auto bots = sample(rng, spec.bot_community_size - spec.operators_per_community, spec.amplification);
      for (auto b : bots) t.retweeters.push_back(bot_name(c, spec.operators_per_community + b));
      if (spec.organic_users > 0 && rng.bernoulli(spec.leak_probability)) {
        t.retweeters.push_back(organic_name(rng.below(spec.organic_users)));
      }
      const auto span = spec.days - spec.fake_onset_day;
      t.timestamp = spec.start_time + (spec.fake_onset_day + static_cast<std::int64_t>(rng.below(span))) * day +
                    static_cast<std::int64_t>(rng.below(day));
      t.label = Label::fake;
      if (rng.bernoulli(0.5)) t.hashtags.push_back(pick(rng, propaganda_words()));
    } else {
      const std::size_t author = rng.below(spec.organic_users);
      t.author = organic_name(author);
      const std::size_t n_rt = rng.below(spec.max_organic_retweets + 1);
      const std::size_t group = author % spec.organic_groups;
      const std::size_t group_size = (spec.organic_users - group + spec.organic_groups - 1) / spec.organic_groups;
      std::vector<std::size_t> picked;
      for (std::size_t attempt = 0; picked.size() < n_rt && attempt < 64 * n_rt; ++attempt) {
        const std::size_t u = rng.bernoulli(spec.organic_mixing)
                                  ? rng.below(spec.organic_users)
                                  : group + spec.organic_groups * rng.below(group_size);
        if (u == author || std::find(picked.begin(), picked.end(), u) != picked.end()) continue;
        picked.push_back(u);
      }
      for (auto u : picked) t.retweeters.push_back(organic_name(u));
      t.timestamp = spec.start_time + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(spec.days))) * day +
                    static_cast<std::int64_t>(rng.below(day));
      t.label = Label::genuine;
      if (rng.bernoulli(0.2)) t.hashtags.push_back(pick(rng, general_words()));
    }
    tweets.push_back(std::move(t));
  }
  return Corpus(std::move(tweets));
}

bool is_bot_account(const std::string& username) { return username.starts_with("bot"); }

}  // namespace disinfo::synth

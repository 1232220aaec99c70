#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "disinfo/corpus.hpp"

namespace disinfo::synth {

// Planted-amplification corpus: organic users author and retweet genuine
// tweets across loosely linked interest groups; each bot community has a few operator accounts posting
// fake tweets that the community's bots retweet in bulk.
struct SyntheticSpec {
  std::size_t n_genuine = 1500;
  std::size_t n_fake = 500;
  std::size_t organic_users = 400;
  std::size_t bot_community_count = 2;
  std::size_t bot_community_size = 20;  // operators included
  std::size_t operators_per_community = 3;
  std::size_t amplification = 12;       // bot retweets per fake tweet
  std::size_t max_organic_retweets = 8;  // per genuine tweet
  // Organic users fall into interest groups; a retweet comes from outside the
  // author's group with probability organic_mixing.
  std::size_t organic_groups = 8;
  double organic_mixing = 0.4;
  double leak_probability = 0.1;        // chance an organic user also retweets a fake tweet
  double fake_vocab_skew = 0.7;         // share of fake-tweet words from the propaganda list
  double genuine_topic_rate = 0.1;      // share of genuine-tweet words from the propaganda list
  std::int64_t start_time = 1643673600;  // 2022-02-01T00:00:00Z
  int days = 60;
  int fake_onset_day = 24;
  std::uint64_t seed = 1;

  // Throws ValidationError on infeasible settings.
  void validate() const;
};

nlohmann::json spec_to_json(const SyntheticSpec& s);

Corpus generate_synthetic(const SyntheticSpec& spec);

// Bot accounts (operators included) of generated corpora are named "bot<c>_<i>".
bool is_bot_account(const std::string& username);

}  // namespace disinfo::synth

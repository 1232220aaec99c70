#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "disinfo/corpus.hpp"

namespace disinfo::itemsets {

using Itemset = std::vector<std::string>;  // sorted, unique

struct Transaction {
  std::string tweet_id;
  Itemset items;
  bool operator==(const Transaction&) const = default;
};

struct FrequentItemset {
  Itemset items;
  std::uint64_t support = 0;
  double support_ratio = 0.0;  // support / number of transactions
  bool operator==(const FrequentItemset&) const = default;
};

struct AssociationRule {
  Itemset antecedent;
  Itemset consequent;
  double support_ratio = 0.0;  // of antecedent ∪ consequent
  double confidence = 0.0;
  double lift = 0.0;
};

struct SemanticNode {
  std::string token;
  std::uint64_t support = 0;
  double support_ratio = 0.0;
};

struct SemanticEdge {
  std::string a;
  std::string b;
  double weight = 0.0;  // support ratio of {a, b}
};

struct SemanticGraph {
  std::vector<SemanticNode> nodes;
  std::vector<SemanticEdge> edges;
};

using StopwordSet = std::set<std::string>;

// The stopword list bundled with the library (data/stopwords.txt).
const StopwordSet& default_stopwords();
// One word per line; '#' lines and blanks ignored; words are lowercased.
StopwordSet parse_stopwords(const std::string& content);

// Lowercase tokens minus stopwords and tokens shorter than min_token_len
// code points, deduplicated and sorted.
Transaction to_transaction(const Tweet& tweet, const StopwordSet& stopwords, std::size_t min_token_len);
std::vector<Transaction> to_transactions(const Corpus& corpus, const StopwordSet& stopwords,
                                         std::size_t min_token_len);

// FP-growth. Returns every itemset with at most max_len items whose support
// is at least min_support_count, ordered by (size, items). Throws
// ValidationError when min_support_count < 1 or max_len < 1.
std::vector<FrequentItemset> mine_frequent(std::span<const Transaction> transactions,
                                           std::uint64_t min_support_count, std::size_t max_len = 4);

// Every rule A -> C with A ∪ C frequent and confidence >= min_confidence,
// ordered by (antecedent, consequent). Throws ValidationError if a needed
// subset support is missing.
std::vector<AssociationRule> derive_rules(std::span<const FrequentItemset> frequent, double min_confidence);

// Nodes from 1-itemsets, edges from 2-itemsets weighted by support / n_transactions.
SemanticGraph semantic_graph(std::span<const FrequentItemset> frequent, std::size_t n_transactions);

std::string itemsets_to_csv(std::span<const FrequentItemset> frequent, std::string_view comment = {});
std::string rules_to_csv(std::span<const AssociationRule> rules, std::string_view comment = {});
std::string to_graphml(const SemanticGraph& g);
std::string to_dot(const SemanticGraph& g);

}  // namespace disinfo::itemsets

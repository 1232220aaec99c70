#include "disinfo/itemsets.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

#include "disinfo/error.hpp"
#include "disinfo/graphio.hpp"
#include "disinfo/stopwords_data.hpp"
#include "disinfo/text.hpp"

namespace disinfo::itemsets {

StopwordSet parse_stopwords(const std::string& content) {
  StopwordSet words;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    const auto w = text::trim(line);
    if (w.empty() || w.front() == '#') continue;
    words.insert(text::to_lower(w));
  }
  return words;
}

const StopwordSet& default_stopwords() {
  static const StopwordSet words = parse_stopwords(detail::kStopwordsText);
  return words;
}

namespace {

std::size_t code_points(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

// FP-tree over dense item ids. Node 0 is the root.
class FpTree {
 public:
  struct Node {
    int item;
    std::uint64_t count;
    int parent;
    int next;  // next node with the same item
    std::vector<int> children;
  };

  // Paths are (item list, multiplicity). Items below min_support within the
  // paths are dropped; the rest are ordered by descending support then id.
  FpTree(const std::vector<std::pair<std::vector<int>, std::uint64_t>>& paths, std::uint64_t min_support) {
    std::map<int, std::uint64_t> freq;
    for (const auto& [items, n] : paths) {
      for (int it : items) freq[it] += n;
    }
    for (const auto& [item, n] : freq) {
      if (n >= min_support) order_.push_back(item);
    }
    std::sort(order_.begin(), order_.end(), [&](int a, int b) {
      return freq[a] != freq[b] ? freq[a] > freq[b] : a < b;
    });
    for (std::size_t r = 0; r < order_.size(); ++r) {
      rank_[order_[r]] = static_cast<int>(r);
      head_[order_[r]] = -1;
      support_[order_[r]] = freq[order_[r]];
    }
    nodes_.push_back({-1, 0, -1, -1, {}});
    std::vector<int> ranked;
    for (const auto& [items, n] : paths) {
      ranked.clear();
      for (int it : items) {
        if (rank_.count(it)) ranked.push_back(it);
      }
      std::sort(ranked.begin(), ranked.end(), [&](int a, int b) { return rank_[a] < rank_[b]; });
      insert(ranked, n);
    }
  }

  const std::vector<int>& order() const { return order_; }
  std::uint64_t support(int item) const { return support_.at(item); }

  // Prefix paths (excluding item) of every node holding item.
  std::vector<std::pair<std::vector<int>, std::uint64_t>> conditional_base(int item) const {
    std::vector<std::pair<std::vector<int>, std::uint64_t>> base;
    for (int n = head_.at(item); n != -1; n = nodes_[n].next) {
      std::vector<int> path;
      for (int p = nodes_[n].parent; p > 0; p = nodes_[p].parent) path.push_back(nodes_[p].item);
      if (!path.empty()) base.emplace_back(std::move(path), nodes_[n].count);
    }
    return base;
  }

 private:
  void insert(const std::vector<int>& items, std::uint64_t n) {
    int cur = 0;
    for (int it : items) {
      int found = -1;
      for (int c : nodes_[cur].children) {
        if (nodes_[c].item == it) {
          found = c;
          break;
        }
      }
      if (found == -1) {
        found = static_cast<int>(nodes_.size());
        nodes_.push_back({it, 0, cur, head_[it], {}});
        head_[it] = found;
        nodes_[cur].children.push_back(found);
      }
      nodes_[found].count += n;
      cur = found;
    }
  }

  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::unordered_map<int, int> rank_;
  std::unordered_map<int, int> head_;
  std::unordered_map<int, std::uint64_t> support_;
};

void grow(const FpTree& tree, std::vector<int>& prefix, std::uint64_t min_support, std::size_t max_len,
          std::vector<std::pair<std::vector<int>, std::uint64_t>>& out) {
  const auto& order = tree.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    prefix.push_back(*it);
    out.emplace_back(prefix, tree.support(*it));
    if (prefix.size() < max_len) {
      const FpTree conditional(tree.conditional_base(*it), min_support);
      if (!conditional.order().empty()) grow(conditional, prefix, min_support, max_len, out);
    }
    prefix.pop_back();
  }
}

bool itemset_less(const FrequentItemset& a, const FrequentItemset& b) {
  return a.items.size() != b.items.size() ? a.items.size() < b.items.size() : a.items < b.items;
}

std::string join(const Itemset& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ' ';
    s += items[i];
  }
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Transaction to_transaction(const Tweet& tweet, const StopwordSet& stopwords, std::size_t min_token_len) {
  Transaction t{tweet.id, {}};
  for (auto& tok : text::tokenize(tweet.text)) {
    if (code_points(tok) < min_token_len || stopwords.count(tok)) continue;
    t.items.push_back(std::move(tok));
  }
  std::sort(t.items.begin(), t.items.end());
  t.items.erase(std::unique(t.items.begin(), t.items.end()), t.items.end());
  return t;
}

std::vector<Transaction> to_transactions(const Corpus& corpus, const StopwordSet& stopwords,
                                         std::size_t min_token_len) {
  std::vector<Transaction> out;
  out.reserve(corpus.size());
  for (const auto& t : corpus) out.push_back(to_transaction(t, stopwords, min_token_len));
  return out;
}

std::vector<FrequentItemset> mine_frequent(std::span<const Transaction> transactions,
                                           std::uint64_t min_support_count, std::size_t max_len) {
  if (min_support_count < 1) throw ValidationError("min_support_count must be at least 1");
  if (max_len < 1) throw ValidationError("max_len must be at least 1");

  // Dense ids in lexicographic order so id order equals string order.
  std::map<std::string, int> ids;
  for (const auto& t : transactions) {
    for (const auto& item : t.items) ids.emplace(item, 0);
  }
  std::vector<std::string> names;
  for (auto& [name, id] : ids) {
    id = static_cast<int>(names.size());
    names.push_back(name);
  }
  std::vector<std::pair<std::vector<int>, std::uint64_t>> paths;
  paths.reserve(transactions.size());
  for (const auto& t : transactions) {
    std::vector<int> items;
    for (const auto& item : t.items) items.push_back(ids[item]);
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    paths.emplace_back(std::move(items), 1);
  }

  const FpTree tree(paths, min_support_count);
  std::vector<std::pair<std::vector<int>, std::uint64_t>> found;
  std::vector<int> prefix;
  grow(tree, prefix, min_support_count, max_len, found);

  const double n = static_cast<double>(transactions.size());
  std::vector<FrequentItemset> result;
  result.reserve(found.size());
  for (auto& [items, support] : found) {
    std::sort(items.begin(), items.end());
    FrequentItemset f;
    for (int id : items) f.items.push_back(names[id]);
    f.support = support;
    f.support_ratio = static_cast<double>(support) / n;
    result.push_back(std::move(f));
  }
  std::sort(result.begin(), result.end(), itemset_less);
  return result;
}

std::vector<AssociationRule> derive_rules(std::span<const FrequentItemset> frequent, double min_confidence) {
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
    throw ValidationError("min_confidence must lie in [0, 1]");
  }
  std::map<Itemset, const FrequentItemset*> lookup;
  for (const auto& f : frequent) lookup[f.items] = &f;
  const auto find = [&](const Itemset& s) -> const FrequentItemset& {
    const auto it = lookup.find(s);
    if (it == lookup.end()) {
      throw ValidationError("frequent itemsets are not downward closed: missing {" + join(s) + "}");
    }
    return *it->second;
  };

  std::vector<AssociationRule> rules;
  for (const auto& f : frequent) {
    const std::size_t k = f.items.size();
    if (k < 2) continue;
    if (k >= 63) throw ValidationError("itemset too large for rule enumeration");
    const std::uint64_t full = (std::uint64_t{1} << k) - 1;
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      Itemset a, c;
      for (std::size_t i = 0; i < k; ++i) ((mask >> i) & 1 ? a : c).push_back(f.items[i]);
      const auto& sa = find(a);
      const auto& sc = find(c);
      const double confidence = static_cast<double>(f.support) / static_cast<double>(sa.support);
      if (confidence < min_confidence) continue;
      rules.push_back({std::move(a), std::move(c), f.support_ratio, confidence, confidence / sc.support_ratio});
    }
  }
  std::sort(rules.begin(), rules.end(), [](const AssociationRule& x, const AssociationRule& y) {
    return x.antecedent != y.antecedent ? x.antecedent < y.antecedent : x.consequent < y.consequent;
  });
  return rules;
}

SemanticGraph semantic_graph(std::span<const FrequentItemset> frequent, std::size_t n_transactions) {
  SemanticGraph g;
  const double n = static_cast<double>(n_transactions);
  for (const auto& f : frequent) {
    if (f.items.size() == 1) g.nodes.push_back({f.items[0], f.support, static_cast<double>(f.support) / n});
  }
  for (const auto& f : frequent) {
    if (f.items.size() == 2) g.edges.push_back({f.items[0], f.items[1], static_cast<double>(f.support) / n});
  }
  return g;
}

std::string itemsets_to_csv(std::span<const FrequentItemset> frequent, std::string_view comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "items,size,support,support_ratio\n";
  for (const auto& f : frequent) {
    out << csv_field(join(f.items)) << ',' << f.items.size() << ',' << f.support << ','
        << graphio::format_number(f.support_ratio) << '\n';
  }
  return out.str();
}

std::string rules_to_csv(std::span<const AssociationRule> rules, std::string_view comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "antecedent,consequent,support_ratio,confidence,lift\n";
  for (const auto& r : rules) {
    out << csv_field(join(r.antecedent)) << ',' << csv_field(join(r.consequent)) << ','
        << graphio::format_number(r.support_ratio) << ',' << graphio::format_number(r.confidence) << ','
        << graphio::format_number(r.lift) << '\n';
  }
  return out.str();
}

namespace {

graphio::AttributedGraph attributed(const SemanticGraph& g) {
  graphio::AttributedGraph out;
  std::map<std::string, std::size_t> index;
  std::vector<double> support;
  for (const auto& n : g.nodes) {
    index[n.token] = out.names.size();
    out.names.push_back(n.token);
    support.push_back(static_cast<double>(n.support));
  }
  out.vertex_attrs.emplace_back("support", std::move(support));
  for (const auto& e : g.edges) out.edges.push_back({index.at(e.a), index.at(e.b), e.weight});
  return out;
}

}  // namespace

std::string to_graphml(const SemanticGraph& g) { return graphio::to_graphml(attributed(g)); }
std::string to_dot(const SemanticGraph& g) { return graphio::to_dot(attributed(g)); }

}  // namespace disinfo::itemsets

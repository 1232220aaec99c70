#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "disinfo/corpus.hpp"
#include "disinfo/graphio.hpp"

namespace disinfo::graph {

// Undirected weighted graph over usernames. No self-loops; adjacency is
// symmetric and each neighbor list is sorted by vertex index.
class UserGraph {
 public:
  struct Neighbor {
    std::size_t v;
    double weight;
  };
  struct Edge {
    std::size_t u;  // u < v
    std::size_t v;
    double weight;
  };

  UserGraph() = default;
  // Parallel edges are merged by summing weights. Throws ValidationError on
  // self-loops, out-of-range endpoints or non-positive weights.
  UserGraph(std::vector<std::string> names, std::span<const Edge> edges);

  std::size_t vertex_count() const noexcept { return names_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  const std::string& name(std::size_t v) const { return names_[v]; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::optional<std::size_t> index_of(const std::string& name) const;
  std::span<const Neighbor> neighbors(std::size_t v) const { return adj_[v]; }
  double strength(std::size_t v) const { return strength_[v]; }
  double total_weight() const noexcept { return total_weight_; }  // sum over edges
  std::vector<Edge> edges() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<Neighbor>> adj_;
  std::vector<double> strength_;
  double total_weight_ = 0.0;
  std::size_t edge_count_ = 0;
};

struct GraphOptions {
  // Link every pair of accounts that retweeted the same tweet, in addition to
  // author-retweeter edges.
  bool co_retweet = false;
};

// One author-retweeter edge per retweet, weights accumulating repeats.
// Vertices appear in first-seen order; authors without retweeters are
// isolated vertices. Self-retweets are ignored.
UserGraph build_user_graph(const Corpus& corpus, const GraphOptions& options = {});

struct Partition {
  std::vector<std::size_t> community_of;           // vertex -> community id
  std::vector<std::vector<std::size_t>> communities;  // id -> sorted vertices
  double modularity = 0.0;
};

// Newman modularity of an assignment (community ids need not be dense).
double modularity(const UserGraph& g, std::span<const std::size_t> community_of);

// Builds a Partition (ids renumbered by smallest member) and its modularity.
Partition make_partition(const UserGraph& g, std::span<const std::size_t> community_of);

// Pons-Latapy walktrap: agglomerative merging of adjacent communities by
// minimum increase of the random-walk distance (walks of walk_steps steps on
// the graph with one self-loop per vertex), cut where modularity is highest.
// Ties go to the smallest community-id pair. Throws ValidationError on an
// empty graph or walk_steps < 1.
Partition walktrap(const UserGraph& g, int walk_steps = 4);

struct PageRankOptions {
  double damping = 0.85;
  double tol = 1e-10;  // on the L1 change between iterates
  int max_iter = 10'000;
};

// Weighted random surfer; mass at vertices without edges is spread
// uniformly. Scores sum to 1. Throws ConvergenceError after max_iter.
std::vector<double> pagerank(const UserGraph& g, const PageRankOptions& options = {});

struct HitsOptions {
  double tol = 1e-12;  // on the L2 change between iterates or the relative eigen-residual
  int max_iter = 100'000;
};

struct HitsScores {
  std::vector<double> hub;
  std::vector<double> authority;
};

// Power iteration on A·Aᵀ (hubs) and Aᵀ·A (authorities), each started from
// the vertex strengths and L2-normalized every step. On an undirected graph
// both coincide.
HitsScores hits(const UserGraph& g, const HitsOptions& options = {});

// Brandes accumulation over unweighted shortest paths; each unordered pair
// counts once.
std::vector<double> betweenness(const UserGraph& g);

struct Point {
  double x;
  double y;
};

struct LayoutOptions {
  int iterations = 300;
  double area = 0.0;  // side² of the square box; 0 means vertex_count²
  std::uint64_t seed = 1;
};

// Fruchterman-Reingold: repulsion k²/d between all pairs, attraction d²/k
// along edges, k = sqrt(area / n), displacement capped by a temperature that
// cools linearly from side/10 to 0. Positions stay inside [0, side]².
std::vector<Point> layout_fr(const UserGraph& g, const LayoutOptions& options = {});

struct CommunityIsolation {
  std::size_t community;
  std::size_t size;
  double internal_weight;
  double external_weight;
  double isolation;  // external / (internal + external); 0 when both are 0
};

// Sorted by ascending isolation, then community id. Throws ValidationError
// when the partition does not cover every vertex.
std::vector<CommunityIsolation> isolation_metrics(const UserGraph& g, const Partition& partition);

struct CentralityReport {
  std::vector<double> hub;
  std::vector<double> authority;
  std::vector<double> pagerank;
  std::vector<double> betweenness;
};

CentralityReport centralities(const UserGraph& g, const PageRankOptions& pr = {}, const HitsOptions& h = {});

// Vertex attributes community, pagerank, hub, authority, betweenness, x, y.
graphio::AttributedGraph attributed(const UserGraph& g, const Partition& partition, const CentralityReport& c,
                                    std::span<const Point> layout);

std::string isolation_to_csv(std::span<const CommunityIsolation> rows, const Partition& partition,
                             std::span<const double> pagerank, std::string_view comment = {});

}  // namespace disinfo::graph

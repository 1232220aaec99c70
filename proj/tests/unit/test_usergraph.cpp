#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <cstring>
#include <numeric>
#include <set>

#include "disinfo/error.hpp"
#include "disinfo/rng.hpp"
#include "disinfo/usergraph.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace disinfo;
using namespace disinfo::graph;
using oracle::Dense;

namespace {

UserGraph from_dense(const Dense& a) {
  std::vector<std::string> names;
  std::vector<UserGraph::Edge> edges;
  for (std::size_t i = 0; i < a.size(); ++i) {
    names.push_back("v" + std::to_string(i));
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a[i][j] > 0) edges.push_back({i, j, a[i][j]});
    }
  }
  return UserGraph(names, edges);
}

Dense two_cliques(std::size_t k) {
  Dense a(2 * k, std::vector<double>(2 * k, 0.0));
  for (std::size_t off : {std::size_t{0}, k}) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) a[off + i][off + j] = a[off + j][off + i] = 1.0;
    }
  }
  a[k - 1][k] = a[k][k - 1] = 1.0;
  return a;
}

// Q = 1/2m Σ_ij (A_ij − k_i k_j / 2m) δ(c_i, c_j), straight from the definition.
double dense_modularity(const Dense& a, const std::vector<std::size_t>& c) {
  const std::size_t n = a.size();
  std::vector<double> k(n, 0.0);
  double two_m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k[i] += a[i][j];
    two_m += k[i];
  }
  if (two_m == 0.0) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (c[i] == c[j]) q += a[i][j] - k[i] * k[j] / two_m;
    }
  }
  return q / two_m;
}

Eigen::MatrixXd to_eigen(const Dense& a) {
  Eigen::MatrixXd m(a.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) m(i, j) = a[i][j];
  }
  return m;
}

// Stationary vector of the damped Google matrix by a direct linear solve.
Eigen::VectorXd dense_pagerank(const Dense& a, double d) {
  const auto n = static_cast<Eigen::Index>(a.size());
  const Eigen::MatrixXd A = to_eigen(a);
  Eigen::MatrixXd G = Eigen::MatrixXd::Constant(n, n, (1.0 - d) / n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double s = A.col(j).sum();
    if (s == 0.0) {
      G.col(j).array() += d / n;
    } else {
      G.col(j) += d * A.col(j) / s;
    }
  }
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - G;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  M.row(n - 1).setOnes();
  rhs(n - 1) = 1.0;
  return M.fullPivLu().solve(rhs);
}

// Limit of power iteration on A·Aᵀ started from s: projection of s onto the
// eigenspace of the largest eigenvalue, normalized.
Eigen::VectorXd dense_hub(const Dense& a, const Eigen::VectorXd& s) {
  const Eigen::MatrixXd A = to_eigen(a);
  const Eigen::MatrixXd AAt = A * A.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(AAt);
  const double top = es.eigenvalues().maxCoeff();
  Eigen::VectorXd proj = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > top * (1.0 - 1e-9)) {
      const Eigen::VectorXd v = es.eigenvectors().col(i);
      proj += v.dot(s) * v;
    }
  }
  return proj / proj.norm();
}

std::set<std::set<std::string>> named_communities(const UserGraph& g, const Partition& p) {
  std::set<std::set<std::string>> out;
  for (const auto& c : p.communities) {
    std::set<std::string> names;
    for (auto v : c) names.insert(g.name(v));
    out.insert(names);
  }
  return out;
}

Tweet tw(std::string id, std::string author, std::vector<std::string> rts) {
  Tweet t;
  t.id = std::move(id);
  t.text = "x";
  t.author = std::move(author);
  t.retweeters = std::move(rts);
  return t;
}

}  // namespace

TEST_CASE("graph construction validates edges") {
  using E = UserGraph::Edge;
  std::vector<std::string> names{"a", "b", "c"};
  CHECK_THROWS_AS(UserGraph(names, std::vector<E>{{0, 0, 1.0}}), ValidationError);
  CHECK_THROWS_AS(UserGraph(names, std::vector<E>{{0, 3, 1.0}}), ValidationError);
  CHECK_THROWS_AS(UserGraph(names, std::vector<E>{{0, 1, 0.0}}), ValidationError);
  const UserGraph g(names, std::vector<E>{{0, 1, 1.0}, {1, 0, 2.0}, {1, 2, 1.0}});
  CHECK(g.edge_count() == 2);
  CHECK(g.neighbors(1).size() == 2);
  CHECK(g.neighbors(0)[0].weight == 3.0);
  CHECK(g.strength(1) == 4.0);
  CHECK(g.total_weight() == 4.0);
}

TEST_CASE("author-retweeter edges") {
  const Corpus c({tw("1", "A", {"B", "C"})});
  const auto g = build_user_graph(c);
  REQUIRE(g.vertex_count() == 3);
  CHECK(g.edge_count() == 2);
  const auto a = *g.index_of("A");
  for (const auto& n : g.neighbors(a)) CHECK(n.weight == 1.0);
  CHECK(g.neighbors(a).size() == 2);
}

TEST_CASE("repeated retweets accumulate weight; lone authors stay isolated") {
  const Corpus c({tw("1", "A", {"B"}), tw("2", "A", {"B"}), tw("3", "A", {"B", "A"}), tw("4", "Z", {})});
  const auto g = build_user_graph(c);
  REQUIRE(g.vertex_count() == 3);
  CHECK(g.edge_count() == 1);
  CHECK(g.neighbors(*g.index_of("A"))[0].weight == 3.0);
  CHECK(g.neighbors(*g.index_of("Z")).empty());
}

TEST_CASE("co-retweet mode links co-retweeters") {
  const Corpus c({tw("1", "A", {"B", "C"})});
  CHECK(build_user_graph(c, {.co_retweet = true}).edge_count() == 3);
}

TEST_CASE("degree sequence of a 200-tweet corpus matches an independent tally") {
  const Corpus c(testing::random_tweets(200, 42));
  std::map<std::string, std::set<std::string>> nbrs;
  std::map<std::string, double> weight;
  for (const auto& t : c) {
    nbrs[t.author];
    for (const auto& r : t.retweeters) {
      nbrs[r];
      if (r == t.author) continue;
      nbrs[t.author].insert(r);
      nbrs[r].insert(t.author);
      weight[t.author] += 1;
      weight[r] += 1;
    }
  }
  const auto g = build_user_graph(c);
  REQUIRE(g.vertex_count() == nbrs.size());
  for (const auto& [name, set] : nbrs) {
    const auto v = g.index_of(name);
    REQUIRE(v);
    CHECK(g.neighbors(*v).size() == set.size());
    CHECK(g.strength(*v) == weight[name]);
  }
}

TEST_CASE("modularity agrees with the definition") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = oracle::random_graph(rng, 9, 0.4, 3);
    const auto g = from_dense(a);
    std::vector<std::size_t> c(9);
    for (auto& x : c) x = rng.below(3) * 10;
    CHECK(modularity(g, c) == doctest::Approx(dense_modularity(a, c)).epsilon(1e-12));
  }
}

TEST_CASE("walktrap splits two bridged 8-cliques exactly") {
  const auto a = two_cliques(8);
  const auto g = from_dense(a);
  const auto p = walktrap(g);
  REQUIRE(p.communities.size() == 2);
  for (std::size_t v = 0; v < 16; ++v) CHECK(p.community_of[v] == (v < 8 ? 0u : 1u));

  // No other bipartition scores higher.
  double best = -1.0;
  std::vector<std::size_t> c(16);
  for (std::uint32_t mask = 0; mask < (1u << 15); ++mask) {
    for (std::size_t v = 0; v < 15; ++v) c[v] = (mask >> v) & 1u;
    c[15] = 1;
    best = std::max(best, dense_modularity(a, c));
  }
  CHECK(p.modularity == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("walktrap edge cases") {
  CHECK_THROWS_AS(walktrap(UserGraph({}, {})), ValidationError);
  const auto clique = from_dense(two_cliques(5));
  CHECK_THROWS_AS(walktrap(clique, 0), ValidationError);

  Dense k6(6, std::vector<double>(6, 1.0));
  for (std::size_t i = 0; i < 6; ++i) k6[i][i] = 0.0;
  CHECK(walktrap(from_dense(k6)).communities.size() == 1);

  const auto lone = UserGraph({"a"}, {});
  CHECK(walktrap(lone).communities.size() == 1);
}

TEST_CASE("walktrap never straddles components and never loses to one community") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 6 + rng.below(10);
    auto a = oracle::random_graph(rng, n, 0.35, 4);
    // Cut into two blocks.
    const std::size_t cut = n / 2;
    for (std::size_t i = 0; i < cut; ++i) {
      for (std::size_t j = cut; j < n; ++j) a[i][j] = a[j][i] = 0.0;
    }
    const auto g = from_dense(a);
    const auto p = walktrap(g);
    for (const auto& comm : p.communities) {
      const bool left = comm.front() < cut;
      for (auto v : comm) CHECK((v < cut) == left);
    }
    CHECK(p.modularity >= -1e-12);
    CHECK(p.modularity == doctest::Approx(dense_modularity(a, p.community_of)).epsilon(1e-12));
    // Partition covers the vertex set exactly.
    std::vector<int> seen(n, 0);
    for (const auto& comm : p.communities) {
      for (auto v : comm) seen[v]++;
    }
    for (auto s : seen) CHECK(s == 1);
  }
}

TEST_CASE("walktrap is invariant to vertex relabeling") {
  Rng rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 12;
    // Planted three-block structure with distinct random weights.
    Dense a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool same = i / 4 == j / 4;
        if (rng.bernoulli(same ? 0.8 : 0.1)) a[i][j] = a[j][i] = 1.0 + rng.uniform();
      }
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::string> names(n), pnames(n);
    std::vector<UserGraph::Edge> e1, e2;
    for (std::size_t i = 0; i < n; ++i) {
      names[i] = "u" + std::to_string(i);
      pnames[perm[i]] = names[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (a[i][j] == 0.0) continue;
        e1.push_back({i, j, a[i][j]});
        e2.push_back({perm[i], perm[j], a[i][j]});
      }
    }
    const UserGraph g1(names, e1), g2(pnames, e2);
    CHECK(named_communities(g1, walktrap(g1)) == named_communities(g2, walktrap(g2)));
  }
}

TEST_CASE("pagerank closed forms") {
  const UserGraph pair({"a", "b"}, std::vector<UserGraph::Edge>{{0, 1, 1.0}});
  const auto pr = pagerank(pair);
  CHECK(pr[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pr[1] == doctest::Approx(0.5).epsilon(1e-12));

  // Isolated vertex z, pair x–y. Dangling mass from z spreads uniformly, so
  // z = (1−d)/3 + d·z/3, i.e. z = (1−d)/(3−d).
  const double d = 0.85;
  const UserGraph g({"z", "x", "y"}, std::vector<UserGraph::Edge>{{1, 2, 1.0}});
  const auto s = pagerank(g, {.damping = d});
  CHECK(s[0] == doctest::Approx((1 - d) / (3 - d)).epsilon(1e-9));
  CHECK(s[1] == doctest::Approx(s[2]).epsilon(1e-12));
  CHECK(s[0] + s[1] + s[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pagerank matches a dense solve on random graphs") {
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const auto a = oracle::random_graph(rng, 8, 0.3, 5);
    const auto x = pagerank(from_dense(a));
    const auto ref = dense_pagerank(a, 0.85);
    double sum = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(std::abs(x[i] - ref(static_cast<Eigen::Index>(i))) < 1e-8);
      sum += x[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("pagerank reports non-convergence with residual") {
  const auto g = from_dense(two_cliques(4));
  try {
    pagerank(g, {.max_iter = 2});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 0.0);
  }
  CHECK_THROWS_AS(pagerank(g, {.damping = 1.0}), ValidationError);
  CHECK_THROWS_AS(pagerank(UserGraph({}, {})), ValidationError);
}

TEST_CASE("hits on a star and a single edge") {
  const UserGraph star({"c", "l1", "l2", "l3"},
                       std::vector<UserGraph::Edge>{{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}});
  const auto h = hits(star);
  CHECK(h.hub[0] > h.hub[1]);
  CHECK(h.hub[1] == doctest::Approx(h.hub[2]).epsilon(1e-12));
  CHECK(h.hub[2] == doctest::Approx(h.hub[3]).epsilon(1e-12));
  for (std::size_t v = 0; v < 4; ++v) CHECK(std::abs(h.hub[v] - h.authority[v]) < 1e-10);

  const UserGraph pair({"a", "b"}, std::vector<UserGraph::Edge>{{0, 1, 2.0}});
  const auto p = hits(pair);
  CHECK(p.hub[0] == doctest::Approx(p.hub[1]));
  CHECK(p.authority[0] == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("hits matches the dominant eigenvector of A·Aᵀ") {
  Rng rng(9);
  for (int trial = 0; trial < 25; ++trial) {
    const auto a = oracle::random_graph(rng, 8, 0.4, 4);
    const auto g = from_dense(a);
    if (g.edge_count() == 0) continue;
    const auto h = hits(g);
    Eigen::VectorXd s(8);
    for (std::size_t v = 0; v < 8; ++v) s(static_cast<Eigen::Index>(v)) = g.strength(v);
    const auto ref = dense_hub(a, s);
    double norm_h = 0.0, norm_a = 0.0;
    for (std::size_t v = 0; v < 8; ++v) {
      CHECK(std::abs(h.hub[v] - ref(static_cast<Eigen::Index>(v))) < 1e-8);
      CHECK(std::abs(h.hub[v] - h.authority[v]) < 1e-10);
      norm_h += h.hub[v] * h.hub[v];
      norm_a += h.authority[v] * h.authority[v];
    }
    CHECK(norm_h == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(norm_a == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("betweenness on a path and a complete graph") {
  const UserGraph path({"a", "b", "c"}, std::vector<UserGraph::Edge>{{0, 1, 1.0}, {1, 2, 1.0}});
  const auto b = betweenness(path);
  CHECK(b[0] == 0.0);
  CHECK(b[1] == 1.0);
  CHECK(b[2] == 0.0);

  Dense k5(5, std::vector<double>(5, 1.0));
  for (std::size_t i = 0; i < 5; ++i) k5[i][i] = 0.0;
  for (double x : betweenness(from_dense(k5))) CHECK(x == 0.0);
}

TEST_CASE("betweenness equals brute-force path enumeration") {
  Rng rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const auto a = oracle::random_graph(rng, n, 0.2 + 0.6 * rng.uniform(), 5);
    const auto got = betweenness(from_dense(a));
    const auto ref = oracle::betweenness_by_paths(a);
    for (std::size_t v = 0; v < n; ++v) {
      CHECK(got[v] >= 0.0);
      CHECK(got[v] == doctest::Approx(ref[v]).epsilon(1e-12));
    }
  }
}

TEST_CASE("layout: single vertex, two vertices, determinism") {
  const auto one = layout_fr(UserGraph({"a"}, {}), {.area = 100.0});
  CHECK(one[0].x == 5.0);
  CHECK(one[0].y == 5.0);

  const UserGraph pair({"a", "b"}, std::vector<UserGraph::Edge>{{0, 1, 1.0}});
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double area = 400.0;
    const auto p = layout_fr(pair, {.iterations = 300, .area = area, .seed = seed});
    const double k = std::sqrt(area / 2.0);
    const double d = std::hypot(p[0].x - p[1].x, p[0].y - p[1].y);
    CHECK(d >= 0.5 * k);
    CHECK(d <= 2.0 * k);
  }

  Rng rng(1);
  const auto g = from_dense(oracle::random_graph(rng, 20, 0.2, 3));
  const auto p1 = layout_fr(g, {.seed = 99});
  const auto p2 = layout_fr(g, {.seed = 99});
  const double side = 20.0;
  for (std::size_t v = 0; v < 20; ++v) {
    CHECK(std::memcmp(&p1[v], &p2[v], sizeof(Point)) == 0);
    CHECK(std::isfinite(p1[v].x));
    CHECK(p1[v].x >= 0.0);
    CHECK(p1[v].x <= side);
    CHECK(p1[v].y >= 0.0);
    CHECK(p1[v].y <= side);
  }
}

TEST_CASE("isolation of bridged cliques is 1/29") {
  const auto g = from_dense(two_cliques(8));
  std::vector<std::size_t> c(16);
  for (std::size_t v = 0; v < 16; ++v) c[v] = v < 8 ? 0 : 1;
  const auto rows = isolation_metrics(g, make_partition(g, c));
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.internal_weight == 28.0);
    CHECK(r.external_weight == 1.0);
    CHECK(r.isolation == doctest::Approx(1.0 / 29.0).epsilon(1e-15));
    CHECK(r.size == 8);
  }
}

TEST_CASE("isolation of disconnected components is zero") {
  auto a = two_cliques(4);
  a[3][4] = a[4][3] = 0.0;
  const auto g = from_dense(a);
  const auto rows = isolation_metrics(g, walktrap(g));
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) CHECK(r.isolation == 0.0);
}

TEST_CASE("isolation recount on random partitions") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10;
    const auto a = oracle::random_graph(rng, n, 0.4, 4);
    const auto g = from_dense(a);
    std::vector<std::size_t> c(n);
    for (auto& x : c) x = rng.below(4);
    const auto p = make_partition(g, c);
    const auto rows = isolation_metrics(g, p);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].isolation <= rows[i].isolation);
    for (const auto& r : rows) {
      double degree = 0.0;
      for (auto v : p.communities[r.community]) {
        for (std::size_t u = 0; u < n; ++u) degree += a[v][u];
      }
      // Internal edges touch the community at both ends.
      CHECK(2.0 * r.internal_weight + r.external_weight == doctest::Approx(degree));
      CHECK(r.isolation >= 0.0);
      CHECK(r.isolation <= 1.0);
      CHECK((r.isolation == 0.0) == (r.external_weight == 0.0));
    }
  }
  const auto g = from_dense(two_cliques(3));
  Partition bad;
  bad.community_of = {0, 0, 0};
  bad.communities = {{0, 1, 2}};
  CHECK_THROWS_AS(isolation_metrics(g, bad), ValidationError);
}

TEST_CASE("centrality report and exports") {
  const auto g = from_dense(two_cliques(4));
  const auto p = walktrap(g);
  const auto c = centralities(g);
  const auto layout = layout_fr(g);
  const auto ag = attributed(g, p, c, layout);
  CHECK(ag.vertex_attrs.size() == 7);
  CHECK(ag.edges.size() == g.edge_count());
  const auto csv = isolation_to_csv(isolation_metrics(g, p), p, c.pagerank, "stage=graph");
  CHECK(csv.rfind("# stage=graph\ncommunity,size,", 0) == 0);
  CHECK(csv == isolation_to_csv(isolation_metrics(g, walktrap(g)), p, centralities(g).pagerank, "stage=graph"));
}

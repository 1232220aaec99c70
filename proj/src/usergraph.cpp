#include "disinfo/usergraph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <future>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "disinfo/error.hpp"
#include "disinfo/rng.hpp"

namespace disinfo::graph {

UserGraph::UserGraph(std::vector<std::string> names, std::span<const Edge> edges)
    : names_(std::move(names)), adj_(names_.size()), strength_(names_.size(), 0.0) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second) throw ValidationError("duplicate vertex name: " + names_[i]);
  }
  std::map<std::pair<std::size_t, std::size_t>, double> merged;
  for (const auto& e : edges) {
    if (e.u >= names_.size() || e.v >= names_.size()) throw ValidationError("edge endpoint out of range");
    if (e.u == e.v) throw ValidationError("self-loop on vertex " + names_[e.u]);
    if (!(e.weight > 0.0)) throw ValidationError("edge weight must be positive");
    merged[{std::min(e.u, e.v), std::max(e.u, e.v)}] += e.weight;
  }
  for (const auto& [key, w] : merged) {
    adj_[key.first].push_back({key.second, w});
    adj_[key.second].push_back({key.first, w});
    strength_[key.first] += w;
    strength_[key.second] += w;
    total_weight_ += w;
  }
  for (auto& list : adj_) {
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.v < b.v; });
  }
  edge_count_ = merged.size();
}

std::optional<std::size_t> UserGraph::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<UserGraph::Edge> UserGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (std::size_t u = 0; u < adj_.size(); ++u) {
    for (const auto& n : adj_[u]) {
      if (u < n.v) out.push_back({u, n.v, n.weight});
    }
  }
  return out;
}

UserGraph build_user_graph(const Corpus& corpus, const GraphOptions& options) {
  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> index;
  const auto vertex = [&](const std::string& name) {
    const auto [it, inserted] = index.emplace(name, names.size());
    if (inserted) names.push_back(name);
    return it->second;
  };
  std::vector<UserGraph::Edge> edges;
  for (const auto& t : corpus) {
    std::optional<std::size_t> author;
    if (!t.author.empty()) author = vertex(t.author);
    std::vector<std::size_t> rts;
    for (const auto& r : t.retweeters) {
      const std::size_t v = vertex(r);
      if (author && v != *author) edges.push_back({*author, v, 1.0});
      rts.push_back(v);
    }
    if (options.co_retweet) {
      std::sort(rts.begin(), rts.end());
      rts.erase(std::unique(rts.begin(), rts.end()), rts.end());
      for (std::size_t i = 0; i < rts.size(); ++i) {
        for (std::size_t j = i + 1; j < rts.size(); ++j) edges.push_back({rts[i], rts[j], 1.0});
      }
    }
  }
  return UserGraph(std::move(names), edges);
}

double modularity(const UserGraph& g, std::span<const std::size_t> community_of) {
  const double m = g.total_weight();
  if (m == 0.0) return 0.0;
  std::map<std::size_t, double> internal, strength;
  for (std::size_t u = 0; u < g.vertex_count(); ++u) {
    strength[community_of[u]] += g.strength(u);
    for (const auto& n : g.neighbors(u)) {
      if (u < n.v && community_of[u] == community_of[n.v]) internal[community_of[u]] += n.weight;
    }
  }
  double q = 0.0;
  for (const auto& [c, s] : strength) {
    const double in = internal.count(c) ? internal[c] : 0.0;
    q += in / m - (s / (2.0 * m)) * (s / (2.0 * m));
  }
  return q;
}

Partition make_partition(const UserGraph& g, std::span<const std::size_t> community_of) {
  if (community_of.size() != g.vertex_count()) throw ValidationError("partition size differs from vertex count");
  Partition p;
  p.community_of.resize(community_of.size());
  std::map<std::size_t, std::size_t> renumber;
  for (std::size_t v = 0; v < community_of.size(); ++v) {
    const auto [it, inserted] = renumber.emplace(community_of[v], p.communities.size());
    if (inserted) p.communities.emplace_back();
    p.community_of[v] = it->second;
    p.communities[it->second].push_back(v);
  }
  p.modularity = modularity(g, p.community_of);
  return p;
}

namespace {

// Live community during agglomeration.
struct WalkCommunity {
  std::size_t size = 0;
  std::vector<double> profile;  // D^{-1/2} P^t, averaged over members
  std::map<std::size_t, double> links;  // neighbor community -> edge weight between
  double strength = 0.0;                // sum of member strengths (original graph)
  bool alive = false;
};

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

Partition walktrap(const UserGraph& g, int walk_steps) {
  const std::size_t n = g.vertex_count();
  if (n == 0) throw ValidationError("walktrap needs a nonempty graph");
  if (walk_steps < 1) throw ValidationError("walk_steps must be at least 1");

  // Each vertex carries a self-loop weighted by its mean edge weight (1 when
  // isolated), as in the reference implementation.
  std::vector<double> loop(n), degree(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto nb = g.neighbors(v);
    loop[v] = nb.empty() ? 1.0 : g.strength(v) / static_cast<double>(nb.size());
    degree[v] = g.strength(v) + loop[v];
  }

  std::vector<WalkCommunity> comm(2 * n);
  std::vector<double> cur(n), next(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::fill(cur.begin(), cur.end(), 0.0);
    cur[v] = 1.0;
    for (int step = 0; step < walk_steps; ++step) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t u = 0; u < n; ++u) {
        if (cur[u] == 0.0) continue;
        const double p = cur[u] / degree[u];
        next[u] += p * loop[u];
        for (const auto& nb : g.neighbors(u)) next[nb.v] += p * nb.weight;
      }
      std::swap(cur, next);
    }
    auto& c = comm[v];
    c.size = 1;
    c.profile.resize(n);
    for (std::size_t k = 0; k < n; ++k) c.profile[k] = cur[k] / std::sqrt(degree[k]);
    for (const auto& nb : g.neighbors(v)) c.links[nb.v] = nb.weight;
    c.strength = g.strength(v);
    c.alive = true;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const auto delta_sigma = [&](std::size_t a, std::size_t b) {
    const double sa = static_cast<double>(comm[a].size);
    const double sb = static_cast<double>(comm[b].size);
    return inv_n * (sa * sb / (sa + sb)) * squared_distance(comm[a].profile, comm[b].profile);
  };

  using Candidate = std::tuple<double, std::size_t, std::size_t>;
  std::set<Candidate> queue;
  std::map<std::pair<std::size_t, std::size_t>, double> key_of;
  const auto push = [&](std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    const double d = delta_sigma(a, b);
    queue.emplace(d, a, b);
    key_of[{a, b}] = d;
  };
  const auto drop = [&](std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    const auto it = key_of.find({a, b});
    if (it == key_of.end()) return;
    queue.erase({it->second, a, b});
    key_of.erase(it);
  };
  for (std::size_t u = 0; u < n; ++u) {
    for (const auto& nb : g.neighbors(u)) {
      if (u < nb.v) push(u, nb.v);
    }
  }

  const double m = g.total_weight();
  double q = 0.0;
  if (m > 0.0) {
    for (std::size_t v = 0; v < n; ++v) q -= (g.strength(v) / (2.0 * m)) * (g.strength(v) / (2.0 * m));
  }
  double best_q = q;
  std::size_t best_merges = 0;
  std::vector<std::pair<std::size_t, std::size_t>> merges;

  std::size_t next_id = n;
  while (!queue.empty()) {
    const auto [d, a, b] = *queue.begin();
    (void)d;
    const double w_ab = comm[a].links.at(b);
    drop(a, b);
    const std::size_t c = next_id++;
    auto& nc = comm[c];
    nc.size = comm[a].size + comm[b].size;
    nc.profile.resize(n);
    const double wa = static_cast<double>(comm[a].size) / static_cast<double>(nc.size);
    const double wb = static_cast<double>(comm[b].size) / static_cast<double>(nc.size);
    for (std::size_t k = 0; k < n; ++k) nc.profile[k] = wa * comm[a].profile[k] + wb * comm[b].profile[k];
    nc.strength = comm[a].strength + comm[b].strength;
    for (std::size_t src : {a, b}) {
      for (const auto& [other, w] : comm[src].links) {
        if (other == a || other == b) continue;
        nc.links[other] += w;
        drop(src, other);
        comm[other].links.erase(src);
      }
    }
    nc.alive = true;
    for (std::size_t src : {a, b}) {
      comm[src].alive = false;
      comm[src].links.clear();
      std::vector<double>().swap(comm[src].profile);
    }
    for (const auto& [other, w] : nc.links) {
      comm[other].links[c] = w;
      push(other, c);
    }

    if (m > 0.0) q += w_ab / m - comm[a].strength * comm[b].strength / (2.0 * m * m);
    merges.emplace_back(a, b);
    if (q > best_q) {
      best_q = q;
      best_merges = merges.size();
    }
  }

  // Replay the first best_merges merges with union-find over dendrogram ids.
  std::vector<std::size_t> parent(next_id);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < best_merges; ++i) {
    parent[merges[i].first] = n + i;
    parent[merges[i].second] = n + i;
  }
  std::vector<std::size_t> label(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t r = v;
    while (parent[r] != r) r = parent[r];
    label[v] = r;
  }
  return make_partition(g, label);
}

std::vector<double> pagerank(const UserGraph& g, const PageRankOptions& o) {
  const std::size_t n = g.vertex_count();
  if (n == 0) throw ValidationError("pagerank needs a nonempty graph");
  if (!(o.damping > 0.0 && o.damping < 1.0)) throw ValidationError("damping must lie in (0, 1)");
  const double nn = static_cast<double>(n);
  std::vector<double> x(n, 1.0 / nn), y(n);
  double change = 0.0;
  for (int iter = 0; iter < o.max_iter; ++iter) {
    double dangling = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (g.strength(v) == 0.0) dangling += x[v];
    }
    const double base = (1.0 - o.damping) / nn + o.damping * dangling / nn;
    std::fill(y.begin(), y.end(), base);
    for (std::size_t u = 0; u < n; ++u) {
      if (g.strength(u) == 0.0) continue;
      const double share = o.damping * x[u] / g.strength(u);
      for (const auto& nb : g.neighbors(u)) y[nb.v] += share * nb.weight;
    }
    change = 0.0;
    for (std::size_t v = 0; v < n; ++v) change += std::abs(y[v] - x[v]);
    std::swap(x, y);
    if (change < o.tol) {
      const double total = std::accumulate(x.begin(), x.end(), 0.0);
      for (auto& v : x) v /= total;
      return x;
    }
  }
  throw ConvergenceError("pagerank did not converge in " + std::to_string(o.max_iter) + " iterations", change);
}

namespace {

// y = A x for the symmetric adjacency.
void multiply(const UserGraph& g, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t u = 0; u < g.vertex_count(); ++u) {
    double s = 0.0;
    for (const auto& nb : g.neighbors(u)) s += nb.weight * x[nb.v];
    y[u] = s;
  }
}

// y = Aᵀ x. Identical to multiply() for undirected graphs, kept separate so
// the hub and authority recurrences read as defined.
void multiply_transpose(const UserGraph& g, const std::vector<double>& x, std::vector<double>& y) {
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t u = 0; u < g.vertex_count(); ++u) {
    for (const auto& nb : g.neighbors(u)) y[nb.v] += nb.weight * x[u];
  }
}

bool normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (s == 0.0) return false;
  s = std::sqrt(s);
  for (auto& x : v) x /= s;
  return true;
}

double l2_change(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

HitsScores hits(const UserGraph& g, const HitsOptions& o) {
  const std::size_t n = g.vertex_count();
  if (n == 0) throw ValidationError("hits needs a nonempty graph");
  HitsScores out;
  if (g.edge_count() == 0) {
    out.hub.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
    out.authority = out.hub;
    return out;
  }
  std::vector<double> hub(n), auth(n), tmp(n), nh(n), na(n);
  for (std::size_t v = 0; v < n; ++v) hub[v] = auth[v] = g.strength(v);
  normalize(hub);
  normalize(auth);
  // ||Mx - (x.Mx) x|| / (x.Mx) for unit x and y = Mx.
  const auto residual = [](const std::vector<double>& x, const std::vector<double>& y) {
    double rho = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) rho += x[i] * y[i];
    if (rho <= 0.0) return std::numeric_limits<double>::infinity();
    double r = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r += (y[i] - rho * x[i]) * (y[i] - rho * x[i]);
    return std::sqrt(r) / rho;
  };
  double change = 0.0;
  for (int iter = 0; iter < o.max_iter; ++iter) {
    multiply_transpose(g, hub, tmp);
    multiply(g, tmp, nh);
    multiply(g, auth, tmp);
    multiply_transpose(g, tmp, na);
    const double res = std::max(residual(hub, nh), residual(auth, na));
    normalize(nh);
    normalize(na);
    change = std::max(l2_change(nh, hub), l2_change(na, auth));
    std::swap(hub, nh);
    std::swap(auth, na);
    // A near-degenerate leading eigenvalue stalls the iterate change while
    // the vector is already an eigenvector to working accuracy.
    if (change < o.tol || res < o.tol) {
      out.hub = std::move(hub);
      out.authority = std::move(auth);
      return out;
    }
  }
  throw ConvergenceError("hits did not converge in " + std::to_string(o.max_iter) + " iterations", change);
}

std::vector<double> betweenness(const UserGraph& g) {
  const std::size_t n = g.vertex_count();
  std::vector<double> score(n, 0.0);
  std::vector<std::size_t> order;
  std::vector<std::vector<std::size_t>> pred(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<long long> dist(n);
  for (std::size_t s = 0; s < n; ++s) {
    order.clear();
    for (auto& p : pred) p.clear();
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<std::size_t> queue{s};
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (const auto& nb : g.neighbors(v)) {
        const std::size_t w = nb.v;
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t w = *it;
      for (std::size_t v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) score[w] += delta[w];
    }
  }
  for (auto& x : score) x /= 2.0;
  return score;
}

std::vector<Point> layout_fr(const UserGraph& g, const LayoutOptions& o) {
  const std::size_t n = g.vertex_count();
  std::vector<Point> pos(n);
  if (n == 0) return pos;
  const double area = o.area > 0.0 ? o.area : static_cast<double>(n * n);
  const double side = std::sqrt(area);
  if (n == 1) {
    pos[0] = {side / 2.0, side / 2.0};
    return pos;
  }
  const double k = std::sqrt(area / static_cast<double>(n));
  const double min_dist = 1e-9 * k;
  Rng rng(o.seed);
  for (auto& p : pos) p = {rng.uniform(0.0, side), rng.uniform(0.0, side)};
  const auto edges = g.edges();
  const double t0 = side / 10.0;
  std::vector<Point> disp(n);
  for (int iter = 0; iter < o.iterations; ++iter) {
    const double temperature = t0 * (1.0 - static_cast<double>(iter) / static_cast<double>(o.iterations));
    std::fill(disp.begin(), disp.end(), Point{0.0, 0.0});
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = u + 1; v < n; ++v) {
        double dx = pos[u].x - pos[v].x;
        double dy = pos[u].y - pos[v].y;
        double d = std::hypot(dx, dy);
        if (d < min_dist) {
          // Coincident vertices: push apart along a fixed direction.
          dx = min_dist;
          dy = 0.0;
          d = min_dist;
        }
        const double f = k * k / d;
        disp[u].x += dx / d * f;
        disp[u].y += dy / d * f;
        disp[v].x -= dx / d * f;
        disp[v].y -= dy / d * f;
      }
    }
    for (const auto& e : edges) {
      const double dx = pos[e.u].x - pos[e.v].x;
      const double dy = pos[e.u].y - pos[e.v].y;
      const double d = std::hypot(dx, dy);
      if (d < min_dist) continue;
      const double f = d * d / k;
      disp[e.u].x -= dx / d * f;
      disp[e.u].y -= dy / d * f;
      disp[e.v].x += dx / d * f;
      disp[e.v].y += dy / d * f;
    }
    for (std::size_t v = 0; v < n; ++v) {
      const double len = std::hypot(disp[v].x, disp[v].y);
      if (len > 0.0) {
        const double step = std::min(len, temperature);
        pos[v].x += disp[v].x / len * step;
        pos[v].y += disp[v].y / len * step;
      }
      pos[v].x = std::clamp(pos[v].x, 0.0, side);
      pos[v].y = std::clamp(pos[v].y, 0.0, side);
    }
  }
  return pos;
}

std::vector<CommunityIsolation> isolation_metrics(const UserGraph& g, const Partition& p) {
  const std::size_t n = g.vertex_count();
  if (p.community_of.size() != n) throw ValidationError("partition does not cover every vertex");
  const std::size_t k = p.communities.size();
  for (std::size_t v = 0; v < n; ++v) {
    if (p.community_of[v] >= k) throw ValidationError("vertex " + g.name(v) + " is missing from the partition");
  }
  std::vector<CommunityIsolation> rows(k);
  for (std::size_t c = 0; c < k; ++c) rows[c] = {c, p.communities[c].size(), 0.0, 0.0, 0.0};
  for (const auto& e : g.edges()) {
    const std::size_t cu = p.community_of[e.u];
    const std::size_t cv = p.community_of[e.v];
    if (cu == cv) {
      rows[cu].internal_weight += e.weight;
    } else {
      rows[cu].external_weight += e.weight;
      rows[cv].external_weight += e.weight;
    }
  }
  for (auto& r : rows) {
    const double total = r.internal_weight + r.external_weight;
    r.isolation = total > 0.0 ? r.external_weight / total : 0.0;
  }
  std::sort(rows.begin(), rows.end(), [](const CommunityIsolation& a, const CommunityIsolation& b) {
    return a.isolation != b.isolation ? a.isolation < b.isolation : a.community < b.community;
  });
  return rows;
}

CentralityReport centralities(const UserGraph& g, const PageRankOptions& pr, const HitsOptions& h) {
  // The graph is immutable, so the three computations run side by side.
  auto hub_auth = std::async(std::launch::async, [&] { return hits(g, h); });
  auto between = std::async(std::launch::async, [&] { return betweenness(g); });
  CentralityReport r;
  r.pagerank = pagerank(g, pr);
  auto hs = hub_auth.get();
  r.hub = std::move(hs.hub);
  r.authority = std::move(hs.authority);
  r.betweenness = between.get();
  return r;
}

graphio::AttributedGraph attributed(const UserGraph& g, const Partition& partition, const CentralityReport& c,
                                    std::span<const Point> layout) {
  graphio::AttributedGraph out;
  out.names = g.names();
  std::vector<double> community(partition.community_of.begin(), partition.community_of.end());
  std::vector<double> xs, ys;
  for (const auto& p : layout) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  out.vertex_attrs = {{"community", std::move(community)}, {"pagerank", c.pagerank},
                      {"hub", c.hub},                       {"authority", c.authority},
                      {"betweenness", c.betweenness},       {"x", std::move(xs)},
                      {"y", std::move(ys)}};
  for (const auto& e : g.edges()) out.edges.push_back({e.u, e.v, e.weight});
  return out;
}

std::string isolation_to_csv(std::span<const CommunityIsolation> rows, const Partition& partition,
                             std::span<const double> pagerank, std::string_view comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "community,size,internal_weight,external_weight,isolation,mean_pagerank\n";
  for (const auto& r : rows) {
    double mean_pr = 0.0;
    for (std::size_t v : partition.communities[r.community]) mean_pr += pagerank[v];
    if (r.size) mean_pr /= static_cast<double>(r.size);
    out << r.community << ',' << r.size << ',' << graphio::format_number(r.internal_weight) << ','
        << graphio::format_number(r.external_weight) << ',' << graphio::format_number(r.isolation) << ','
        << graphio::format_number(mean_pr) << '\n';
  }
  return out.str();
}

}  // namespace disinfo::graph

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace disinfo::graphio {

// Undirected graph with named vertices and numeric attributes, used for
// GraphML/DOT export.
struct AttributedGraph {
  std::vector<std::string> names;
  // (attribute name, one value per vertex)
  std::vector<std::pair<std::string, std::vector<double>>> vertex_attrs;
  struct Edge {
    std::size_t u;
    std::size_t v;
    double weight;
  };
  std::vector<Edge> edges;
};

std::string to_graphml(const AttributedGraph& g);
std::string to_dot(const AttributedGraph& g);

// Shortest decimal representation that round-trips.
std::string format_number(double v);

}  // namespace disinfo::graphio

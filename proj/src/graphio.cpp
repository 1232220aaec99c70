#include "disinfo/graphio.hpp"

#include <charconv>
#include <sstream>

namespace disinfo::graphio {
namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c == '\n' ? ' ' : c);
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_graphml(const AttributedGraph& g) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n";
  out << "  <key id=\"name\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n";
  for (std::size_t a = 0; a < g.vertex_attrs.size(); ++a) {
    out << "  <key id=\"v" << a << "\" for=\"node\" attr.name=\"" << xml_escape(g.vertex_attrs[a].first)
        << "\" attr.type=\"double\"/>\n";
  }
  out << "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n";
  out << "  <graph id=\"G\" edgedefault=\"undirected\">\n";
  for (std::size_t i = 0; i < g.names.size(); ++i) {
    out << "    <node id=\"n" << i << "\">\n      <data key=\"name\">" << xml_escape(g.names[i]) << "</data>\n";
    for (std::size_t a = 0; a < g.vertex_attrs.size(); ++a) {
      out << "      <data key=\"v" << a << "\">" << format_number(g.vertex_attrs[a].second[i]) << "</data>\n";
    }
    out << "    </node>\n";
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    out << "    <edge id=\"e" << e << "\" source=\"n" << g.edges[e].u << "\" target=\"n" << g.edges[e].v
        << "\">\n      <data key=\"weight\">" << format_number(g.edges[e].weight) << "</data>\n    </edge>\n";
  }
  out << "  </graph>\n</graphml>\n";
  return out.str();
}

std::string to_dot(const AttributedGraph& g) {
  std::ostringstream out;
  out << "graph G {\n";
  for (std::size_t i = 0; i < g.names.size(); ++i) {
    out << "  n" << i << " [label=" << dot_quote(g.names[i]);
    for (const auto& [name, values] : g.vertex_attrs) out << ", " << name << "=" << format_number(values[i]);
    out << "];\n";
  }
  for (const auto& e : g.edges) {
    out << "  n" << e.u << " -- n" << e.v << " [weight=" << format_number(e.weight) << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace disinfo::graphio

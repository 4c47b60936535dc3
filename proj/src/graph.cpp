#include "dgon/graph.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dgon/errors.hpp"
#include "dgon/random.hpp"

namespace dgon {

using nlohmann::json;

Graph::Graph(std::size_t node_count, std::vector<Edge> edges, std::vector<std::string> labels)
    : adjacency_(node_count), labels_(std::move(labels)) {
  if (!labels_.empty() && labels_.size() != node_count) {
    throw GraphError("label count " + std::to_string(labels_.size()) +
                     " does not match node count " + std::to_string(node_count));
  }
  for (auto [u, v] : edges) {
    if (u >= node_count || v >= node_count) {
      throw GraphError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                       ") has an endpoint outside [0, " + std::to_string(node_count) + ")");
    }
    if (u == v) throw GraphError("self-loop at node " + std::to_string(u));
    edges_.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(edges_.begin(), edges_.end());
  if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end()) {
    throw GraphError("duplicate edge (" + std::to_string(dup->first) + ", " +
                     std::to_string(dup->second) + ")");
  }
  for (auto [u, v] : edges_) {
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

Graph Graph::path(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return Graph(n, std::move(edges));
}

Graph Graph::cycle(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  if (n > 2) edges.emplace_back(n - 1, 0);
  return Graph(n, std::move(edges));
}

Graph Graph::complete(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return Graph(n, std::move(edges));
}

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  const auto nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

Tensor neighbor_mean(const Graph& g, const Tensor& states) {
  const std::size_t n = g.node_count();
  const std::size_t rows = states.rank() == 1 ? states.size() : states.rows();
  if (rows != n || states.rank() == 0 || states.rank() > 2) {
    throw DimensionError("neighbor_mean: states " + states.shape_string() + " for " +
                         std::to_string(n) + " nodes");
  }
  // A rank-1 tensor holds one feature per node.
  const std::size_t d = states.rank() == 1 ? 1 : states.cols();
  Tensor out(states.shape());
  const auto in = states.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = g.neighbors(i);
    if (nbrs.empty()) continue;
    for (std::size_t j : nbrs)
      for (std::size_t c = 0; c < d; ++c) dst[i * d + c] += in[j * d + c];
    const double inv = 1.0 / static_cast<double>(nbrs.size());
    for (std::size_t c = 0; c < d; ++c) dst[i * d + c] *= inv;
  }
  return out;
}

bool is_connected(const Graph& g) {
  const std::size_t n = g.node_count();
  if (n == 0) return false;
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : g.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  return reached == n;
}

Graph induced_subgraph(const Graph& g, const SubgraphSpec& spec) {
  std::vector<std::size_t> nodes = spec.nodes;
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    throw GraphError("subgraph node list contains duplicates");
  }
  if (nodes.empty()) throw GraphError("subgraph node list is empty");
  if (nodes.back() >= g.node_count()) {
    throw GraphError("subgraph node " + std::to_string(nodes.back()) + " out of range");
  }
  std::vector<std::size_t> new_index(g.node_count(), SIZE_MAX);
  for (std::size_t i = 0; i < nodes.size(); ++i) new_index[nodes[i]] = i;
  std::vector<Edge> edges;
  for (auto [u, v] : g.edges()) {
    if (new_index[u] != SIZE_MAX && new_index[v] != SIZE_MAX) {
      edges.emplace_back(new_index[u], new_index[v]);
    }
  }
  std::vector<std::string> labels;
  if (!g.labels().empty()) {
    for (std::size_t u : nodes) labels.push_back(g.labels()[u]);
  }
  Graph sub(nodes.size(), std::move(edges), std::move(labels));
  if (!is_connected(sub)) throw GraphError("subgraph not connected");
  return sub;
}

Tensor laplacian(const Graph& g) {
  const std::size_t n = g.node_count();
  Tensor L({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    L(i, i) = static_cast<double>(g.degree(i));
    for (std::size_t j : g.neighbors(i)) L(i, j) = -1.0;
  }
  return L;
}

Graph permute(const Graph& g, std::span<const std::size_t> perm) {
  const std::size_t n = g.node_count();
  if (perm.size() != n) throw DimensionError("permutation length does not match node count");
  std::vector<char> hit(n, 0);
  for (std::size_t p : perm) {
    if (p >= n || hit[p]) throw ContractError("not a permutation");
    hit[p] = 1;
  }
  std::vector<Edge> edges;
  for (auto [u, v] : g.edges()) edges.emplace_back(perm[u], perm[v]);
  std::vector<std::string> labels;
  if (!g.labels().empty()) {
    labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) labels[perm[i]] = g.labels()[i];
  }
  return Graph(n, std::move(edges), std::move(labels));
}

Graph random_connected_graph(std::size_t n, double extra_edge_probability, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<Edge> edges;
  std::vector<std::vector<char>> present(n, std::vector<char>(n, 0));
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t u = order[k];
    const std::size_t v = order[rng.index(k)];
    edges.emplace_back(u, v);
    present[u][v] = present[v][u] = 1;
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (!present[u][v] && rng.uniform() < extra_edge_probability) edges.emplace_back(u, v);
    }
  }
  return Graph(n, std::move(edges));
}

Graph graph_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw GraphError(std::string("graph file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges")) {
    throw GraphError("graph file requires 'nodes' and 'edges'");
  }
  for (const auto& [key, _] : doc.items()) {
    if (key != "nodes" && key != "edges") throw GraphError("unknown graph key '" + key + "'");
  }
  std::size_t n = 0;
  std::vector<std::string> labels;
  const json& nodes = doc["nodes"];
  if (nodes.is_number_unsigned() || nodes.is_number_integer()) {
    if (nodes.get<long long>() < 0) throw GraphError("negative node count");
    n = nodes.get<std::size_t>();
  } else if (nodes.is_array()) {
    n = nodes.size();
    for (const auto& l : nodes) labels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
  } else {
    throw GraphError("'nodes' must be a count or an array of labels");
  }
  std::vector<Edge> edges;
  if (!doc["edges"].is_array()) throw GraphError("'edges' must be an array");
  for (const auto& e : doc["edges"]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
        !e[1].is_number_integer() || e[0].get<long long>() < 0 || e[1].get<long long>() < 0) {
      throw GraphError("edge entries must be two non-negative integer indices, got " + e.dump());
    }
    edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  return Graph(n, std::move(edges), std::move(labels));
}

std::string graph_to_json_text(const Graph& g) {
  json doc;
  if (g.labels().empty()) {
    doc["nodes"] = g.node_count();
  } else {
    doc["nodes"] = g.labels();
  }
  json edges = json::array();
  for (auto [u, v] : g.edges()) edges.push_back({u, v});
  doc["edges"] = std::move(edges);
  return doc.dump() + "\n";
}

Graph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open graph file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return graph_from_json_text(buf.str());
}

void save_graph(const Graph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write graph file " + path.string());
  out << graph_to_json_text(g);
}

std::string graph_id(const Graph& g) {
  std::string canonical = std::to_string(g.node_count()) + ":";
  for (auto [u, v] : g.edges()) canonical += std::to_string(u) + "-" + std::to_string(v) + ",";
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(canonical.data()),
                         static_cast<uInt>(canonical.size()));
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
  return "g" + std::to_string(g.node_count()) + "-" + hex;
}

}  // namespace dgon

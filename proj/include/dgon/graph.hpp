#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgon/tensor.hpp"

namespace dgon {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected simple graph stored as sorted adjacency lists. Immutable.
class Graph {
 public:
  Graph() = default;
  /// Throws GraphError on self-loops, duplicate edges or out-of-range endpoints.
  Graph(std::size_t node_count, std::vector<Edge> edges, std::vector<std::string> labels = {});

  static Graph path(std::size_t n);
  static Graph cycle(std::size_t n);
  static Graph complete(std::size_t n);

  std::size_t node_count() const noexcept { return adjacency_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  /// Edges as (u, v) with u < v, lexicographically sorted.
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::span<const std::size_t> neighbors(std::size_t node) const { return adjacency_.at(node); }
  std::size_t degree(std::size_t node) const { return adjacency_.at(node).size(); }
  bool has_edge(std::size_t u, std::size_t v) const;
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.adjacency_.size() == b.adjacency_.size() && a.edges_ == b.edges_;
  }

 private:
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<Edge> edges_;
  std::vector<std::string> labels_;
};

/// Parent-node indices of a subgraph region; kept sorted and unique.
struct SubgraphSpec {
  std::vector<std::size_t> nodes;
};

/// Row i is the mean of the rows of i's neighbors (zero for isolated nodes).
/// `states` is [|V| x d], or [|V|] for d = 1.
Tensor neighbor_mean(const Graph& g, const Tensor& states);

/// True iff every node is reachable from node 0.
bool is_connected(const Graph& g);

/// Re-indexed induced subgraph. Throws GraphError("subgraph not connected")
/// when the result is disconnected, GraphError on invalid indices.
Graph induced_subgraph(const Graph& g, const SubgraphSpec& spec);

/// Dense L = D - A.
Tensor laplacian(const Graph& g);

/// Node i of `g` becomes node perm[i] of the result.
Graph permute(const Graph& g, std::span<const std::size_t> perm);

/// Random spanning tree plus each remaining edge with probability `extra_edge_probability`.
Graph random_connected_graph(std::size_t n, double extra_edge_probability, std::uint64_t seed);

// JSON graph files: {"nodes": <count | [labels]>, "edges": [[u, v], ...]}
Graph graph_from_json_text(const std::string& text);
std::string graph_to_json_text(const Graph& g);
Graph load_graph(const std::filesystem::path& path);
void save_graph(const Graph& g, const std::filesystem::path& path);

/// Stable identifier derived from node count and edge set, e.g. "g6-1a2b3c4d".
std::string graph_id(const Graph& g);

}  // namespace dgon

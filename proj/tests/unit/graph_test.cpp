#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "dgon/errors.hpp"
#include "dgon/graph.hpp"
#include "dgon/random.hpp"

using namespace dgon;

TEST(Graph, RejectsInvalidEdges) {
  EXPECT_THROW(Graph(3, {{0, 0}}), GraphError);
  EXPECT_THROW(Graph(3, {{0, 1}, {1, 0}}), GraphError);
  EXPECT_THROW(Graph(3, {{0, 3}}), GraphError);
}

TEST(Graph, AdjacencyIsSymmetric) {
  Graph g(4, {{2, 0}, {1, 2}, {3, 1}});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j : g.neighbors(i)) EXPECT_TRUE(g.has_edge(j, i));
  }
}

TEST(NeighborMean, Path) {
  Tensor m = neighbor_mean(Graph::path(3), Tensor::vector({2, 4, 6}));
  EXPECT_EQ(m, Tensor::vector({4, 4, 4}));
}

TEST(NeighborMean, IsolatedNodeIsZero) {
  Tensor m = neighbor_mean(Graph(2, {}), Tensor::vector({5, -7}));
  EXPECT_EQ(m, Tensor::vector({0, 0}));
}

TEST(NeighborMean, Triangle) {
  Tensor m = neighbor_mean(Graph::complete(3), Tensor::vector({1, 2, 3}));
  EXPECT_DOUBLE_EQ(m[0], 2.5);
  EXPECT_DOUBLE_EQ(m[1], 2.0);
  EXPECT_DOUBLE_EQ(m[2], 1.5);
}

TEST(NeighborMean, RowCountMismatch) {
  EXPECT_THROW(neighbor_mean(Graph::path(3), Tensor::vector({1, 2})), DimensionError);
}

TEST(NeighborMean, PermutationEquivariant) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    Graph g = random_connected_graph(7, 0.3, trial);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Tensor x({7, 3});
    for (auto& v : x.data()) v = u(gen);
    Tensor px({7, 3});
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t c = 0; c < 3; ++c) px(perm[i], c) = x(i, c);
    }
    Tensor y = neighbor_mean(g, x);
    Tensor py = neighbor_mean(permute(g, perm), px);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(py(perm[i], c), y(i, c), 1e-12);
    }
  }
}

TEST(Connectivity, Examples) {
  EXPECT_TRUE(is_connected(Graph(1, {})));
  EXPECT_FALSE(is_connected(Graph(2, {})));
  EXPECT_TRUE(is_connected(Graph::path(6)));
}

TEST(InducedSubgraph, FullSetIsIdentity) {
  Graph g = random_connected_graph(8, 0.4, 2);
  std::vector<std::size_t> all(8);
  std::iota(all.begin(), all.end(), 0);
  Graph s = induced_subgraph(g, {all});
  EXPECT_EQ(s, g);
  EXPECT_EQ(induced_subgraph(s, {all}), s);
}

TEST(InducedSubgraph, TrianglePair) {
  Graph s = induced_subgraph(Graph::complete(3), {{0, 1}});
  EXPECT_EQ(s.node_count(), 2u);
  EXPECT_EQ(s.edge_count(), 1u);
}

TEST(InducedSubgraph, DisconnectedResult) {
  try {
    induced_subgraph(Graph::path(4), {{0, 2}});
    FAIL();
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("subgraph not connected"), std::string::npos);
  }
  EXPECT_THROW(induced_subgraph(Graph::path(4), {{0, 9}}), GraphError);
}

TEST(InducedSubgraph, KeepsExactlyInternalEdges) {
  Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
  Graph s = induced_subgraph(g, {{1, 2, 3}});
  EXPECT_EQ(s.edges(), (std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(Laplacian, Examples) {
  Tensor tri = laplacian(Graph::complete(3));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(tri(i, j), i == j ? 2.0 : -1.0);
  }
  Tensor empty = laplacian(Graph(3, {}));
  for (double v : empty.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(laplacian(Graph::path(3)), Tensor::matrix({{1, -1, 0}, {-1, 2, -1}, {0, -1, 1}}));
}

TEST(Laplacian, SymmetricRowsSumToZeroAndPsd) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    Graph g = random_connected_graph(9, 0.25, 100 + trial);
    Tensor L = laplacian(g);
    for (std::size_t i = 0; i < 9; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        row += L(i, j);
        EXPECT_EQ(L(i, j), L(j, i));
      }
      EXPECT_EQ(row, 0.0);
    }
    std::vector<double> x(9);
    for (auto& v : x) v = nd(gen);
    double quad = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      for (std::size_t j = 0; j < 9; ++j) quad += x[i] * L(i, j) * x[j];
    }
    EXPECT_GE(quad, -1e-12);
  }
}

TEST(RandomGraph, ConnectedAndSeeded) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Graph g = random_connected_graph(12, 0.1, s);
    EXPECT_TRUE(is_connected(g));
    EXPECT_EQ(g, random_connected_graph(12, 0.1, s));
  }
}

TEST(GraphJson, RoundTripAndLabels) {
  Graph g(3, {{0, 1}, {1, 2}}, {"a", "b", "c"});
  Graph back = graph_from_json_text(graph_to_json_text(g));
  EXPECT_EQ(back, g);
  EXPECT_EQ(back.labels(), g.labels());
  EXPECT_EQ(graph_from_json_text(R"({"nodes": 2, "edges": [[0, 1]]})"), Graph::path(2));
  EXPECT_THROW(graph_from_json_text(R"({"nodes": 2, "edge": []})"), Error);
  EXPECT_THROW(graph_from_json_text(R"({"nodes": 2, "edges": [[0, 0]]})"), GraphError);
}

TEST(GraphId, DependsOnTopologyOnly) {
  EXPECT_EQ(graph_id(Graph::path(4)), graph_id(Graph(4, {{2, 3}, {1, 2}, {0, 1}})));
  EXPECT_NE(graph_id(Graph::path(4)), graph_id(Graph::cycle(4)));
}

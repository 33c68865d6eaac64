#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "gmeta/graph.hpp"
#include "test_util.hpp"

namespace gmeta {
namespace {

std::set<NodeId> node_set(const Subgraph& s) { return {s.global_ids.begin(), s.global_ids.end()}; }

std::set<std::pair<NodeId, NodeId>> global_edges(const Subgraph& s) {
  std::set<std::pair<NodeId, NodeId>> out;
  for (const Edge& e : s.graph.edges()) {
    NodeId a = s.global_ids[e.u], b = s.global_ids[e.v];
    out.insert({std::min(a, b), std::max(a, b)});
  }
  return out;
}

TEST(Graph, RejectsBadEdges) {
  EXPECT_THROW(Graph(3, {{0, 3}}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{1, 1}}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{0, 1}, {1, 0}}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{0, 1}}, Tensor(2, 4)), std::invalid_argument);
}

TEST(Graph, NeighborsAreSortedAndSymmetric) {
  Graph g(4, {{3, 0}, {0, 1}, {2, 0}});
  auto nb = g.neighbors(0);
  EXPECT_EQ(std::vector<NodeId>(nb.begin(), nb.end()), (std::vector<NodeId>{1, 2, 3}));
  EXPECT_TRUE(g.has_edge(3, 0));
  EXPECT_TRUE(g.has_edge(0, 3));
  EXPECT_FALSE(g.has_edge(1, 2));
}

TEST(Subgraph, PathOneHop) {
  const Graph g = testing::path_graph(5);
  const Subgraph s = extract_subgraph(g, 2, 1);
  EXPECT_EQ(node_set(s), (std::set<NodeId>{1, 2, 3}));
  EXPECT_EQ(global_edges(s), (std::set<std::pair<NodeId, NodeId>>{{1, 2}, {2, 3}}));
  EXPECT_EQ(s.global_ids[s.centroid_local], 2u);
  EXPECT_EQ(s.hop, 1);
}

TEST(Subgraph, ZeroHopIsSingleNode) {
  Rng rng(2);
  const Graph g = testing::erdos_renyi(20, 0.3, rng);
  const Subgraph s = extract_subgraph(g, 7, 0);
  EXPECT_EQ(s.graph.node_count(), 1u);
  EXPECT_EQ(s.graph.edge_count(), 0u);
  EXPECT_EQ(s.global_ids[0], 7u);
}

TEST(Subgraph, StarCapKeepsCentroid) {
  const Graph g = testing::star_graph(1500);
  Rng rng(3);
  const Subgraph s = extract_subgraph(g, 0, 1, kDefaultSubgraphCap, rng);
  EXPECT_EQ(s.graph.node_count(), 1000u);
  EXPECT_EQ(s.global_ids[s.centroid_local], 0u);
  EXPECT_EQ(s.graph.edge_count(), 999u);
  EXPECT_EQ(node_set(s).size(), 1000u);
}

TEST(Subgraph, InvalidNodeErrors) {
  const Graph g = testing::path_graph(3);
  try {
    extract_subgraph(g, 3, 1);
    FAIL();
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("node out of range"), std::string::npos);
  }
}

TEST(Subgraph, MatchesFloydWarshallAndIsMonotone) {
  Rng rng(12345);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<std::size_t> nd(2, 50);
    std::uniform_real_distribution<double> pd(0.1, 0.4);
    const Graph g = testing::erdos_renyi(nd(rng), pd(rng), rng);
    const auto d = testing::floyd_warshall(g);
    for (NodeId u = 0; u < g.node_count(); ++u) {
      std::set<NodeId> prev;
      for (int h = 0; h <= 3; ++h) {
        const Subgraph s = extract_subgraph(g, u, h);
        std::set<NodeId> expect;
        for (NodeId v = 0; v < g.node_count(); ++v)
          if (d[u][v] <= static_cast<std::size_t>(h)) expect.insert(v);
        ASSERT_EQ(node_set(s), expect);
        EXPECT_TRUE(std::includes(expect.begin(), expect.end(), prev.begin(), prev.end()));
        prev = expect;
        // Induced: every edge of g among the kept nodes is present.
        std::size_t induced = 0;
        for (const Edge& e : g.edges()) induced += expect.count(e.u) && expect.count(e.v);
        EXPECT_EQ(s.graph.edge_count(), induced);
      }
    }
  }
}

TEST(Subgraph, LargeHopCoversConnectedGraph) {
  const Graph g = testing::cycle_graph(9);
  for (NodeId u = 0; u < 9; ++u) EXPECT_EQ(extract_subgraph(g, u, 4).graph.node_count(), 9u);
}

TEST(Subgraph, FeaturesAreSliced) {
  Tensor f(4, 2);
  for (std::size_t i = 0; i < 4; ++i) f(i, 0) = static_cast<double>(i), f(i, 1) = -1.0 * i;
  Graph g(4, {{0, 1}, {1, 2}, {2, 3}}, f);
  const Subgraph s = extract_subgraph(g, 3, 1);
  for (std::size_t i = 0; i < s.global_ids.size(); ++i)
    EXPECT_EQ(s.graph.features()(i, 0), static_cast<double>(s.global_ids[i]));
}

TEST(PairSubgraph, UnionOfBalls) {
  const Graph g = testing::path_graph(3);
  const Subgraph s = extract_pair_subgraph(g, 0, 2, 1);
  EXPECT_EQ(node_set(s), (std::set<NodeId>{0, 1, 2}));
  EXPECT_EQ(global_edges(s), (std::set<std::pair<NodeId, NodeId>>{{0, 1}, {1, 2}}));
  EXPECT_EQ(s.global_ids[s.centroid_local], 0u);
  ASSERT_TRUE(s.pair_local);
  EXPECT_EQ(s.global_ids[*s.pair_local], 2u);
}

TEST(PairSubgraph, TargetEdgeRemovedOnlyWhenFlagged) {
  const Graph g = testing::cycle_graph(5);
  auto has = [](const Subgraph& s) { return global_edges(s).count({1, 2}) > 0; };
  EXPECT_FALSE(has(extract_pair_subgraph(g, 1, 2, 1, true)));
  EXPECT_TRUE(has(extract_pair_subgraph(g, 1, 2, 1, false)));
  EXPECT_THROW(extract_pair_subgraph(g, 1, 1, 1), std::invalid_argument);
}

TEST(PairSubgraph, EqualsUnionOfSingleSubgraphsOnRandomGraphs) {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const Graph g = testing::erdos_renyi(20, 0.12, rng);
    std::uniform_int_distribution<NodeId> pick(0, 19);
    NodeId u = pick(rng), v = pick(rng);
    if (u == v) continue;
    for (int h = 0; h <= 2; ++h) {
      auto su = node_set(extract_subgraph(g, u, h)), sv = node_set(extract_subgraph(g, v, h));
      su.insert(sv.begin(), sv.end());
      EXPECT_EQ(node_set(extract_pair_subgraph(g, u, v, h, false)), su);
    }
  }
}

TEST(PairSubgraph, DisjointBallsGiveTwoComponents) {
  Graph g(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}});
  const Subgraph s = extract_pair_subgraph(g, 0, 5, 1);
  EXPECT_EQ(node_set(s), (std::set<NodeId>{0, 1, 4, 5}));
  EXPECT_FALSE(shortest_path_dist(s.graph, 0, *s.pair_local).has_value());
}

TEST(ShortestPath, Basics) {
  const Graph p = testing::path_graph(4);
  EXPECT_EQ(shortest_path_dist(p, 2, 2), 0u);
  EXPECT_EQ(shortest_path_dist(p, 0, 3), 3u);
  Graph two(4, {{0, 1}, {2, 3}});
  EXPECT_FALSE(shortest_path_dist(two, 0, 3).has_value());
  EXPECT_THROW(shortest_path_dist(two, 0, 9), std::out_of_range);
}

TEST(DegreeFeatures, SaturatingOneHot) {
  std::vector<Edge> e;
  for (NodeId i = 1; i <= 9; ++i) e.push_back({0, i});
  e.push_back({1, 2});
  Graph g(11, e);
  const Tensor f = degree_features(g, 4);
  EXPECT_EQ(std::vector<double>(f.row(10).begin(), f.row(10).end()), (std::vector<double>{1, 0, 0, 0}));
  EXPECT_EQ(std::vector<double>(f.row(1).begin(), f.row(1).end()), (std::vector<double>{0, 0, 1, 0}));
  EXPECT_EQ(std::vector<double>(f.row(0).begin(), f.row(0).end()), (std::vector<double>{0, 0, 0, 1}));
}

TEST(NegativeEdges, CompleteGraphZeroCount) {
  Graph tri(3, {{0, 1}, {1, 2}, {0, 2}});
  Rng rng(1);
  EXPECT_TRUE(sample_negative_edges(tri, 0, rng).empty());
  EXPECT_THROW(sample_negative_edges(tri, 1, rng), std::invalid_argument);
}

TEST(NegativeEdges, FourCycleGivesDiagonals) {
  const Graph c4 = testing::cycle_graph(4);
  // Oracle: enumerate the complement directly.
  std::set<std::pair<NodeId, NodeId>> expect;
  for (NodeId a = 0; a < 4; ++a)
    for (NodeId b = a + 1; b < 4; ++b)
      if (!c4.has_edge(a, b)) expect.insert({a, b});
  ASSERT_EQ(expect.size(), 2u);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::set<std::pair<NodeId, NodeId>> got;
    for (const Edge& e : sample_negative_edges(c4, 2, rng)) got.insert({e.u, e.v});
    EXPECT_EQ(got, expect);
  }
}

TEST(NegativeEdges, SparseRegimeDrawsValidDistinctPairs) {
  Rng rng(8);
  const Graph g = testing::erdos_renyi(60, 0.05, rng);
  const auto neg = sample_negative_edges(g, 200, rng);
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const Edge& e : neg) {
    EXPECT_NE(e.u, e.v);
    EXPECT_FALSE(g.has_edge(e.u, e.v));
    EXPECT_TRUE(seen.insert({e.u, e.v}).second);
  }
  EXPECT_EQ(neg.size(), 200u);
}

class GraphIo : public ::testing::Test {
 protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "gmeta_graph_io";
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
  void write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
  }
};

TEST_F(GraphIo, RoundTrip) {
  Rng rng(5);
  const Graph g = testing::erdos_renyi(15, 0.3, rng);
  const Tensor f = testing::random_tensor(15, 3, rng);
  std::vector<LabelId> labels(15, kUnlabeled);
  labels[2] = 4;
  labels[9] = 0;
  write_edge_list(dir / "e.tsv", g.edges());
  write_features(dir / "f.txt", f);
  write_labels(dir / "l.tsv", labels);
  Graph back(15, read_edge_list(dir / "e.tsv"), read_features(dir / "f.txt"),
             read_labels(dir / "l.tsv", 15));
  EXPECT_TRUE(std::equal(g.edges().begin(), g.edges().end(), back.edges().begin(), back.edges().end()));
  EXPECT_EQ(back.features(), f);
  EXPECT_EQ(std::vector<LabelId>(back.labels().begin(), back.labels().end()), labels);
}

TEST_F(GraphIo, DiagnosticsCarryFileAndLine) {
  write("dup.tsv", "0\t1\n1\t2\n2\t1\n");
  try {
    read_edge_list(dir / "dup.tsv");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("dup.tsv:3"), std::string::npos) << e.what();
  }
  write("bad.tsv", "0\t1\nx\t2\n");
  EXPECT_THROW(read_edge_list(dir / "bad.tsv"), std::runtime_error);
  write("ragged.txt", "1 2\n3\n");
  EXPECT_THROW(read_features(dir / "ragged.txt"), std::runtime_error);
}

}  // namespace
}  // namespace gmeta

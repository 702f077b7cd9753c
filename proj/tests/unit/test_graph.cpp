#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "margmc/error.hpp"
#include "margmc/graph.hpp"

using namespace margmc;

namespace {

BidirectedGraph chain4() {
  return BidirectedGraph::from_edge_list({{"A", 2}, {"B", 2}, {"C", 2}, {"D", 2}},
                                         {{"A", "B"}, {"B", "C"}, {"C", "D"}});
}

VertexSet set_of(const BidirectedGraph& g, const std::string& names) {
  VertexSet s;
  for (char c : names) s = s.with(g.index_of(std::string(1, c)));
  return s;
}

// Union-find oracle for connectivity of an induced subgraph.
bool connected_oracle(const BidirectedGraph& g, VertexSet s) {
  std::vector<int> parent(g.size());
  for (int i = 0; i < g.size(); ++i) parent[i] = i;
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (auto [u, v] : g.edges()) {
    if (s.contains(u) && s.contains(v)) parent[find(u)] = find(v);
  }
  std::set<int> roots;
  for (int v : s.members()) roots.insert(find(v));
  return roots.size() <= 1;
}

std::vector<BidirectedGraph> small_graphs() {
  std::vector<BidirectedGraph> out;
  const std::vector<std::pair<std::string, int>> vs = {{"A", 2}, {"B", 2}, {"C", 2}, {"D", 2}};
  const std::vector<std::pair<std::string, std::string>> all = {
      {"A", "B"}, {"A", "C"}, {"A", "D"}, {"B", "C"}, {"B", "D"}, {"C", "D"}};
  for (int mask = 0; mask < 64; ++mask) {
    std::vector<std::pair<std::string, std::string>> es;
    for (int e = 0; e < 6; ++e) {
      if (mask >> e & 1) es.push_back(all[e]);
    }
    out.push_back(BidirectedGraph::from_edge_list(vs, es));
  }
  return out;
}

}  // namespace

TEST(Graph, ParsesFormatWithComments) {
  std::istringstream in("# four chain\nvar A 2\nvar B 3 # trailing\n\nedge A B\n");
  const auto g = parse_graph(in);
  ASSERT_EQ(g.size(), 2);
  EXPECT_EQ(g.levels(1), 3);
  EXPECT_TRUE(g.adjacent(0, 1));
}

TEST(Graph, SingleVertex) {
  const auto g = BidirectedGraph::from_edge_list({{"A", 2}}, {});
  EXPECT_EQ(g.size(), 1);
  EXPECT_TRUE(g.edges().empty());
  EXPECT_TRUE(disconnected_sets(g).empty());
}

TEST(Graph, RejectsBadInput) {
  EXPECT_THROW(BidirectedGraph::from_edge_list({{"A", 2}}, {{"A", "A"}}), InputError);
  EXPECT_THROW(BidirectedGraph::from_edge_list({{"A", 2}, {"A", 2}}, {}), InputError);
  EXPECT_THROW(BidirectedGraph::from_edge_list({{"A", 2}}, {{"A", "Z"}}), InputError);
  EXPECT_THROW(BidirectedGraph::from_edge_list({{"A", 1}}, {}), InputError);
  std::istringstream bad("var A two\n");
  EXPECT_THROW(parse_graph(bad), InputError);
  std::istringstream unknown("vertex A 2\n");
  EXPECT_THROW(parse_graph(unknown), InputError);
  EXPECT_THROW(read_graph_file("/nonexistent/graph"), InputError);
}

TEST(Graph, DisconnectedSetsOfChain) {
  const auto g = chain4();
  const auto ds = disconnected_sets(g);
  const std::vector<VertexSet> expected = {set_of(g, "AC"), set_of(g, "AD"), set_of(g, "BD"),
                                           set_of(g, "ABD"), set_of(g, "ACD")};
  EXPECT_EQ(ds, expected);
}

TEST(Graph, DisconnectedSetsMatchUnionFind) {
  for (const auto& g : small_graphs()) {
    std::vector<VertexSet> oracle;
    for (std::uint32_t b = 1; b < 16; ++b) {
      const VertexSet s(b);
      if (s.size() >= 2 && !connected_oracle(g, s)) oracle.push_back(s);
    }
    std::sort(oracle.begin(), oracle.end(), cardinality_lex_less);
    EXPECT_EQ(disconnected_sets(g), oracle);
  }
}

TEST(Graph, TorusDisconnectedSets) {
  const auto g = read_graph_file(std::string(MARGMC_DATA_DIR) + "/torus.graph");
  std::vector<std::string> labels;
  for (auto s : disconnected_sets(g)) labels.push_back(g.label(s));
  EXPECT_EQ(labels, (std::vector<std::string>{"AP", "AS", "IS", "AIS", "APS"}));
}

TEST(Graph, ImpliedIndependencies) {
  const auto g = chain4();
  const auto ind = implied_independencies(g);
  ASSERT_EQ(ind.size(), 2u);
  EXPECT_EQ(ind[0], (Independence{set_of(g, "AB"), set_of(g, "D")}));
  EXPECT_EQ(ind[1], (Independence{set_of(g, "A"), set_of(g, "CD")}));

  const auto complete = small_graphs().back();
  EXPECT_TRUE(implied_independencies(complete).empty());
  const auto empty2 = BidirectedGraph::from_edge_list({{"A", 2}, {"B", 2}}, {});
  const auto pair = implied_independencies(empty2);
  ASSERT_EQ(pair.size(), 1u);
  EXPECT_EQ(pair[0], (Independence{VertexSet::single(0), VertexSet::single(1)}));
}

TEST(Graph, Homogeneity) {
  EXPECT_FALSE(is_homogeneous(chain4()));
  const auto cycle = BidirectedGraph::from_edge_list(
      {{"A", 2}, {"B", 2}, {"C", 2}, {"D", 2}}, {{"A", "B"}, {"B", "C"}, {"C", "D"}, {"A", "D"}});
  EXPECT_FALSE(is_homogeneous(cycle));
  const auto three = BidirectedGraph::from_edge_list({{"A", 2}, {"B", 2}, {"C", 2}}, {{"A", "B"}});
  EXPECT_TRUE(is_homogeneous(three));
}

TEST(AugmentedDag, ChainMatchesFigure) {
  const auto dag = augmented_dag(chain4(), 3);
  ASSERT_EQ(dag.size(), 5);
  EXPECT_EQ(dag.n_latent(), 1);
  EXPECT_EQ(dag.variable(4).name, "L1");
  EXPECT_EQ(dag.levels(4), 3);
  EXPECT_TRUE(dag.parents(0).empty());
  EXPECT_EQ(dag.parents(1), (std::vector<int>{0, 4}));
  EXPECT_EQ(dag.parents(2), (std::vector<int>{3, 4}));
  EXPECT_TRUE(dag.parents(3).empty());
  EXPECT_TRUE(dag.parents(4).empty());
  EXPECT_TRUE(dag.is_acyclic());
}

TEST(AugmentedDag, TrivialCases) {
  const auto pair = augmented_dag(BidirectedGraph::from_edge_list({{"A", 2}, {"B", 2}}, {{"A", "B"}}), 2);
  EXPECT_EQ(pair.n_latent(), 0);
  EXPECT_EQ(pair.parents(1), (std::vector<int>{0}));
  const auto empty =
      augmented_dag(BidirectedGraph::from_edge_list({{"A", 2}, {"B", 2}, {"C", 2}}, {}), 2);
  EXPECT_EQ(empty.n_latent(), 0);
  for (int v = 0; v < 3; ++v) EXPECT_TRUE(empty.parents(v).empty());
}

// Markov equivalence on the observed margin: X and Y are d-separated given the
// empty set exactly when no bi-directed edge joins them.
TEST(AugmentedDag, MarginalIndependenciesMatchBruteForce) {
  for (const auto& g : small_graphs()) {
    const auto dag = augmented_dag(g, 3);
    ASSERT_TRUE(dag.is_acyclic());
    for (std::uint32_t x = 1; x < 16; ++x) {
      for (std::uint32_t y = 1; y < 16; ++y) {
        if (x & y) continue;
        const VertexSet X(x), Y(y);
        bool edge = false;
        for (int u : X.members()) {
          for (int v : Y.members()) edge = edge || g.adjacent(u, v);
        }
        EXPECT_EQ(dag.d_separated(X.members(), Y.members(), {}), !edge)
            << "graph edges " << g.edges().size() << " X=" << g.label(X) << " Y=" << g.label(Y);
      }
    }
  }
}

TEST(AugmentedDag, DSeparationTextbook) {
  // A -> C <- B, C -> D
  const AugmentedDag dag({{"A", 2}, {"B", 2}, {"C", 2}, {"D", 2}}, {}, {{}, {}, {0, 1}, {2}});
  EXPECT_TRUE(dag.d_separated({0}, {1}, {}));
  EXPECT_FALSE(dag.d_separated({0}, {1}, {2}));
  EXPECT_FALSE(dag.d_separated({0}, {1}, {3}));  // descendant of the collider
  EXPECT_TRUE(dag.d_separated({0}, {3}, {2}));
  EXPECT_FALSE(dag.d_separated({0}, {3}, {}));
}

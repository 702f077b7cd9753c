#include "margmc/graph.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "margmc/error.hpp"

namespace margmc {

bool cardinality_lex_less(VertexSet a, VertexSet b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a.members() < b.members();
}

BidirectedGraph BidirectedGraph::from_edge_list(
    const std::vector<std::pair<std::string, int>>& vertices,
    const std::vector<std::pair<std::string, std::string>>& edges) {
  if (vertices.empty()) throw InputError("graph has no vertices");
  if (vertices.size() > 24) throw InputError("graph has more than 24 vertices");
  BidirectedGraph g;
  for (const auto& [name, levels] : vertices) {
    if (name.empty()) throw InputError("empty vertex name");
    if (g.index_of(name) >= 0) throw InputError("duplicate vertex name '" + name + "'");
    if (levels < 2) {
      throw InputError("vertex '" + name + "' needs at least 2 levels");
    }
    g.vars_.push_back({name, levels});
  }
  g.adj_.assign(g.vars_.size(), VertexSet{});
  for (const auto& [a, b] : edges) {
    const int u = g.index_of(a);
    const int v = g.index_of(b);
    if (u < 0) throw InputError("edge references unknown vertex '" + a + "'");
    if (v < 0) throw InputError("edge references unknown vertex '" + b + "'");
    if (u == v) throw InputError("self-loop on vertex '" + a + "'");
    g.adj_[u] = g.adj_[u].with(v);
    g.adj_[v] = g.adj_[v].with(u);
  }
  return g;
}

int BidirectedGraph::index_of(const std::string& name) const {
  for (int v = 0; v < size(); ++v) {
    if (vars_[v].name == name) return v;
  }
  return -1;
}

std::vector<std::pair<int, int>> BidirectedGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int u = 0; u < size(); ++u) {
    for (int v : adj_[u].members()) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

std::vector<VertexSet> BidirectedGraph::components(VertexSet s) const {
  std::vector<VertexSet> out;
  VertexSet remaining = s;
  while (!remaining.empty()) {
    VertexSet comp = VertexSet::single(remaining.front());
    VertexSet frontier = comp;
    while (!frontier.empty()) {
      VertexSet next;
      for (int v : frontier.members()) next = next | (adj_[v] & s);
      frontier = next - comp;
      comp = comp | next;
    }
    out.push_back(comp);
    remaining = remaining - comp;
  }
  return out;
}

long long BidirectedGraph::cells(VertexSet s) const {
  long long n = 1;
  for (int v : s.members()) n *= vars_[v].levels;
  return n;
}

std::string BidirectedGraph::label(VertexSet s) const {
  bool single_chars = true;
  for (const auto& var : vars_) single_chars = single_chars && var.name.size() == 1;
  std::string out;
  for (int v : s.members()) {
    if (!out.empty() && !single_chars) out += ':';
    out += vars_[v].name;
  }
  return out;
}

BidirectedGraph parse_graph(std::istream& in) {
  std::vector<std::pair<std::string, int>> vertices;
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    std::string a, b, extra;
    if (kw == "var") {
      int levels = 0;
      if (!(ls >> a >> levels) || (ls >> extra)) {
        throw InputError("graph line " + std::to_string(lineno) +
                         ": expected 'var NAME LEVELS'");
      }
      vertices.emplace_back(a, levels);
    } else if (kw == "edge") {
      if (!(ls >> a >> b) || (ls >> extra)) {
        throw InputError("graph line " + std::to_string(lineno) +
                         ": expected 'edge NAME NAME'");
      }
      edges.emplace_back(a, b);
    } else {
      throw InputError("graph line " + std::to_string(lineno) +
                       ": unknown keyword '" + kw + "'");
    }
  }
  return BidirectedGraph::from_edge_list(vertices, edges);
}

BidirectedGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open graph file '" + path + "'");
  return parse_graph(in);
}

std::vector<VertexSet> disconnected_sets(const BidirectedGraph& g) {
  std::vector<VertexSet> out;
  const std::uint32_t full = g.all().bits();
  for (std::uint32_t bits = 1; bits <= full; ++bits) {
    const VertexSet s(bits);
    if (s.size() >= 2 && !g.is_connected(s)) out.push_back(s);
  }
  std::sort(out.begin(), out.end(), cardinality_lex_less);
  return out;
}

std::vector<Independence> implied_independencies(const BidirectedGraph& g) {
  // Each disconnected set with components C1..Ck gives the mutual independence
  // of its components, written as C_j _||_ C_{j+1} u ... u C_k.
  std::vector<Independence> all;
  for (VertexSet s : disconnected_sets(g)) {
    const auto comps = g.components(s);
    VertexSet rest = s;
    for (std::size_t j = 0; j + 1 < comps.size(); ++j) {
      rest = rest - comps[j];
      all.push_back({comps[j], rest});
    }
  }
  auto implied_by = [](const Independence& a, const Independence& b) {
    return (b.left.contains(a.left) && b.right.contains(a.right)) ||
           (b.left.contains(a.right) && b.right.contains(a.left));
  };
  std::vector<Independence> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    bool redundant = false;
    for (std::size_t j = 0; j < all.size() && !redundant; ++j) {
      if (i == j) continue;
      if (implied_by(all[i], all[j]) &&
          (!implied_by(all[j], all[i]) || j < i)) {
        redundant = true;
      }
    }
    if (!redundant) out.push_back(all[i]);
  }
  std::sort(out.begin(), out.end(), [](const Independence& a, const Independence& b) {
    const VertexSet ua = a.left | a.right;
    const VertexSet ub = b.left | b.right;
    if (ua != ub) return ua.members() < ub.members();
    return a.left.members() < b.left.members();
  });
  return out;
}

bool is_homogeneous(const BidirectedGraph& g) {
  const int n = g.size();
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int c = b + 1; c < n; ++c) {
        for (int d = c + 1; d < n; ++d) {
          const int q[4] = {a, b, c, d};
          int degree[4] = {0, 0, 0, 0};
          int n_edges = 0;
          for (int i = 0; i < 4; ++i) {
            for (int j = i + 1; j < 4; ++j) {
              if (g.adjacent(q[i], q[j])) {
                ++degree[i];
                ++degree[j];
                ++n_edges;
              }
            }
          }
          const bool connected =
              g.is_connected(VertexSet::single(a).with(b).with(c).with(d));
          // chordless 4-cycle: 4 edges, all degrees 2
          const bool cycle = n_edges == 4 &&
                             std::all_of(degree, degree + 4, [](int k) { return k == 2; });
          // 4-chain: connected with 3 edges and no vertex of degree 3
          const bool chain = connected && n_edges == 3 &&
                             std::none_of(degree, degree + 4, [](int k) { return k == 3; });
          if (cycle || chain) return false;
        }
      }
    }
  }
  return true;
}

AugmentedDag::AugmentedDag(std::vector<Variable> observed,
                           std::vector<Variable> latents,
                           std::vector<std::vector<int>> parents)
    : n_observed_(static_cast<int>(observed.size())), parents_(std::move(parents)) {
  vars_ = std::move(observed);
  vars_.insert(vars_.end(), latents.begin(), latents.end());
  if (parents_.size() != vars_.size()) {
    throw InputError("parent map size does not match vertex count");
  }
  for (auto& p : parents_) std::sort(p.begin(), p.end());
}

std::vector<int> AugmentedDag::topological_order() const {
  const int n = size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> children(n);
  for (int v = 0; v < n; ++v) {
    for (int p : parents_[v]) {
      children[p].push_back(v);
      ++indegree[v];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push(v);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int c : children[v]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  return order;
}

bool AugmentedDag::d_separated(const std::vector<int>& x, const std::vector<int>& y,
                               const std::vector<int>& z) const {
  // Reachability over (vertex, direction) pairs; see Koller & Friedman, Alg. 3.1.
  const int n = size();
  std::vector<std::vector<int>> children(n);
  for (int v = 0; v < n; ++v) {
    for (int p : parents_[v]) children[p].push_back(v);
  }
  std::vector<char> in_z(n, 0), anc_z(n, 0);
  for (int v : z) in_z[v] = 1;
  {
    std::vector<int> stack(z.begin(), z.end());
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (anc_z[v]) continue;
      anc_z[v] = 1;
      for (int p : parents_[v]) stack.push_back(p);
    }
  }
  std::vector<char> in_y(n, 0);
  for (int v : y) in_y[v] = 1;
  // direction 0: arrived from a child (moving up), 1: from a parent (moving down)
  std::vector<std::array<char, 2>> visited(n, {0, 0});
  std::vector<std::pair<int, int>> stack;
  for (int v : x) stack.emplace_back(v, 0);
  while (!stack.empty()) {
    auto [v, dir] = stack.back();
    stack.pop_back();
    if (visited[v][dir]) continue;
    visited[v][dir] = 1;
    if (!in_z[v] && in_y[v]) return false;
    if (dir == 0 && !in_z[v]) {
      for (int p : parents_[v]) stack.emplace_back(p, 0);
      for (int c : children[v]) stack.emplace_back(c, 1);
    } else if (dir == 1) {
      if (!in_z[v]) {
        for (int c : children[v]) stack.emplace_back(c, 1);
      }
      if (anc_z[v]) {
        for (int p : parents_[v]) stack.emplace_back(p, 0);
      }
    }
  }
  return true;
}

AugmentedDag augmented_dag(const BidirectedGraph& g, int latent_levels) {
  if (latent_levels < 2) throw InputError("latent_levels must be at least 2");
  const int n = g.size();
  // arrow[u][v]: u -> v assigned by the sink orientation
  std::vector<std::vector<char>> arrow(n, std::vector<char>(n, 0));
  for (int j = 0; j < n; ++j) {
    const auto nb = g.neighbors(j).members();
    for (int i : nb) {
      for (int k : nb) {
        if (i != k && !g.adjacent(i, k)) {
          arrow[i][j] = 1;
          arrow[k][j] = 1;
        }
      }
    }
  }

  std::vector<Variable> observed = g.variables();
  std::vector<Variable> latents;
  std::vector<std::vector<int>> parents(n);
  std::vector<std::pair<int, int>> undirected;
  for (auto [u, v] : g.edges()) {
    if (arrow[u][v] && arrow[v][u]) {
      const int latent = n + static_cast<int>(latents.size());
      latents.push_back({"L" + std::to_string(latents.size() + 1), latent_levels});
      parents.emplace_back();
      parents[u].push_back(latent);
      parents[v].push_back(latent);
    } else if (arrow[u][v]) {
      parents[v].push_back(u);
    } else if (arrow[v][u]) {
      parents[u].push_back(v);
    } else {
      undirected.emplace_back(u, v);
    }
  }

  // Rank observed vertices by a topological order of the directed part so the
  // remaining edges can follow it without creating a cycle.
  AugmentedDag partial(observed, latents, parents);
  const auto order = partial.topological_order();
  std::vector<int> rank(partial.size(), 0);
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);
  for (auto [u, v] : undirected) {
    if (rank[u] < rank[v]) {
      parents[v].push_back(u);
    } else {
      parents[u].push_back(v);
    }
  }
  return AugmentedDag(std::move(observed), std::move(latents), std::move(parents));
}

}  // namespace margmc

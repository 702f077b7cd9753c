#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "margmc/vertex_set.hpp"

namespace margmc {

struct Variable {
  std::string name;
  int levels = 2;
};

/// Undirected skeleton of a bi-directed graph over declared variables.
///
/// Vertex indices follow declaration order; that order is the canonical
/// vertex order used for cell vectorisation, marginal ordering and DAG
/// orientation.
class BidirectedGraph {
 public:
  /// Throws InputError on duplicate names, unknown endpoints, self-loops or
  /// fewer than two levels.
  static BidirectedGraph from_edge_list(
      const std::vector<std::pair<std::string, int>>& vertices,
      const std::vector<std::pair<std::string, std::string>>& edges);

  int size() const { return static_cast<int>(vars_.size()); }
  const std::vector<Variable>& variables() const { return vars_; }
  const Variable& variable(int v) const { return vars_[v]; }
  int levels(int v) const { return vars_[v].levels; }
  /// -1 when absent.
  int index_of(const std::string& name) const;

  VertexSet all() const { return VertexSet::first_n(size()); }
  VertexSet neighbors(int v) const { return adj_[v]; }
  bool adjacent(int u, int v) const { return adj_[u].contains(v); }
  /// Edges as (u, v) with u < v, sorted.
  std::vector<std::pair<int, int>> edges() const;

  /// Connected components of the subgraph induced by `s`, ordered by lowest member.
  std::vector<VertexSet> components(VertexSet s) const;
  bool is_connected(VertexSet s) const { return components(s).size() <= 1; }

  /// Number of cells of the table cross-classifying `s`.
  long long cells(VertexSet s) const;

  /// Concatenated names ("ACD"); names are joined by ':' unless all are one character.
  std::string label(VertexSet s) const;

 private:
  std::vector<Variable> vars_;
  std::vector<VertexSet> adj_;
};

/// Reads the line-oriented graph format:
///   var NAME LEVELS
///   edge NAME NAME
/// with '#' starting a comment.
BidirectedGraph parse_graph(std::istream& in);
BidirectedGraph read_graph_file(const std::string& path);

/// Marginal independence X _||_ Y.
struct Independence {
  VertexSet left;
  VertexSet right;
  bool operator==(const Independence&) const = default;
};

/// Independencies of the connected set Markov property, reduced to the
/// statements not implied by another one through decomposition.
std::vector<Independence> implied_independencies(const BidirectedGraph& g);

/// All vertex subsets of size >= 2 whose induced subgraph is disconnected,
/// sorted by cardinality and then lexicographically in vertex order.
std::vector<VertexSet> disconnected_sets(const BidirectedGraph& g);

/// False iff some induced 4-vertex subgraph is a 4-chain or a chordless 4-cycle.
bool is_homogeneous(const BidirectedGraph& g);

/// DAG over observed variables followed by latent variables.
///
/// Vertex indices 0..n_observed-1 are the source graph's vertices; latents
/// follow in creation order. Every latent is a source.
class AugmentedDag {
 public:
  AugmentedDag(std::vector<Variable> observed, std::vector<Variable> latents,
               std::vector<std::vector<int>> parents);

  int size() const { return static_cast<int>(vars_.size()); }
  int n_observed() const { return n_observed_; }
  int n_latent() const { return size() - n_observed_; }
  bool is_latent(int v) const { return v >= n_observed_; }
  const Variable& variable(int v) const { return vars_[v]; }
  int levels(int v) const { return vars_[v].levels; }
  /// Sorted parent indices.
  const std::vector<int>& parents(int v) const { return parents_[v]; }

  /// Kahn order with lowest-index tie breaking; empty if the graph has a cycle.
  std::vector<int> topological_order() const;
  bool is_acyclic() const { return topological_order().size() == vars_.size(); }

  /// d-separation of X and Y given Z (index lists into this DAG).
  bool d_separated(const std::vector<int>& x, const std::vector<int>& y,
                   const std::vector<int>& z) const;

 private:
  std::vector<Variable> vars_;
  int n_observed_ = 0;
  std::vector<std::vector<int>> parents_;
};

/// Pearl-Wermuth construction: sink orientation of every V configuration,
/// one latent per bi-directed edge of the sink orientation (named L1, L2, ...
/// in edge order), remaining edges oriented along a topological order that
/// follows the declared vertex order.
AugmentedDag augmented_dag(const BidirectedGraph& g, int latent_levels);

}  // namespace margmc

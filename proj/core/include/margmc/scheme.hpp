#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "margmc/graph.hpp"

namespace margmc {

/// Probability floor applied before every logarithm.
inline constexpr double kProbFloor = 1e-12;

/// One marginal log-linear interaction, i.e. one row of C.
struct Effect {
  int marginal = 0;
  VertexSet subset;
  std::vector<int> levels;  // 1-based level per member of `subset`
  bool zero = false;        // constrained to zero by the graph
};

/// Marginal ordering, effect allocation and the M, C, K matrices of a
/// graphical marginal log-linear model.
///
/// Cells are vectorised with the first declared variable changing fastest.
/// Rows of C follow marginal order; within a marginal they follow the
/// parameter order of the inverse sum-to-zero design matrix. Row 0 is always
/// the intercept of the first marginal.
struct MarginalScheme {
  BidirectedGraph graph;
  std::vector<VertexSet> marginals;
  std::vector<bool> is_disconnected;  // marginal is a disconnected set of the graph
  std::vector<Effect> effects;        // one per row of C, |I| in total
  std::vector<int> free_index;        // rows of C not constrained to zero
  std::vector<int> zero_index;        // rows of C constrained to zero
  std::vector<int> marginal_offset;   // first row of each marginal block of M
  Eigen::MatrixXd M;
  Eigen::MatrixXd C;
  Eigen::MatrixXd K;
  bool hierarchical = false;
  bool order_decomposable = false;

  int n_cells() const { return static_cast<int>(M.cols()); }
  int n_free() const { return static_cast<int>(free_index.size()); }
  /// Label of row `row` of C, e.g. "lambda[ACD].CD(2,2)"; the intercept is "lambda[AC].()".
  std::string label(int row) const;
  std::vector<std::string> free_labels() const;
  /// Rows of C other than the intercept; these determine P.
  std::vector<int> nonintercept_rows() const;
};

/// Marginals are the disconnected sets (cardinality, then lexicographic) with
/// the full set appended. An explicit ordering may be supplied instead; it
/// must contain every disconnected set, end with the full set when absent
/// from the disconnected sets, and be hierarchical and order decomposable.
/// Throws InputError naming the violation otherwise.
MarginalScheme build_marginal_scheme(
    const BidirectedGraph& g,
    const std::optional<std::vector<VertexSet>>& ordering = std::nullopt);

/// Stacked marginalisation matrix (rows: marginal cells, cols: full cells).
Eigen::MatrixXd build_M(const MarginalScheme& scheme, const BidirectedGraph& g);

/// Block-diagonal contrast matrix C and its zero-constraint rows K.
struct ContrastMatrices {
  Eigen::MatrixXd C;
  Eigen::MatrixXd K;
};
ContrastMatrices build_C(const MarginalScheme& scheme, const BidirectedGraph& g);

/// Sum-to-zero design matrix of the saturated model on `s` (first member fastest).
Eigen::MatrixXd saturated_design(const BidirectedGraph& g, VertexSet s);

/// True iff the hypergraph with the given edges is acyclic (GYO reduction).
bool is_decomposable(const std::vector<VertexSet>& sets);

struct LambdaVector {
  Eigen::VectorXd full;  // every row of C, structural zeros included
  Eigen::VectorXd free;  // rows at free_index
  double zero_residual = 0.0;  // max |K log(MP)|
};

/// lambda = C log(M P). Throws NonPositiveProbability when a marginal
/// probability is below the floor.
LambdaVector lambda_from_P(const MarginalScheme& scheme, const Eigen::VectorXd& P);

/// Embeds free values into a full-length vector with zeros elsewhere.
Eigen::VectorXd embed_free(const MarginalScheme& scheme, const Eigen::VectorXd& free);

struct InversionOptions {
  double tolerance = 1e-10;
  int max_iterations = 500;
  int max_halvings = 30;
};

/// Solves C log(M P) = lambda for P on the simplex by damped Newton, starting
/// from the uniform table. The intercept entry of `lambda_free` is not used:
/// it is fixed by normalisation. Throws NonConvergence.
Eigen::VectorXd invert_lambda(const MarginalScheme& scheme,
                              const Eigen::VectorXd& lambda_free,
                              const InversionOptions& options = {});

/// Same, with Newton started from the interior table `start` (e.g. the
/// current state of a random walk).
Eigen::VectorXd invert_lambda(const MarginalScheme& scheme,
                              const Eigen::VectorXd& lambda_free,
                              const Eigen::VectorXd& start,
                              const InversionOptions& options = {});

}  // namespace margmc

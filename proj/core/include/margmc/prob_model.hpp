#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "margmc/graph.hpp"
#include "margmc/rng.hpp"
#include "margmc/scheme.hpp"

namespace margmc {

/// Observed counts in canonical cell order (first variable fastest).
struct ContingencyTable {
  std::vector<long long> counts;
  long long total() const;
};

/// Counts over augmented cells j = i + |I| * i_L (observed cell index fastest,
/// then latents in creation order, first latent fastest).
struct AugmentedTable {
  std::vector<long long> counts;
};

/// Precomputed indexing for the conditional tables of an augmented DAG.
///
/// Π vectorisation: vertices in DAG index order; for each vertex its parent
/// configurations with the first (lowest-index) parent fastest; within each
/// configuration levels 1..L-1 (the last level is implied).
class DagLayout {
 public:
  explicit DagLayout(const AugmentedDag& dag);

  const AugmentedDag& dag() const { return dag_; }
  int n_vertices() const { return dag_.size(); }
  int n_observed_cells() const { return n_obs_cells_; }
  int n_latent_cells() const { return n_lat_cells_; }
  int n_augmented_cells() const { return n_obs_cells_ * n_lat_cells_; }
  int n_configs(int v) const { return n_configs_[v]; }
  int d_pi() const { return d_pi_; }
  /// Offset of vertex v in the flat table of full conditional probabilities.
  int table_offset(int v) const { return table_offset_[v]; }
  int table_size() const { return table_size_; }
  /// Offset of vertex v in the Π vectorisation.
  int pi_offset(int v) const { return pi_offset_[v]; }

  int level(int v, int j) const { return level_[static_cast<std::size_t>(v) * n_augmented_cells() + j]; }
  int config(int v, int j) const { return config_[static_cast<std::size_t>(v) * n_augmented_cells() + j]; }
  int observed_cell(int j) const { return j % n_obs_cells_; }
  /// Index into the flat table for vertex v at augmented cell j.
  int table_index(int v, int j) const {
    return table_offset_[v] + config(v, j) * dag_.levels(v) + level(v, j);
  }
  /// Name of Π entry k, e.g. "pi[B|A=1,L1=2](1)".
  std::string pi_label(int k) const;

 private:
  AugmentedDag dag_;
  int n_obs_cells_ = 1;
  int n_lat_cells_ = 1;
  int d_pi_ = 0;
  int table_size_ = 0;
  std::vector<int> n_configs_;
  std::vector<int> table_offset_;
  std::vector<int> pi_offset_;
  std::vector<int> level_;
  std::vector<int> config_;
};

/// Conditional probability tables of an augmented DAG, stored in full
/// (every level) at DagLayout::table_offset(v) + config * levels + level.
struct ProbParams {
  std::vector<double> table;

  static ProbParams uniform(const DagLayout& layout);
  /// Inverse of vectorize; the last level of every conditional is completed.
  static ProbParams from_vector(const DagLayout& layout, const Eigen::VectorXd& pi);
  Eigen::VectorXd vectorize(const DagLayout& layout) const;
  /// Smallest entry; every conditional must be strictly positive.
  double min_probability() const;
};

struct JointProbabilities {
  Eigen::VectorXd augmented;
  Eigen::VectorXd observed;
};

JointProbabilities joint_from_params(const ProbParams& pp, const DagLayout& layout);

/// Log multinomial probability including log(N! / prod n_i!). Cells with
/// n_i = 0 contribute nothing. Throws NonPositiveProbability when a cell with
/// positive count has p below the floor.
double multinomial_loglik(std::span<const long long> n, const Eigen::VectorXd& p);

enum class PriorKind { iid_normal, dellaportas_forster, flat };

struct PriorSpec {
  PriorKind kind = PriorKind::dellaportas_forster;
  double sigma2 = 10.0;  // iid_normal variance
  double alpha = 1.0;    // Dirichlet pseudo-prior parameter
};

PriorKind parse_prior_kind(const std::string& name);
std::string to_string(PriorKind kind);

/// Prior density on the free interactions, with per-marginal Gaussian blocks
/// precomputed.
class LambdaPrior {
 public:
  LambdaPrior(const PriorSpec& spec, const MarginalScheme& scheme, double total_count);

  double log_density(const Eigen::VectorXd& lambda_free) const;
  const Eigen::VectorXd& mean() const { return mean_; }

  struct Block {
    std::vector<int> positions;  // indices into the free vector
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    Eigen::LLT<Eigen::MatrixXd> chol;
    double log_norm = 0.0;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  PriorSpec spec_;
  Eigen::VectorXd mean_;
  std::vector<Block> blocks_;
};

double log_prior_lambda(const LambdaVector& lv, const PriorSpec& prior,
                        const MarginalScheme& scheme, double total_count);

/// Sum of Dirichlet(alpha, ..., alpha) log densities over every conditional.
double pseudo_prior_logdensity(const ProbParams& pp, const DagLayout& layout, double alpha);

/// Sum of Dirichlet(alpha + counts) log densities, counts taken from the
/// augmented table for each vertex and parent configuration.
double conditional_dirichlet_logdensity(const ProbParams& pp, const AugmentedTable& nA,
                                        const DagLayout& layout, double alpha);

/// Splits each observed count across latent cells by a multinomial with
/// probabilities p^A(i, .) / p(i).
AugmentedTable sample_latent_split(const ProbParams& pp, const ContingencyTable& n,
                                   const DagLayout& layout, Philox& rng);

/// Draws each conditional from Dirichlet(alpha + augmented counts).
ProbParams sample_conditional_dirichlet(const AugmentedTable& nA, const DagLayout& layout,
                                        double alpha, Philox& rng);

/// Same with real-valued augmented counts (used for smoothed initial states).
ProbParams sample_conditional_dirichlet(const std::vector<double>& nA,
                                        const DagLayout& layout, double alpha, Philox& rng);

/// Per-conditional sufficient statistics of an augmented table, laid out like ProbParams::table.
std::vector<double> conditional_counts(const std::vector<double>& nA, const DagLayout& layout);

ContingencyTable simulate_table(const Eigen::VectorXd& p, long long total, Philox& rng);

/// Dirichlet draw; redrawn (up to 100 times) while any component is below the floor.
Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& alpha, Philox& rng);

ContingencyTable read_counts_csv(const std::string& path, const BidirectedGraph& g);
ContingencyTable parse_counts_csv(std::istream& in, const BidirectedGraph& g);
void write_counts_csv(std::ostream& out, const ContingencyTable& table, const BidirectedGraph& g);

}  // namespace margmc

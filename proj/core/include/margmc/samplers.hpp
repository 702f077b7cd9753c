#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "margmc/diagnostics.hpp"
#include "margmc/graph.hpp"
#include "margmc/jacobian.hpp"
#include "margmc/prob_model.hpp"
#include "margmc/rng.hpp"
#include "margmc/scheme.hpp"

namespace margmc {

enum class Algorithm { gibbs, pbis, paa, rw_lambda, rw_pi };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm a);

/// Pseudo-prior on the PBIS augmented table. `conditional` uses the latent
/// split distribution f(n^A | Π, n) of the current state; `uniform` weights all
/// splits equally. Both leave the posterior of lambda unchanged.
enum class SplitPrior { conditional, uniform };

SplitPrior parse_split_prior(const std::string& name);
std::string to_string(SplitPrior p);

struct ChainConfig {
  Algorithm algorithm = Algorithm::paa;
  int iterations = 11000;  // total, burn-in included
  int burn_in = 1000;
  std::uint64_t seed = 1;
  PriorSpec prior;
  int latent_levels = 3;
  std::vector<double> rw_scales;  // per marginal block (rw_lambda) or one entry (rw_pi); empty = default
  bool rw_tune = true;            // Robbins-Monro adaptation during burn-in
  double rw_target = 0.35;
  int paa_stage1_iterations = 0;  // 0 = iterations + burn_in
  Reorder paa_reorder;
  SplitPrior pbis_split_prior = SplitPrior::conditional;

  /// Throws InputError naming the offending key.
  void validate() const;
};

/// Everything the samplers share: graph, marginal scheme, augmented DAG and data.
class Model {
 public:
  Model(const BidirectedGraph& graph, ContingencyTable table, int latent_levels,
        const PriorSpec& prior,
        const std::optional<std::vector<VertexSet>>& marginals = std::nullopt);

  const BidirectedGraph& graph() const { return scheme_.graph; }
  const MarginalScheme& scheme() const { return scheme_; }
  const DagLayout& layout() const { return layout_; }
  const ContingencyTable& table() const { return table_; }
  const PriorSpec& prior() const { return prior_; }
  const LambdaPrior& lambda_prior() const { return lambda_prior_; }
  bool has_latents() const { return layout_.dag().n_latent() > 0; }
  int d_pi() const { return layout_.d_pi(); }
  int n_free() const { return scheme_.n_free(); }
  /// d_pi - (n_free - 1); negative when Π cannot cover the free interactions.
  int d_xi() const { return d_pi() - (n_free() - 1); }
  bool has_xi() const { return xi_.has_value(); }
  /// Throws SamplerError when no admissible selector exists (see make_xi_selector).
  const XiSelector& xi() const;

 private:
  MarginalScheme scheme_;
  DagLayout layout_;
  ContingencyTable table_;
  PriorSpec prior_;
  LambdaPrior lambda_prior_;
  std::optional<XiSelector> xi_;
  std::string xi_error_;
};

/// Quantities derived from one Π.
struct ChainState {
  ProbParams pp;
  AugmentedTable nA;  // PBIS only
  JointProbabilities joint;
  LambdaVector lambda;
  Eigen::VectorXd xi;
  double log_lik = 0.0;
  double log_prior = 0.0;
  double log_jac = 0.0;  // log|det d(lambda, xi)/dPi|, when computed
  double log_posterior() const { return log_lik + log_prior; }
};

/// Evaluates p, lambda, likelihood and prior (and the Jacobian if asked) at pp.
/// Throws NonPositiveProbability or SingularJacobian.
ChainState evaluate_state(const Model& model, ProbParams pp, bool with_jacobian);

struct Trace {
  Algorithm algorithm = Algorithm::gibbs;
  int chain = 0;
  std::vector<std::string> labels;
  Eigen::MatrixXd draws;       // (iterations - burn_in) x n_free
  Eigen::MatrixXd zero_draws;  // structural-zero entries of each stored lambda
  std::vector<double> log_posterior;
  std::vector<double> accepted;  // fraction of moves accepted in the iteration
  double wall_seconds = 0.0;
  double iterations_per_second = 0.0;
  long long inversion_failures = 0;
  long long singular_jacobians = 0;
  long long probability_floor_hits = 0;
  std::vector<double> final_scales;  // random-walk scales after tuning

  int rows() const { return static_cast<int>(draws.rows()); }
  double acceptance_rate() const;
};

/// Initial Π: one conditional-Dirichlet draw given the observed table plus 0.5
/// per cell, split uniformly across latent cells.
ProbParams initial_params(const Model& model, double alpha, Philox& rng);

Trace gibbs_run(const ChainConfig& cfg, const Model& model, Philox& rng);
Trace pbis_run(const ChainConfig& cfg, const Model& model, Philox& rng);
Trace paa_run(const ChainConfig& cfg, const Model& model, Philox& rng);
Trace rw_lambda_run(const ChainConfig& cfg, const Model& model, Philox& rng);
Trace rw_pi_run(const ChainConfig& cfg, const Model& model, Philox& rng);

/// Dispatches on cfg.algorithm with stream `chain` of cfg.seed.
Trace run_chain(const ChainConfig& cfg, const Model& model, int chain);

/// Runs `chains` chains on at most `threads` worker threads; chain k uses
/// stream k, so results do not depend on the thread count.
std::vector<Trace> run_chains(const ChainConfig& cfg, const Model& model, int chains,
                              int threads);

}  // namespace margmc

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "margmc/prob_model.hpp"
#include "margmc/scheme.hpp"

namespace margmc {

/// Positions of Π that complete the free interactions to a bijection.
///
/// The intercept is fixed by normalisation, so the balance is
/// d_xi = d_Pi - (|free| - 1).
struct XiSelector {
  std::vector<int> indices;  // sorted
  int size() const { return static_cast<int>(indices.size()); }
};

/// Scans Π from its last entry backwards and takes an entry into xi whenever
/// the remaining columns of d lambda / dΠ keep full row rank, until d_xi
/// entries are chosen. Ranks are evaluated at a fixed pseudo-random interior
/// point. When the plain tail of Π is admissible this is exactly the last
/// d_xi entries. Throws SamplerError when d_xi < 0 or no admissible set
/// exists (the map Π -> lambda is rank deficient).
XiSelector make_xi_selector(const DagLayout& layout, const MarginalScheme& scheme);

/// Rows of d lambda_free / dΠ without the intercept, (|free|-1) x d_Pi.
Eigen::MatrixXd lambda_gradient(const ProbParams& pp, const MarginalScheme& scheme,
                                const DagLayout& layout, const Eigen::MatrixXd& delta);

struct JacobianReport {
  Eigen::MatrixXd delta;     // |I| x d_Pi, dp/dPi
  Eigen::MatrixXd gradient;  // (|free|-1) x d_Pi, d lambda_free / dPi without the intercept
  Eigen::MatrixXd jac;       // d_Pi x d_Pi, gradient rows followed by xi selector rows
  double log_abs_det = 0.0;  // log |det jac|
  double condition_estimate = 0.0;  // 2-norm condition number, 0 unless requested
};

/// dp(i)/dΠ_k for the observed cell probabilities.
Eigen::MatrixXd delta_matrix(const ProbParams& pp, const DagLayout& layout);

/// Assembles the Jacobian of Π -> (lambda_free without intercept, xi).
/// Throws SingularJacobian when |det| < 1e-300.
JacobianReport jacobian_matrix(const ProbParams& pp, const MarginalScheme& scheme,
                               const DagLayout& layout, const XiSelector& xi,
                               bool with_condition = false);

/// log|det dΠ/d(lambda, xi)|, the reciprocal direction.
double log_abs_det_jacobian(const ProbParams& pp, const MarginalScheme& scheme,
                            const DagLayout& layout, const XiSelector& xi);

/// log|det| of the gradient restricted to the columns outside xi; equals the
/// full Jacobian's log|det| because the xi rows are coordinate selectors.
double log_abs_det_minor(const JacobianReport& report, const XiSelector& xi);

}  // namespace margmc

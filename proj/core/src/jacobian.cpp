#include "margmc/jacobian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "margmc/error.hpp"

namespace margmc {

namespace {

constexpr double kLogDetFloor = -690.7755278982137;  // log(1e-300)
constexpr double kRankTolerance = 1e-8;
constexpr std::uint64_t kXiProbeSeed = 0x9e3779b97f4a7c15ULL;

double log_abs_det_lu(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  double out = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double u = std::abs(lu.matrixLU()(i, i));
    if (!(u > 0.0)) return -std::numeric_limits<double>::infinity();
    out += std::log(u);
  }
  return out;
}

}  // namespace

XiSelector make_xi_selector(const DagLayout& layout, const MarginalScheme& scheme) {
  const int d = layout.d_pi();
  const int rows = scheme.n_free() - 1;
  const int d_xi = d - rows;
  if (d_xi < 0) {
    throw SamplerError("probability parameters (" + std::to_string(d) +
                       ") fewer than free interactions (" + std::to_string(rows) +
                       "); increase latent levels");
  }
  Philox rng(kXiProbeSeed);
  const ProbParams probe = sample_conditional_dirichlet(
      std::vector<double>(layout.n_augmented_cells(), 1.0), layout, 2.0, rng);
  const Eigen::MatrixXd g = lambda_gradient(probe, scheme, layout, delta_matrix(probe, layout));

  auto full_row_rank = [&](const std::vector<int>& cols) {
    if (rows == 0) return true;
    if (static_cast<int>(cols.size()) < rows) return false;
    Eigen::MatrixXd sub(rows, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = g.col(cols[c]);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub);
    const auto& s = svd.singularValues();
    return s[rows - 1] > kRankTolerance * s[0];
  };

  std::vector<int> keep(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) keep[k] = k;
  if (!full_row_rank(keep)) {
    throw SamplerError("the map from probability parameters to interactions is rank deficient; "
                       "increase latent levels");
  }
  XiSelector xi;
  for (int k = d - 1; k >= 0 && xi.size() < d_xi; --k) {
    std::vector<int> rest;
    for (int c : keep) {
      if (c != k) rest.push_back(c);
    }
    if (full_row_rank(rest)) {
      keep = std::move(rest);
      xi.indices.push_back(k);
    }
  }
  std::sort(xi.indices.begin(), xi.indices.end());
  return xi;
}

Eigen::MatrixXd lambda_gradient(const ProbParams& pp, const MarginalScheme& scheme,
                                const DagLayout& layout, const Eigen::MatrixXd& delta) {
  const JointProbabilities joint = joint_from_params(pp, layout);
  const Eigen::VectorXd gamma = scheme.M * joint.observed;
  if ((gamma.array() < kProbFloor).any()) {
    throw NonPositiveProbability("marginal probability below floor");
  }
  const Eigen::MatrixXd hprime = gamma.cwiseInverse().asDiagonal() * (scheme.M * delta);
  Eigen::MatrixXd out(scheme.n_free() - 1, delta.cols());
  for (int f = 1; f < scheme.n_free(); ++f) {
    out.row(f - 1) = scheme.C.row(scheme.free_index[f]) * hprime;
  }
  return out;
}

Eigen::MatrixXd delta_matrix(const ProbParams& pp, const DagLayout& layout) {
  const int nv = layout.n_vertices();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(layout.n_observed_cells(), layout.d_pi());
  std::vector<double> f(nv);
  for (int j = 0; j < layout.n_augmented_cells(); ++j) {
    const int i = layout.observed_cell(j);
    for (int v = 0; v < nv; ++v) f[v] = pp.table[layout.table_index(v, j)];
    for (int u = 0; u < nv; ++u) {
      // p^A(j) / pi_u(j_u | j_pa(u)) without dividing
      double q = 1.0;
      for (int v = 0; v < nv; ++v) {
        if (v != u) q *= f[v];
      }
      const int lu = layout.dag().levels(u);
      const int col = layout.pi_offset(u) + layout.config(u, j) * (lu - 1);
      const int level = layout.level(u, j);
      if (level < lu - 1) {
        delta(i, col + level) += q;
      } else {
        for (int k = 0; k < lu - 1; ++k) delta(i, col + k) -= q;
      }
    }
  }
  return delta;
}

JacobianReport jacobian_matrix(const ProbParams& pp, const MarginalScheme& scheme,
                               const DagLayout& layout, const XiSelector& xi,
                               bool with_condition) {
  const int d = layout.d_pi();
  const int nrows = scheme.n_free() - 1;
  if (nrows + xi.size() != d) throw InputError("xi selector does not balance dimensions");

  JacobianReport r;
  r.delta = delta_matrix(pp, layout);
  r.gradient = lambda_gradient(pp, scheme, layout, r.delta);
  r.jac = Eigen::MatrixXd::Zero(d, d);
  r.jac.topRows(nrows) = r.gradient;
  for (int k = 0; k < xi.size(); ++k) r.jac(nrows + k, xi.indices[k]) = 1.0;

  r.log_abs_det = log_abs_det_lu(r.jac);
  if (with_condition && d > 0) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r.jac);
    const auto& s = svd.singularValues();
    r.condition_estimate = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1]
                                                 : std::numeric_limits<double>::infinity();
  }
  if (!(r.log_abs_det > kLogDetFloor)) throw SingularJacobian("Jacobian determinant is zero");
  return r;
}

double log_abs_det_jacobian(const ProbParams& pp, const MarginalScheme& scheme,
                            const DagLayout& layout, const XiSelector& xi) {
  return -jacobian_matrix(pp, scheme, layout, xi).log_abs_det;
}

double log_abs_det_minor(const JacobianReport& report, const XiSelector& xi) {
  std::vector<int> keep;
  for (int k = 0; k < report.gradient.cols(); ++k) {
    if (std::find(xi.indices.begin(), xi.indices.end(), k) == xi.indices.end()) keep.push_back(k);
  }
  Eigen::MatrixXd minor(report.gradient.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    minor.col(static_cast<Eigen::Index>(c)) = report.gradient.col(keep[c]);
  }
  return log_abs_det_lu(minor);
}

}  // namespace margmc

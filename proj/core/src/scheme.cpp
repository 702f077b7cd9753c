#include "margmc/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "margmc/error.hpp"

namespace margmc {

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Sum-to-zero coding block for one variable: rows are levels, column 0 the
/// constant, column k the effect of level k+1.
Eigen::MatrixXd coding_block(int levels) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(levels, levels);
  j.col(0).setOnes();
  j.block(0, 1, 1, levels - 1).setConstant(-1.0);
  j.block(1, 1, levels - 1, levels - 1).setIdentity();
  return j;
}

Eigen::MatrixXd coding_block_inverse(int levels) {
  return coding_block(levels).inverse();
}

/// Effect (subset, levels) addressed by parameter index `r` of marginal `s`.
Effect decode_parameter(const BidirectedGraph& g, VertexSet s, long long r) {
  Effect e;
  for (int v : s.members()) {
    const int d = static_cast<int>(r % g.levels(v));
    r /= g.levels(v);
    if (d > 0) {
      e.subset = e.subset.with(v);
      e.levels.push_back(d + 1);
    }
  }
  return e;
}

std::string describe(const BidirectedGraph& g, const std::vector<VertexSet>& sets) {
  std::string out = "{";
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (i) out += ", ";
    out += g.label(sets[i]);
  }
  return out + "}";
}

void check_ordering(const BidirectedGraph& g, MarginalScheme& scheme) {
  const auto& ms = scheme.marginals;
  for (std::size_t j = 0; j < ms.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (ms[i].contains(ms[j])) {
        throw InputError("marginal ordering is not hierarchical: " + g.label(ms[i]) +
                         " precedes its subset " + g.label(ms[j]));
      }
    }
  }
  scheme.hierarchical = true;
  if (ms.empty() || ms.back() != g.all()) {
    throw InputError("marginal ordering must end with the full variable set");
  }
  for (std::size_t k = 1; k <= ms.size(); ++k) {
    std::vector<VertexSet> maxima;
    for (std::size_t i = 0; i < k; ++i) {
      bool maximal = true;
      for (std::size_t j = 0; j < k && maximal; ++j) {
        if (j != i && ms[j].contains(ms[i]) && ms[j] != ms[i]) maximal = false;
      }
      if (maximal) maxima.push_back(ms[i]);
    }
    if (!is_decomposable(maxima)) {
      throw InputError("marginal ordering is not order decomposable: maxima " +
                       describe(g, maxima) + " after marginal " + g.label(ms[k - 1]));
    }
  }
  scheme.order_decomposable = true;
}

}  // namespace

bool is_decomposable(const std::vector<VertexSet>& sets) {
  std::vector<VertexSet> h(sets.begin(), sets.end());
  bool changed = true;
  while (changed) {
    changed = false;
    // drop vertices that occur in a single edge
    for (auto& e : h) {
      for (int v : e.members()) {
        int count = 0;
        for (const auto& f : h) count += f.contains(v) ? 1 : 0;
        if (count == 1) {
          e = e.without(v);
          changed = true;
        }
      }
    }
    // drop empty edges and edges contained in another edge
    for (std::size_t i = 0; i < h.size(); ++i) {
      bool drop = h[i].empty();
      for (std::size_t j = 0; j < h.size() && !drop; ++j) {
        if (i != j && h[j].contains(h[i]) && (h[j] != h[i] || j < i)) drop = true;
      }
      if (drop) {
        h.erase(h.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return h.empty();
}

Eigen::MatrixXd saturated_design(const BidirectedGraph& g, VertexSet s) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 1);
  for (int v : s.members()) x = kron(coding_block(g.levels(v)), x);
  return x;
}

std::string MarginalScheme::label(int row) const {
  const Effect& e = effects[row];
  std::string out = "lambda[" + graph.label(marginals[e.marginal]) + "]." +
                    graph.label(e.subset) + "(";
  for (std::size_t i = 0; i < e.levels.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(e.levels[i]);
  }
  return out + ")";
}

std::vector<std::string> MarginalScheme::free_labels() const {
  std::vector<std::string> out;
  for (int r : free_index) out.push_back(label(r));
  return out;
}

std::vector<int> MarginalScheme::nonintercept_rows() const {
  std::vector<int> rows;
  for (int r = 1; r < static_cast<int>(effects.size()); ++r) rows.push_back(r);
  return rows;
}

MarginalScheme build_marginal_scheme(const BidirectedGraph& g,
                                     const std::optional<std::vector<VertexSet>>& ordering) {
  MarginalScheme scheme;
  scheme.graph = g;
  const auto dsets = disconnected_sets(g);
  if (ordering) {
    scheme.marginals = *ordering;
    for (VertexSet d : dsets) {
      if (std::find(scheme.marginals.begin(), scheme.marginals.end(), d) ==
          scheme.marginals.end()) {
        throw InputError("marginal ordering omits disconnected set " + g.label(d));
      }
    }
    for (VertexSet m : scheme.marginals) {
      if (m.empty() || !g.all().contains(m)) {
        throw InputError("marginal ordering contains an invalid set");
      }
      if (m != g.all() && std::find(dsets.begin(), dsets.end(), m) == dsets.end()) {
        throw InputError("marginal " + g.label(m) + " is not a disconnected set");
      }
    }
  } else {
    scheme.marginals = dsets;
    if (scheme.marginals.empty() || scheme.marginals.back() != g.all()) {
      scheme.marginals.push_back(g.all());
    }
  }
  check_ordering(g, scheme);

  for (VertexSet m : scheme.marginals) {
    scheme.is_disconnected.push_back(std::find(dsets.begin(), dsets.end(), m) != dsets.end());
  }

  // Allocate each effect subset to the first marginal containing it.
  std::map<std::uint32_t, int> owner;
  for (int m = 0; m < static_cast<int>(scheme.marginals.size()); ++m) {
    const VertexSet ms = scheme.marginals[m];
    const long long n = g.cells(ms);
    for (long long r = 0; r < n; ++r) {
      Effect e = decode_parameter(g, ms, r);
      auto [it, inserted] = owner.emplace(e.subset.bits(), m);
      if (it->second != m) continue;
      e.marginal = m;
      e.zero = scheme.is_disconnected[m] && e.subset == ms;
      scheme.effects.push_back(std::move(e));
    }
  }
  for (int r = 0; r < static_cast<int>(scheme.effects.size()); ++r) {
    (scheme.effects[r].zero ? scheme.zero_index : scheme.free_index).push_back(r);
  }

  int offset = 0;
  for (VertexSet m : scheme.marginals) {
    scheme.marginal_offset.push_back(offset);
    offset += static_cast<int>(g.cells(m));
  }
  scheme.M = build_M(scheme, g);
  auto ck = build_C(scheme, g);
  scheme.C = std::move(ck.C);
  scheme.K = std::move(ck.K);
  return scheme;
}

Eigen::MatrixXd build_M(const MarginalScheme& scheme, const BidirectedGraph& g) {
  const auto n_cells = g.cells(g.all());
  long long rows = 0;
  for (VertexSet m : scheme.marginals) rows += g.cells(m);
  Eigen::MatrixXd out(rows, n_cells);
  long long row = 0;
  for (VertexSet m : scheme.marginals) {
    Eigen::MatrixXd block = Eigen::MatrixXd::Ones(1, 1);
    for (int v = 0; v < g.size(); ++v) {
      const int k = g.levels(v);
      Eigen::MatrixXd a = m.contains(v) ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(k, k))
                                        : Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, k));
      block = kron(a, block);
    }
    out.middleRows(row, block.rows()) = block;
    row += block.rows();
  }
  return out;
}

ContrastMatrices build_C(const MarginalScheme& scheme, const BidirectedGraph& g) {
  const auto n_rows = static_cast<Eigen::Index>(scheme.effects.size());
  Eigen::Index n_cols = 0;
  for (VertexSet m : scheme.marginals) n_cols += g.cells(m);
  ContrastMatrices out;
  out.C = Eigen::MatrixXd::Zero(n_rows, n_cols);

  Eigen::Index row = 0;
  for (int m = 0; m < static_cast<int>(scheme.marginals.size()); ++m) {
    const VertexSet ms = scheme.marginals[m];
    Eigen::MatrixXd xinv = Eigen::MatrixXd::Ones(1, 1);
    for (int v : ms.members()) xinv = kron(coding_block_inverse(g.levels(v)), xinv);
    for (Eigen::Index r = 0; r < xinv.rows(); ++r) {
      if (row >= n_rows || scheme.effects[row].marginal != m) break;
      const Effect e = decode_parameter(g, ms, r);
      const Effect& want = scheme.effects[row];
      if (e.subset != want.subset || e.levels != want.levels) continue;
      out.C.block(row, scheme.marginal_offset[m], 1, xinv.cols()) = xinv.row(r);
      ++row;
    }
  }
  if (row != n_rows) throw RuntimeError("internal: contrast rows do not match effects");

  out.K.resize(static_cast<Eigen::Index>(scheme.zero_index.size()), n_cols);
  for (std::size_t i = 0; i < scheme.zero_index.size(); ++i) {
    out.K.row(static_cast<Eigen::Index>(i)) = out.C.row(scheme.zero_index[i]);
  }
  return out;
}

LambdaVector lambda_from_P(const MarginalScheme& scheme, const Eigen::VectorXd& P) {
  if (P.size() != scheme.n_cells()) {
    throw InputError("probability vector has wrong length");
  }
  const Eigen::VectorXd mp = scheme.M * P;
  if ((mp.array() < kProbFloor).any()) {
    throw NonPositiveProbability("marginal probability below floor");
  }
  const Eigen::VectorXd logmp = mp.array().log();
  LambdaVector out;
  out.full = scheme.C * logmp;
  out.free.resize(scheme.n_free());
  for (int i = 0; i < scheme.n_free(); ++i) out.free[i] = out.full[scheme.free_index[i]];
  out.zero_residual =
      scheme.K.rows() > 0 ? (scheme.K * logmp).cwiseAbs().maxCoeff() : 0.0;
  return out;
}

Eigen::VectorXd embed_free(const MarginalScheme& scheme, const Eigen::VectorXd& free) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(scheme.effects.size()));
  for (int i = 0; i < scheme.n_free(); ++i) full[scheme.free_index[i]] = free[i];
  return full;
}

Eigen::VectorXd invert_lambda(const MarginalScheme& scheme,
                              const Eigen::VectorXd& lambda_free,
                              const InversionOptions& options) {
  const Eigen::VectorXd uniform =
      Eigen::VectorXd::Constant(scheme.n_cells(), 1.0 / scheme.n_cells());
  return invert_lambda(scheme, lambda_free, uniform, options);
}

Eigen::VectorXd invert_lambda(const MarginalScheme& scheme,
                              const Eigen::VectorXd& lambda_free,
                              const Eigen::VectorXd& start,
                              const InversionOptions& options) {
  if (start.size() != scheme.n_cells() || !(start.minCoeff() >= kProbFloor)) {
    throw InputError("inversion start must be an interior probability vector");
  }
  if (lambda_free.size() != scheme.n_free()) {
    throw InputError("free lambda vector has wrong length");
  }
  const int n = scheme.n_cells();
  if (n == 1) return Eigen::VectorXd::Ones(1);
  // Square system: rows 1..|I|-1 of C against the |I|-1 log-ratios to the last cell.
  const Eigen::VectorXd target = embed_free(scheme, lambda_free).tail(n - 1);
  const Eigen::MatrixXd c = scheme.C.bottomRows(n - 1);
  const Eigen::MatrixXd& m = scheme.M;

  auto probs = [n](const Eigen::VectorXd& theta) {
    Eigen::VectorXd p(n);
    p.head(n - 1) = theta;
    p[n - 1] = 0.0;
    p = (p.array() - p.maxCoeff()).exp();
    return Eigen::VectorXd(p / p.sum());
  };
  auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& mp) {
    mp = m * p;
    return Eigen::VectorXd(c * mp.array().log().matrix() - target);
  };

  Eigen::VectorXd theta = (start.head(n - 1).array().log() - std::log(start[n - 1])).matrix();
  Eigen::VectorXd p = probs(theta);
  Eigen::VectorXd mp;
  Eigen::VectorXd r = residual(p, mp);
  double norm = r.cwiseAbs().maxCoeff();
  for (int it = 0; it < options.max_iterations; ++it) {
    if (!std::isfinite(norm)) break;
    if (norm < options.tolerance) {
      if (p.minCoeff() < kProbFloor) break;
      return p;
    }
    // d log(MP) / d theta = diag(1/MP) M (diag(p) - p p^T) restricted to the first n-1 columns
    Eigen::MatrixXd dp = -p * p.head(n - 1).transpose();
    dp.diagonal().array() += p.head(n - 1).array();
    const Eigen::MatrixXd jac = c * (mp.cwiseInverse().asDiagonal() * (m * dp));
    const Eigen::VectorXd step = jac.partialPivLu().solve(-r);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool improved = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd cand_theta = theta + t * step;
      const Eigen::VectorXd cand_p = probs(cand_theta);
      Eigen::VectorXd cand_mp;
      const Eigen::VectorXd cand_r = residual(cand_p, cand_mp);
      const double cand_norm = cand_r.cwiseAbs().maxCoeff();
      if (std::isfinite(cand_norm) && cand_norm < norm) {
        theta = cand_theta;
        p = cand_p;
        mp = cand_mp;
        r = cand_r;
        norm = cand_norm;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  throw NonConvergence("lambda inversion did not converge (residual " +
                       std::to_string(norm) + ")");
}

}  // namespace margmc

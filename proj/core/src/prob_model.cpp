#include "margmc/prob_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "margmc/csv.hpp"
#include "margmc/error.hpp"

namespace margmc {

namespace {

std::vector<long long> sample_multinomial(long long n, const std::vector<double>& w, Philox& rng) {
  std::vector<long long> out(w.size(), 0);
  double rest = 0.0;
  for (double x : w) rest += x;
  for (std::size_t k = 0; k + 1 < w.size() && n > 0; ++k) {
    const double q = rest > 0.0 ? std::clamp(w[k] / rest, 0.0, 1.0) : 0.0;
    std::binomial_distribution<long long> bin(n, q);
    out[k] = bin(rng);
    n -= out[k];
    rest -= w[k];
  }
  if (!w.empty()) out.back() += n;
  return out;
}

double dirichlet_logdensity(const double* pi, const double* a, int k) {
  double sum_a = 0.0;
  double out = 0.0;
  for (int i = 0; i < k; ++i) {
    if (pi[i] < kProbFloor) {
      throw NonPositiveProbability("Dirichlet density evaluated on the simplex boundary");
    }
    sum_a += a[i];
    out += (a[i] - 1.0) * std::log(pi[i]) - std::lgamma(a[i]);
  }
  return out + std::lgamma(sum_a);
}

}  // namespace

long long ContingencyTable::total() const {
  long long n = 0;
  for (long long c : counts) n += c;
  return n;
}

// ---------------------------------------------------------------- layout

DagLayout::DagLayout(const AugmentedDag& dag) : dag_(dag) {
  const int nv = dag.size();
  for (int v = 0; v < nv; ++v) {
    (dag.is_latent(v) ? n_lat_cells_ : n_obs_cells_) *= dag.levels(v);
  }
  const int na = n_augmented_cells();
  level_.resize(static_cast<std::size_t>(nv) * na);
  config_.resize(static_cast<std::size_t>(nv) * na);

  std::vector<int> stride(nv);
  int obs_stride = 1;
  int lat_stride = 1;
  for (int v = 0; v < nv; ++v) {
    int& s = dag.is_latent(v) ? lat_stride : obs_stride;
    stride[v] = s;
    s *= dag.levels(v);
  }
  for (int j = 0; j < na; ++j) {
    const int i = j % n_obs_cells_;
    const int il = j / n_obs_cells_;
    for (int v = 0; v < nv; ++v) {
      const int base = dag.is_latent(v) ? il : i;
      level_[static_cast<std::size_t>(v) * na + j] = (base / stride[v]) % dag.levels(v);
    }
  }

  for (int v = 0; v < nv; ++v) {
    int configs = 1;
    for (int p : dag.parents(v)) configs *= dag.levels(p);
    n_configs_.push_back(configs);
    table_offset_.push_back(table_size_);
    pi_offset_.push_back(d_pi_);
    table_size_ += configs * dag.levels(v);
    d_pi_ += configs * (dag.levels(v) - 1);
    for (int j = 0; j < na; ++j) {
      int c = 0;
      int mult = 1;
      for (int p : dag.parents(v)) {
        c += level(p, j) * mult;
        mult *= dag.levels(p);
      }
      config_[static_cast<std::size_t>(v) * na + j] = c;
    }
  }
}

std::string DagLayout::pi_label(int k) const {
  int v = n_vertices() - 1;
  while (v > 0 && pi_offset_[v] > k) --v;
  const int lv = dag_.levels(v);
  const int local = k - pi_offset_[v];
  int c = local / (lv - 1);
  const int level = local % (lv - 1);
  std::string out = "pi[" + dag_.variable(v).name;
  const auto& pa = dag_.parents(v);
  for (std::size_t q = 0; q < pa.size(); ++q) {
    out += q == 0 ? "|" : ",";
    out += dag_.variable(pa[q]).name + "=" + std::to_string(c % dag_.levels(pa[q]) + 1);
    c /= dag_.levels(pa[q]);
  }
  return out + "](" + std::to_string(level + 1) + ")";
}

// ---------------------------------------------------------------- params

ProbParams ProbParams::uniform(const DagLayout& layout) {
  ProbParams pp;
  pp.table.resize(layout.table_size());
  for (int v = 0; v < layout.n_vertices(); ++v) {
    const int lv = layout.dag().levels(v);
    for (int t = 0; t < layout.n_configs(v) * lv; ++t) {
      pp.table[layout.table_offset(v) + t] = 1.0 / lv;
    }
  }
  return pp;
}

ProbParams ProbParams::from_vector(const DagLayout& layout, const Eigen::VectorXd& pi) {
  if (pi.size() != layout.d_pi()) throw InputError("probability parameter vector has wrong length");
  ProbParams pp;
  pp.table.resize(layout.table_size());
  for (int v = 0; v < layout.n_vertices(); ++v) {
    const int lv = layout.dag().levels(v);
    for (int c = 0; c < layout.n_configs(v); ++c) {
      double rest = 1.0;
      for (int k = 0; k + 1 < lv; ++k) {
        const double x = pi[layout.pi_offset(v) + c * (lv - 1) + k];
        pp.table[layout.table_offset(v) + c * lv + k] = x;
        rest -= x;
      }
      pp.table[layout.table_offset(v) + c * lv + lv - 1] = rest;
    }
  }
  return pp;
}

Eigen::VectorXd ProbParams::vectorize(const DagLayout& layout) const {
  Eigen::VectorXd pi(layout.d_pi());
  for (int v = 0; v < layout.n_vertices(); ++v) {
    const int lv = layout.dag().levels(v);
    for (int c = 0; c < layout.n_configs(v); ++c) {
      for (int k = 0; k + 1 < lv; ++k) {
        pi[layout.pi_offset(v) + c * (lv - 1) + k] = table[layout.table_offset(v) + c * lv + k];
      }
    }
  }
  return pi;
}

double ProbParams::min_probability() const {
  double m = 1.0;
  for (double x : table) m = std::min(m, x);
  return m;
}

JointProbabilities joint_from_params(const ProbParams& pp, const DagLayout& layout) {
  JointProbabilities out;
  const int na = layout.n_augmented_cells();
  out.augmented.resize(na);
  out.observed = Eigen::VectorXd::Zero(layout.n_observed_cells());
  for (int j = 0; j < na; ++j) {
    double p = 1.0;
    for (int v = 0; v < layout.n_vertices(); ++v) p *= pp.table[layout.table_index(v, j)];
    out.augmented[j] = p;
    out.observed[layout.observed_cell(j)] += p;
  }
  return out;
}

double multinomial_loglik(std::span<const long long> n, const Eigen::VectorXd& p) {
  if (static_cast<Eigen::Index>(n.size()) != p.size()) {
    throw InputError("count and probability vectors differ in length");
  }
  long long total = 0;
  double out = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] == 0) continue;
    if (!(p[static_cast<Eigen::Index>(i)] >= kProbFloor)) {
      throw NonPositiveProbability("cell probability below floor");
    }
    total += n[i];
    out += static_cast<double>(n[i]) * std::log(p[static_cast<Eigen::Index>(i)]) -
           std::lgamma(static_cast<double>(n[i]) + 1.0);
  }
  return out + std::lgamma(static_cast<double>(total) + 1.0);
}

// ---------------------------------------------------------------- priors

PriorKind parse_prior_kind(const std::string& name) {
  if (name == "iid_normal") return PriorKind::iid_normal;
  if (name == "dellaportas_forster") return PriorKind::dellaportas_forster;
  if (name == "flat") return PriorKind::flat;
  throw InputError("unknown prior kind '" + name + "'");
}

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::iid_normal: return "iid_normal";
    case PriorKind::dellaportas_forster: return "dellaportas_forster";
    case PriorKind::flat: return "flat";
  }
  return "?";
}

LambdaPrior::LambdaPrior(const PriorSpec& spec, const MarginalScheme& scheme, double total_count)
    : spec_(spec) {
  if (spec.kind == PriorKind::iid_normal && !(spec.sigma2 > 0.0)) {
    throw InputError("prior.sigma2 must be positive");
  }
  if (!(spec.alpha > 0.0)) throw InputError("prior.alpha must be positive");
  const int nf = scheme.n_free();
  mean_ = Eigen::VectorXd::Zero(nf);
  if (spec.kind != PriorKind::dellaportas_forster) return;

  const auto& g = scheme.graph;
  for (int m = 0; m < static_cast<int>(scheme.marginals.size()); ++m) {
    const VertexSet ms = scheme.marginals[m];
    const Eigen::MatrixXd x = saturated_design(g, ms);
    const double cells = static_cast<double>(x.rows());
    // average count per cell of this marginal table
    const double nbar = total_count / cells;
    const Eigen::MatrixXd cov = 2.0 * cells * (x.transpose() * x).inverse();
    Block block;
    std::vector<int> params;
    for (int f = 0; f < nf; ++f) {
      const Effect& e = scheme.effects[scheme.free_index[f]];
      if (e.marginal != m) continue;
      // parameter index within the marginal: digit level-1 on members of the effect
      int r = 0;
      int stride = 1;
      std::size_t q = 0;
      for (int v : ms.members()) {
        if (e.subset.contains(v)) r += (e.levels[q++] - 1) * stride;
        stride *= g.levels(v);
      }
      block.positions.push_back(f);
      params.push_back(r);
    }
    if (params.empty()) continue;
    const auto k = static_cast<Eigen::Index>(params.size());
    block.mean = Eigen::VectorXd::Zero(k);
    block.covariance.resize(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      if (params[a] == 0) block.mean[a] = std::log(nbar) - std::log(total_count);
      for (Eigen::Index b = 0; b < k; ++b) block.covariance(a, b) = cov(params[a], params[b]);
    }
    block.chol.compute(block.covariance);
    const Eigen::MatrixXd l = block.chol.matrixL();
    block.log_norm = -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi) -
                     l.diagonal().array().log().sum();
    for (Eigen::Index a = 0; a < k; ++a) mean_[block.positions[a]] = block.mean[a];
    blocks_.push_back(std::move(block));
  }
}

double LambdaPrior::log_density(const Eigen::VectorXd& lambda_free) const {
  switch (spec_.kind) {
    case PriorKind::flat:
      return 0.0;
    case PriorKind::iid_normal:
      return -0.5 * static_cast<double>(lambda_free.size()) *
                 std::log(2.0 * std::numbers::pi * spec_.sigma2) -
             0.5 * lambda_free.squaredNorm() / spec_.sigma2;
    case PriorKind::dellaportas_forster: {
      double out = 0.0;
      for (const auto& b : blocks_) {
        Eigen::VectorXd d(b.positions.size());
        for (std::size_t a = 0; a < b.positions.size(); ++a) {
          d[static_cast<Eigen::Index>(a)] = lambda_free[b.positions[a]] - b.mean[static_cast<Eigen::Index>(a)];
        }
        const Eigen::VectorXd z = b.chol.matrixL().solve(d);
        out += b.log_norm - 0.5 * z.squaredNorm();
      }
      return out;
    }
  }
  return 0.0;
}

double log_prior_lambda(const LambdaVector& lv, const PriorSpec& prior,
                        const MarginalScheme& scheme, double total_count) {
  return LambdaPrior(prior, scheme, total_count).log_density(lv.free);
}

double pseudo_prior_logdensity(const ProbParams& pp, const DagLayout& layout, double alpha) {
  return conditional_dirichlet_logdensity(
      pp, AugmentedTable{std::vector<long long>(layout.n_augmented_cells(), 0)}, layout, alpha);
}

std::vector<double> conditional_counts(const std::vector<double>& nA, const DagLayout& layout) {
  std::vector<double> out(layout.table_size(), 0.0);
  for (int j = 0; j < layout.n_augmented_cells(); ++j) {
    if (nA[j] == 0.0) continue;
    for (int v = 0; v < layout.n_vertices(); ++v) out[layout.table_index(v, j)] += nA[j];
  }
  return out;
}

double conditional_dirichlet_logdensity(const ProbParams& pp, const AugmentedTable& nA,
                                        const DagLayout& layout, double alpha) {
  const std::vector<double> counts = conditional_counts(
      std::vector<double>(nA.counts.begin(), nA.counts.end()), layout);
  double out = 0.0;
  std::vector<double> a;
  for (int v = 0; v < layout.n_vertices(); ++v) {
    const int lv = layout.dag().levels(v);
    a.resize(lv);
    for (int c = 0; c < layout.n_configs(v); ++c) {
      const int off = layout.table_offset(v) + c * lv;
      for (int k = 0; k < lv; ++k) a[k] = alpha + counts[off + k];
      out += dirichlet_logdensity(&pp.table[off], a.data(), lv);
    }
  }
  return out;
}

// ---------------------------------------------------------------- sampling

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& alpha, Philox& rng) {
  Eigen::VectorXd x(alpha.size());
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Eigen::Index k = 0; k < alpha.size(); ++k) {
      std::gamma_distribution<double> gamma(alpha[k], 1.0);
      x[k] = gamma(rng);
    }
    const double s = x.sum();
    if (s > 0.0) {
      x /= s;
      if (x.minCoeff() >= kProbFloor) return x;
    }
  }
  throw SamplerError("Dirichlet draw stayed on the simplex boundary after 100 attempts");
}

AugmentedTable sample_latent_split(const ProbParams& pp, const ContingencyTable& n,
                                   const DagLayout& layout, Philox& rng) {
  const int ni = layout.n_observed_cells();
  const int nl = layout.n_latent_cells();
  if (static_cast<int>(n.counts.size()) != ni) throw InputError("table size does not match model");
  AugmentedTable out;
  out.counts.assign(layout.n_augmented_cells(), 0);
  if (nl == 1) {
    out.counts = n.counts;
    return out;
  }
  const JointProbabilities joint = joint_from_params(pp, layout);
  std::vector<double> w(nl);
  for (int i = 0; i < ni; ++i) {
    if (n.counts[i] == 0) continue;
    for (int l = 0; l < nl; ++l) w[l] = joint.augmented[i + ni * l];
    const auto split = sample_multinomial(n.counts[i], w, rng);
    for (int l = 0; l < nl; ++l) out.counts[i + ni * l] = split[l];
  }
  return out;
}

ProbParams sample_conditional_dirichlet(const std::vector<double>& nA, const DagLayout& layout,
                                        double alpha, Philox& rng) {
  if (static_cast<int>(nA.size()) != layout.n_augmented_cells()) {
    throw InputError("augmented table size does not match model");
  }
  const std::vector<double> counts = conditional_counts(nA, layout);
  ProbParams pp;
  pp.table.resize(layout.table_size());
  for (int v = 0; v < layout.n_vertices(); ++v) {
    const int lv = layout.dag().levels(v);
    Eigen::VectorXd a(lv);
    for (int c = 0; c < layout.n_configs(v); ++c) {
      const int off = layout.table_offset(v) + c * lv;
      for (int k = 0; k < lv; ++k) a[k] = alpha + counts[off + k];
      const Eigen::VectorXd draw = sample_dirichlet(a, rng);
      for (int k = 0; k < lv; ++k) pp.table[off + k] = draw[k];
    }
  }
  return pp;
}

ProbParams sample_conditional_dirichlet(const AugmentedTable& nA, const DagLayout& layout,
                                        double alpha, Philox& rng) {
  return sample_conditional_dirichlet(std::vector<double>(nA.counts.begin(), nA.counts.end()),
                                      layout, alpha, rng);
}

ContingencyTable simulate_table(const Eigen::VectorXd& p, long long total, Philox& rng) {
  if (total < 1) throw InputError("simulated table size must be at least 1");
  if ((p.array() < 0.0).any()) throw InputError("negative cell probability");
  ContingencyTable t;
  t.counts = sample_multinomial(total, std::vector<double>(p.data(), p.data() + p.size()), rng);
  return t;
}

// ---------------------------------------------------------------- CSV

ContingencyTable parse_counts_csv(std::istream& in, const BidirectedGraph& g) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      header = csv::split(line);
      break;
    }
  }
  if (header.empty()) throw InputError("counts file is empty");
  const int nv = g.size();
  if (static_cast<int>(header.size()) != nv + 1 || header.back() != "count") {
    throw InputError("counts header must list the " + std::to_string(nv) +
                     " variables followed by 'count'");
  }
  std::vector<int> column_var(nv);
  for (int c = 0; c < nv; ++c) {
    column_var[c] = g.index_of(header[c]);
    if (column_var[c] < 0) throw InputError("counts header names unknown variable '" + header[c] + "'");
    for (int d = 0; d < c; ++d) {
      if (column_var[d] == column_var[c]) throw InputError("counts header repeats '" + header[c] + "'");
    }
  }
  std::vector<int> stride(nv);
  int s = 1;
  for (int v = 0; v < nv; ++v) {
    stride[v] = s;
    s *= g.levels(v);
  }
  ContingencyTable t;
  t.counts.assign(s, 0);
  std::vector<bool> seen(s, false);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = csv::split(line);
    const std::string where = "counts line " + std::to_string(line_no);
    if (static_cast<int>(fields.size()) != nv + 1) throw InputError(where + ": wrong number of fields");
    int cell = 0;
    for (int c = 0; c < nv; ++c) {
      const int v = column_var[c];
      int level = 0;
      try {
        std::size_t pos = 0;
        level = std::stoi(fields[c], &pos);
        if (pos != fields[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw InputError(where + ": level '" + fields[c] + "' is not an integer");
      }
      if (level < 1 || level > g.levels(v)) {
        throw InputError(where + ": level " + fields[c] + " out of range for " + g.variable(v).name);
      }
      cell += (level - 1) * stride[v];
    }
    long long count = 0;
    try {
      std::size_t pos = 0;
      count = std::stoll(fields[nv], &pos);
      if (pos != fields[nv].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError(where + ": count '" + fields[nv] + "' is not an integer");
    }
    if (count < 0) throw InputError(where + ": negative count");
    if (seen[cell]) throw InputError(where + ": duplicate cell");
    seen[cell] = true;
    t.counts[cell] = count;
  }
  return t;
}

ContingencyTable read_counts_csv(const std::string& path, const BidirectedGraph& g) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open counts file '" + path + "'");
  return parse_counts_csv(in, g);
}

void write_counts_csv(std::ostream& out, const ContingencyTable& table, const BidirectedGraph& g) {
  for (int v = 0; v < g.size(); ++v) out << g.variable(v).name << ',';
  out << "count\n";
  for (std::size_t cell = 0; cell < table.counts.size(); ++cell) {
    std::size_t rest = cell;
    for (int v = 0; v < g.size(); ++v) {
      out << (rest % g.levels(v)) + 1 << ',';
      rest /= g.levels(v);
    }
    out << table.counts[cell] << '\n';
  }
}

}  // namespace margmc

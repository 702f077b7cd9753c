#include "margmc/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "margmc/error.hpp"

namespace margmc {

namespace {

using Clock = std::chrono::steady_clock;

/// Largest acceptable 2-norm condition number of the Jacobian at the start state.
constexpr double kMaxCondition = 1e10;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Collects post-burn-in rows.
class Recorder {
 public:
  Recorder(const ChainConfig& cfg, const Model& model) : burn_in_(cfg.burn_in) {
    const int rows = cfg.iterations - cfg.burn_in;
    trace_.algorithm = cfg.algorithm;
    trace_.labels = model.scheme().free_labels();
    trace_.draws.resize(rows, model.n_free());
    trace_.zero_draws.resize(rows, static_cast<Eigen::Index>(model.scheme().zero_index.size()));
    trace_.log_posterior.reserve(rows);
    trace_.accepted.reserve(rows);
    zero_index_ = model.scheme().zero_index;
  }

  void record(int t, const LambdaVector& lambda, double log_posterior, double accepted) {
    if (t < burn_in_) return;
    const Eigen::Index r = t - burn_in_;
    trace_.draws.row(r) = lambda.free.transpose();
    for (std::size_t z = 0; z < zero_index_.size(); ++z) {
      trace_.zero_draws(r, static_cast<Eigen::Index>(z)) = lambda.full[zero_index_[z]];
    }
    trace_.log_posterior.push_back(log_posterior);
    trace_.accepted.push_back(accepted);
  }

  Trace finish(Clock::time_point start, int iterations) {
    trace_.wall_seconds = seconds_since(start);
    trace_.iterations_per_second =
        trace_.wall_seconds > 0.0 ? iterations / trace_.wall_seconds : 0.0;
    return std::move(trace_);
  }

  Trace& trace() { return trace_; }

 private:
  int burn_in_;
  std::vector<int> zero_index_;
  Trace trace_;
};

bool accept(double log_ratio, Philox& rng) {
  if (std::isnan(log_ratio)) return false;
  return log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio;
}

/// Robbins-Monro step on log(scale) towards the target acceptance probability.
void adapt_scale(double& scale, double accept_prob, double target, int t) {
  const double gain = 1.0 / std::pow(static_cast<double>(t) + 1.0, 0.6);
  scale *= std::exp(gain * (accept_prob - target));
}

double accept_probability(double log_ratio) {
  if (std::isnan(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

void require_jacobian(const Model& model, const ProbParams& pp) {
  JacobianReport r;
  try {
    r = jacobian_matrix(pp, model.scheme(), model.layout(), model.xi(), true);
  } catch (const SingularJacobian&) {
    r.condition_estimate = std::numeric_limits<double>::infinity();
  }
  if (!(r.condition_estimate < kMaxCondition)) {
    throw SamplerError("Jacobian of the probability parameterisation is rank deficient "
                       "(condition estimate " + std::to_string(r.condition_estimate) +
                       "); increase latent_levels");
  }
}

ProbParams gibbs_step(const Model& model, const ProbParams& pp, double alpha, Philox& rng) {
  if (!model.has_latents()) {
    return sample_conditional_dirichlet(AugmentedTable{model.table().counts}, model.layout(),
                                        alpha, rng);
  }
  const AugmentedTable nA = sample_latent_split(pp, model.table(), model.layout(), rng);
  return sample_conditional_dirichlet(nA, model.layout(), alpha, rng);
}

double augmented_loglik(const AugmentedTable& nA, const JointProbabilities& joint) {
  return multinomial_loglik(nA.counts, joint.augmented);
}

/// Additive logistic coordinates of Π: log(pi_k / pi_last) per conditional.
Eigen::VectorXd to_logits(const ProbParams& pp, const DagLayout& layout) {
  Eigen::VectorXd theta(layout.d_pi());
  for (int v = 0; v < layout.n_vertices(); ++v) {
    const int lv = layout.dag().levels(v);
    for (int c = 0; c < layout.n_configs(v); ++c) {
      const int off = layout.table_offset(v) + c * lv;
      for (int k = 0; k + 1 < lv; ++k) {
        theta[layout.pi_offset(v) + c * (lv - 1) + k] =
            std::log(pp.table[off + k]) - std::log(pp.table[off + lv - 1]);
      }
    }
  }
  return theta;
}

ProbParams from_logits(const Eigen::VectorXd& theta, const DagLayout& layout) {
  ProbParams pp;
  pp.table.resize(layout.table_size());
  for (int v = 0; v < layout.n_vertices(); ++v) {
    const int lv = layout.dag().levels(v);
    for (int c = 0; c < layout.n_configs(v); ++c) {
      const int off = layout.table_offset(v) + c * lv;
      double mx = 0.0;
      for (int k = 0; k + 1 < lv; ++k) mx = std::max(mx, theta[layout.pi_offset(v) + c * (lv - 1) + k]);
      double sum = std::exp(-mx);
      pp.table[off + lv - 1] = sum;
      for (int k = 0; k + 1 < lv; ++k) {
        const double e = std::exp(theta[layout.pi_offset(v) + c * (lv - 1) + k] - mx);
        pp.table[off + k] = e;
        sum += e;
      }
      for (int k = 0; k < lv; ++k) pp.table[off + k] /= sum;
    }
  }
  return pp;
}

double log_simplex_volume(const ProbParams& pp) {
  double out = 0.0;
  for (double x : pp.table) out += std::log(x);
  return out;
}

std::vector<double> initial_scales(const ChainConfig& cfg, std::size_t blocks, double fallback) {
  if (cfg.rw_scales.empty()) return std::vector<double>(blocks, fallback);
  if (cfg.rw_scales.size() == 1) return std::vector<double>(blocks, cfg.rw_scales[0]);
  if (cfg.rw_scales.size() != blocks) {
    throw InputError("sampler.rw_scales has " + std::to_string(cfg.rw_scales.size()) +
                     " entries; expected 1 or " + std::to_string(blocks));
  }
  return cfg.rw_scales;
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  if (name == "gibbs") return Algorithm::gibbs;
  if (name == "pbis") return Algorithm::pbis;
  if (name == "paa") return Algorithm::paa;
  if (name == "rw_lambda") return Algorithm::rw_lambda;
  if (name == "rw_pi") return Algorithm::rw_pi;
  throw InputError("unknown algorithm '" + name + "'");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::gibbs: return "gibbs";
    case Algorithm::pbis: return "pbis";
    case Algorithm::paa: return "paa";
    case Algorithm::rw_lambda: return "rw_lambda";
    case Algorithm::rw_pi: return "rw_pi";
  }
  return "?";
}

SplitPrior parse_split_prior(const std::string& name) {
  if (name == "conditional") return SplitPrior::conditional;
  if (name == "uniform") return SplitPrior::uniform;
  throw InputError("unknown split prior '" + name + "'");
}

std::string to_string(SplitPrior p) {
  return p == SplitPrior::conditional ? "conditional" : "uniform";
}

void ChainConfig::validate() const {
  if (iterations < 1) throw InputError("sampler.iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) {
    throw InputError("sampler.burn_in must satisfy 0 <= burn_in < iterations");
  }
  if (latent_levels < 2) throw InputError("model.latent_levels must be at least 2");
  for (double s : rw_scales) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw InputError("sampler.rw_scales must be nonnegative");
  }
  if (!(rw_target > 0.0 && rw_target < 1.0)) throw InputError("sampler.rw_target must lie in (0, 1)");
  if (paa_stage1_iterations < 0) throw InputError("sampler.paa_stage1_iterations must be nonnegative");
  if (paa_reorder.mode == Reorder::Mode::thin && paa_reorder.thin < 1) {
    throw InputError("sampler.paa_reorder thinning interval must be at least 1");
  }
  if (!(prior.alpha > 0.0)) throw InputError("prior.alpha must be positive");
  if (prior.kind == PriorKind::iid_normal && !(prior.sigma2 > 0.0)) {
    throw InputError("prior.sigma2 must be positive");
  }
}

Model::Model(const BidirectedGraph& graph, ContingencyTable table, int latent_levels,
             const PriorSpec& prior, const std::optional<std::vector<VertexSet>>& marginals)
    : scheme_(build_marginal_scheme(graph, marginals)),
      layout_(augmented_dag(graph, latent_levels)),
      table_(std::move(table)),
      prior_(prior),
      lambda_prior_(prior, scheme_, static_cast<double>(table_.total())) {
  if (static_cast<int>(table_.counts.size()) != layout_.n_observed_cells()) {
    throw InputError("table has " + std::to_string(table_.counts.size()) + " cells; model has " +
                     std::to_string(layout_.n_observed_cells()));
  }
  if (table_.total() < 1) throw InputError("table is empty");
  try {
    xi_ = make_xi_selector(layout_, scheme_);
  } catch (const SamplerError& e) {
    xi_error_ = e.what();
  }
}

const XiSelector& Model::xi() const {
  if (!xi_) throw SamplerError(xi_error_);
  return *xi_;
}

ChainState evaluate_state(const Model& model, ProbParams pp, bool with_jacobian) {
  if (pp.min_probability() < kProbFloor) {
    throw NonPositiveProbability("conditional probability below floor");
  }
  ChainState st;
  st.joint = joint_from_params(pp, model.layout());
  st.lambda = lambda_from_P(model.scheme(), st.joint.observed);
  st.log_lik = multinomial_loglik(model.table().counts, st.joint.observed);
  st.log_prior = model.lambda_prior().log_density(st.lambda.free);
  if (model.has_xi()) {
    const Eigen::VectorXd pi = pp.vectorize(model.layout());
    st.xi.resize(model.xi().size());
    for (int k = 0; k < model.xi().size(); ++k) st.xi[k] = pi[model.xi().indices[k]];
  }
  if (with_jacobian) {
    st.log_jac = jacobian_matrix(pp, model.scheme(), model.layout(), model.xi()).log_abs_det;
  }
  st.pp = std::move(pp);
  return st;
}

double Trace::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  double s = 0.0;
  for (double a : accepted) s += a;
  return s / static_cast<double>(accepted.size());
}

ProbParams initial_params(const Model& model, double alpha, Philox& rng) {
  const auto& layout = model.layout();
  const int ni = layout.n_observed_cells();
  const int nl = layout.n_latent_cells();
  std::vector<double> nA(layout.n_augmented_cells());
  for (int j = 0; j < layout.n_augmented_cells(); ++j) {
    nA[j] = (static_cast<double>(model.table().counts[j % ni]) + 0.5) / nl;
  }
  return sample_conditional_dirichlet(nA, layout, alpha, rng);
}

// ---------------------------------------------------------------- Gibbs

Trace gibbs_run(const ChainConfig& cfg, const Model& model, Philox& rng) {
  cfg.validate();
  const auto start = Clock::now();
  Recorder rec(cfg, model);
  ProbParams pp = initial_params(model, cfg.prior.alpha, rng);
  for (int t = 0; t < cfg.iterations; ++t) {
    pp = gibbs_step(model, pp, cfg.prior.alpha, rng);
    if (t >= cfg.burn_in) {
      const ChainState st = evaluate_state(model, pp, false);
      rec.record(t, st.lambda, st.log_posterior(), 1.0);
    }
  }
  return rec.finish(start, cfg.iterations);
}

// ---------------------------------------------------------------- PBIS

Trace pbis_run(const ChainConfig& cfg, const Model& model, Philox& rng) {
  cfg.validate();
  const auto start = Clock::now();
  const auto& layout = model.layout();
  const double alpha = cfg.prior.alpha;
  Recorder rec(cfg, model);

  ChainState cur = evaluate_state(model, initial_params(model, alpha, rng), false);
  require_jacobian(model, cur.pp);
  cur = evaluate_state(model, cur.pp, true);
  cur.nA = model.has_latents() ? sample_latent_split(cur.pp, model.table(), layout, rng)
                               : AugmentedTable{model.table().counts};
  double cur_fq = conditional_dirichlet_logdensity(cur.pp, cur.nA, layout, alpha);

  for (int t = 0; t < cfg.iterations; ++t) {
    AugmentedTable nA = model.has_latents()
                            ? sample_latent_split(cur.pp, model.table(), layout, rng)
                            : AugmentedTable{model.table().counts};
    ProbParams pp = sample_conditional_dirichlet(nA, layout, alpha, rng);
    bool ok = false;
    try {
      ChainState prop = evaluate_state(model, std::move(pp), true);
      const double prop_fq = conditional_dirichlet_logdensity(prop.pp, nA, layout, alpha);
      // split terms log f(n^A | Π, n) = log f(n^A | Π) - log f(n | Π)
      auto split = [](const AugmentedTable& a, const ChainState& s) {
        return augmented_loglik(a, s.joint) - s.log_lik;
      };
      double log_ratio = prop.log_lik - cur.log_lik + prop.log_prior - cur.log_prior + cur_fq -
                         prop_fq + prop.log_jac - cur.log_jac + split(cur.nA, prop) -
                         split(nA, cur);
      if (cfg.pbis_split_prior == SplitPrior::conditional) {
        log_ratio += split(nA, prop) - split(cur.nA, cur);
      }
      if (accept(log_ratio, rng)) {
        prop.nA = std::move(nA);
        cur = std::move(prop);
        cur_fq = prop_fq;
        ok = true;
      }
    } catch (const SingularJacobian&) {
      ++rec.trace().singular_jacobians;
    } catch (const NonPositiveProbability&) {
      ++rec.trace().probability_floor_hits;
    }
    rec.record(t, cur.lambda, cur.log_posterior(), ok ? 1.0 : 0.0);
  }
  return rec.finish(start, cfg.iterations);
}

// ---------------------------------------------------------------- PAA

Trace paa_run(const ChainConfig& cfg, const Model& model, Philox& rng) {
  cfg.validate();
  const auto start = Clock::now();
  const auto& layout = model.layout();
  const double alpha = cfg.prior.alpha;
  Recorder rec(cfg, model);

  ChainState cur = evaluate_state(model, initial_params(model, alpha, rng), false);
  require_jacobian(model, cur.pp);
  cur = evaluate_state(model, cur.pp, true);
  double cur_fq = pseudo_prior_logdensity(cur.pp, layout, alpha);

  // Stage 1: Gibbs sample, burn-in dropped, then reordered.
  const int stage1 = cfg.paa_stage1_iterations > 0 ? cfg.paa_stage1_iterations
                                                   : cfg.iterations + cfg.burn_in;
  std::vector<ProbParams> sample;
  sample.reserve(static_cast<std::size_t>(std::max(0, stage1 - cfg.burn_in)));
  ProbParams pp = cur.pp;
  for (int t = 0; t < stage1; ++t) {
    pp = gibbs_step(model, pp, alpha, rng);
    if (t >= cfg.burn_in) sample.push_back(pp);
  }
  const auto order = reorder_indices(static_cast<int>(sample.size()), cfg.paa_reorder, rng);
  if (static_cast<int>(order.size()) < cfg.iterations) {
    throw SamplerError("PAA stage-1 sample exhausted: " + std::to_string(order.size()) +
                       " reordered draws for " + std::to_string(cfg.iterations) +
                       " iterations; increase sampler.paa_stage1_iterations");
  }

  // Stage 2: independence proposals in reordered sequence.
  for (int t = 0; t < cfg.iterations; ++t) {
    bool ok = false;
    try {
      ChainState prop = evaluate_state(model, sample[order[t]], true);
      const double prop_fq = pseudo_prior_logdensity(prop.pp, layout, alpha);
      const double log_ratio =
          prop.log_prior - cur.log_prior + cur_fq - prop_fq + prop.log_jac - cur.log_jac;
      if (accept(log_ratio, rng)) {
        cur = std::move(prop);
        cur_fq = prop_fq;
        ok = true;
      }
    } catch (const SingularJacobian&) {
      ++rec.trace().singular_jacobians;
    } catch (const NonPositiveProbability&) {
      ++rec.trace().probability_floor_hits;
    }
    rec.record(t, cur.lambda, cur.log_posterior(), ok ? 1.0 : 0.0);
  }
  return rec.finish(start, cfg.iterations);
}

// ---------------------------------------------------------------- RW on lambda

Trace rw_lambda_run(const ChainConfig& cfg, const Model& model, Philox& rng) {
  cfg.validate();
  const auto start = Clock::now();
  const auto& scheme = model.scheme();
  Recorder rec(cfg, model);

  // one block per marginal holding its non-intercept free interactions
  std::vector<std::vector<int>> blocks(scheme.marginals.size());
  for (int f = 1; f < scheme.n_free(); ++f) {
    blocks[scheme.effects[scheme.free_index[f]].marginal].push_back(f);
  }
  std::erase_if(blocks, [](const auto& b) { return b.empty(); });
  std::vector<double> scales = initial_scales(cfg, blocks.size(), 0.1);

  ChainState init = evaluate_state(model, initial_params(model, cfg.prior.alpha, rng), false);
  LambdaVector lambda = init.lambda;
  Eigen::VectorXd p_cur = init.joint.observed;
  double log_lik = init.log_lik;
  double log_prior = init.log_prior;
  std::normal_distribution<double> normal;

  for (int t = 0; t < cfg.iterations; ++t) {
    int accepted = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (scales[b] == 0.0) {
        ++accepted;
        continue;
      }
      Eigen::VectorXd proposal = lambda.free;
      for (int f : blocks[b]) proposal[f] += scales[b] * normal(rng);
      double prob = 0.0;
      try {
        Eigen::VectorXd p = invert_lambda(scheme, proposal, p_cur);
        LambdaVector lv = lambda_from_P(scheme, p);
        const double ll = multinomial_loglik(model.table().counts, p);
        const double lp = model.lambda_prior().log_density(lv.free);
        const double log_ratio = ll - log_lik + lp - log_prior;
        prob = accept_probability(log_ratio);
        if (accept(log_ratio, rng)) {
          lambda = std::move(lv);
          p_cur = std::move(p);
          log_lik = ll;
          log_prior = lp;
          ++accepted;
        }
      } catch (const NonConvergence&) {
        ++rec.trace().inversion_failures;
      } catch (const NonPositiveProbability&) {
        ++rec.trace().probability_floor_hits;
      }
      if (t < cfg.burn_in && cfg.rw_tune) adapt_scale(scales[b], prob, cfg.rw_target, t);
    }
    rec.record(t, lambda, log_lik + log_prior,
               blocks.empty() ? 1.0 : static_cast<double>(accepted) / blocks.size());
  }
  rec.trace().final_scales = scales;
  return rec.finish(start, cfg.iterations);
}

// ---------------------------------------------------------------- RW on logit(pi)

Trace rw_pi_run(const ChainConfig& cfg, const Model& model, Philox& rng) {
  cfg.validate();
  const auto start = Clock::now();
  const auto& layout = model.layout();
  Recorder rec(cfg, model);
  std::vector<double> scales = initial_scales(cfg, 1, 0.05);

  ChainState cur = evaluate_state(model, initial_params(model, cfg.prior.alpha, rng), false);
  require_jacobian(model, cur.pp);
  cur = evaluate_state(model, cur.pp, true);
  Eigen::VectorXd theta = to_logits(cur.pp, layout);
  auto log_target = [](const ChainState& s) {
    return s.log_lik + s.log_prior + s.log_jac + log_simplex_volume(s.pp);
  };
  double cur_target = log_target(cur);
  std::normal_distribution<double> normal;

  for (int t = 0; t < cfg.iterations; ++t) {
    bool ok = false;
    if (scales[0] == 0.0) {
      ok = true;
    } else {
      Eigen::VectorXd proposal = theta;
      for (Eigen::Index k = 0; k < proposal.size(); ++k) proposal[k] += scales[0] * normal(rng);
      double prob = 0.0;
      try {
        ChainState prop = evaluate_state(model, from_logits(proposal, layout), true);
        const double target = log_target(prop);
        const double log_ratio = target - cur_target;
        prob = accept_probability(log_ratio);
        if (accept(log_ratio, rng)) {
          cur = std::move(prop);
          cur_target = target;
          theta = proposal;
          ok = true;
        }
      } catch (const SingularJacobian&) {
        ++rec.trace().singular_jacobians;
      } catch (const NonPositiveProbability&) {
        ++rec.trace().probability_floor_hits;
      }
      if (t < cfg.burn_in && cfg.rw_tune) adapt_scale(scales[0], prob, cfg.rw_target, t);
    }
    rec.record(t, cur.lambda, cur.log_posterior(), ok ? 1.0 : 0.0);
  }
  rec.trace().final_scales = scales;
  return rec.finish(start, cfg.iterations);
}

// ---------------------------------------------------------------- orchestration

Trace run_chain(const ChainConfig& cfg, const Model& model, int chain) {
  Philox rng(cfg.seed, static_cast<std::uint64_t>(chain));
  Trace out;
  switch (cfg.algorithm) {
    case Algorithm::gibbs: out = gibbs_run(cfg, model, rng); break;
    case Algorithm::pbis: out = pbis_run(cfg, model, rng); break;
    case Algorithm::paa: out = paa_run(cfg, model, rng); break;
    case Algorithm::rw_lambda: out = rw_lambda_run(cfg, model, rng); break;
    case Algorithm::rw_pi: out = rw_pi_run(cfg, model, rng); break;
  }
  out.chain = chain;
  return out;
}

std::vector<Trace> run_chains(const ChainConfig& cfg, const Model& model, int chains,
                              int threads) {
  if (chains < 1) throw InputError("sampler.chains must be at least 1");
  cfg.validate();
  std::vector<Trace> traces(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < chains; k = next++) {
      try {
        traces[k] = run_chain(cfg, model, k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(threads, 1, chains);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return traces;
}

}  // namespace margmc

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "margmc/error.hpp"
#include "margmc/samplers.hpp"

using namespace margmc;

namespace {

BidirectedGraph chain4() {
  return read_graph_file(std::string(MARGMC_DATA_DIR) + "/chain4.graph");
}

Model chain4_model(int k = 3, PriorSpec prior = {}) {
  const auto g = chain4();
  return Model(g, read_counts_csv(std::string(MARGMC_DATA_DIR) + "/table3_counts.csv", g), k, prior);
}

ChainConfig short_config(Algorithm a, int iterations = 1200, int burn_in = 200) {
  ChainConfig c;
  c.algorithm = a;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.seed = 5;
  return c;
}

std::string validation_message(const ChainConfig& c) {
  try {
    c.validate();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Samplers, ParseNames) {
  for (Algorithm a : {Algorithm::gibbs, Algorithm::pbis, Algorithm::paa, Algorithm::rw_lambda, Algorithm::rw_pi}) {
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  }
  EXPECT_THROW(parse_algorithm("hmc"), InputError);
  EXPECT_EQ(parse_split_prior("uniform"), SplitPrior::uniform);
  EXPECT_THROW(parse_split_prior("x"), InputError);
}

TEST(Samplers, ValidationNamesKeys) {
  ChainConfig c;
  c.burn_in = c.iterations;
  EXPECT_NE(validation_message(c).find("sampler.burn_in"), std::string::npos);
  c = ChainConfig{};
  c.iterations = 0;
  EXPECT_NE(validation_message(c).find("sampler.iterations"), std::string::npos);
  c = ChainConfig{};
  c.prior.alpha = 0.0;
  EXPECT_NE(validation_message(c).find("prior.alpha"), std::string::npos);
  c = ChainConfig{};
  c.latent_levels = 1;
  EXPECT_NE(validation_message(c).find("model.latent_levels"), std::string::npos);
  c = ChainConfig{};
  c.rw_target = 1.5;
  EXPECT_NE(validation_message(c).find("sampler.rw_target"), std::string::npos);
  EXPECT_EQ(validation_message(ChainConfig{}), "");
}

TEST(Samplers, ModelDimensions) {
  const Model m = chain4_model();
  EXPECT_EQ(m.d_pi(), 16);
  EXPECT_EQ(m.n_free(), 11);
  EXPECT_EQ(m.d_xi(), 6);
  EXPECT_TRUE(m.has_latents());
  EXPECT_TRUE(m.has_xi());
  const auto g = chain4();
  EXPECT_THROW(Model(g, ContingencyTable{{1, 2, 3}}, 3, PriorSpec{}), InputError);
  EXPECT_THROW(Model(g, ContingencyTable{std::vector<long long>(16, 0)}, 3, PriorSpec{}), InputError);
}

TEST(Samplers, BinaryLatentFailsFastForJacobianSamplers) {
  const Model m = chain4_model(2);
  EXPECT_FALSE(m.has_xi());
  EXPECT_THROW(run_chain(short_config(Algorithm::paa), m, 0), SamplerError);
  EXPECT_THROW(run_chain(short_config(Algorithm::pbis), m, 0), SamplerError);
  // Gibbs does not need the Jacobian
  EXPECT_EQ(run_chain(short_config(Algorithm::gibbs), m, 0).rows(), 1000);
}

TEST(Samplers, TraceShapeAndExactZeros) {
  const Model m = chain4_model();
  for (Algorithm a : {Algorithm::gibbs, Algorithm::pbis, Algorithm::paa}) {
    const Trace t = run_chain(short_config(a), m, 0);
    EXPECT_EQ(t.rows(), 1000) << to_string(a);
    EXPECT_EQ(t.draws.cols(), 11);
    EXPECT_EQ(t.labels, m.scheme().free_labels());
    EXPECT_EQ(t.zero_draws.cols(), 5);
    EXPECT_LT(t.zero_draws.cwiseAbs().maxCoeff(), 1e-12) << to_string(a);
    EXPECT_EQ(t.log_posterior.size(), 1000u);
    EXPECT_EQ(t.accepted.size(), 1000u);
    EXPECT_GT(t.wall_seconds, 0.0);
  }
}

TEST(Samplers, Deterministic) {
  const Model m = chain4_model();
  for (Algorithm a : {Algorithm::gibbs, Algorithm::pbis, Algorithm::paa, Algorithm::rw_lambda, Algorithm::rw_pi}) {
    const auto c = short_config(a, 400, 100);
    const Trace x = run_chain(c, m, 1);
    const Trace y = run_chain(c, m, 1);
    EXPECT_TRUE(x.draws == y.draws) << to_string(a);
    EXPECT_FALSE(x.draws == run_chain(c, m, 2).draws) << to_string(a);
  }
}

TEST(Samplers, ChainsIndependentOfThreadCount) {
  const Model m = chain4_model();
  const auto c = short_config(Algorithm::paa, 600, 100);
  const auto one = run_chains(c, m, 4, 1);
  const auto four = run_chains(c, m, 4, 4);
  ASSERT_EQ(one.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(one[k].chain, k);
    EXPECT_TRUE(one[k].draws == four[k].draws);
    EXPECT_TRUE(one[k].draws == run_chain(c, m, k).draws);
  }
  EXPECT_FALSE(one[0].draws == one[1].draws);
  EXPECT_THROW(run_chains(c, m, 0, 1), InputError);
}

TEST(Samplers, PaaStageOneExhaustion) {
  const Model m = chain4_model();
  auto c = short_config(Algorithm::paa);
  c.paa_stage1_iterations = 500;  // 300 after burn-in, 1200 needed
  try {
    run_chain(c, m, 0);
    FAIL() << "expected SamplerError";
  } catch (const SamplerError& e) {
    EXPECT_NE(std::string(e.what()).find("paa_stage1_iterations"), std::string::npos);
  }
  c.paa_reorder = Reorder::parse("thin:2");
  c.paa_stage1_iterations = 2 * 1200 + 200;
  EXPECT_EQ(run_chain(c, m, 0).rows(), 1000);
}

TEST(Samplers, ZeroScaleRandomWalksNeverMove) {
  const Model m = chain4_model();
  for (Algorithm a : {Algorithm::rw_lambda, Algorithm::rw_pi}) {
    auto c = short_config(a, 300, 100);
    c.rw_scales = {0.0};
    c.rw_tune = false;
    const Trace t = run_chain(c, m, 0);
    EXPECT_DOUBLE_EQ(t.acceptance_rate(), 1.0) << to_string(a);
    for (Eigen::Index r = 1; r < t.draws.rows(); ++r) {
      ASSERT_TRUE(t.draws.row(r) == t.draws.row(0)) << to_string(a);
    }
  }
}

TEST(Samplers, RandomWalkScaleCountChecked) {
  const Model m = chain4_model();
  auto c = short_config(Algorithm::rw_lambda, 300, 100);
  c.rw_scales = {0.1, 0.2};
  EXPECT_THROW(run_chain(c, m, 0), InputError);
}

TEST(Samplers, RandomWalkTuningReachesTarget) {
  const Model m = chain4_model();
  for (Algorithm a : {Algorithm::rw_lambda, Algorithm::rw_pi}) {
    const Trace t = run_chain(short_config(a, 6000, 2000), m, 0);
    EXPECT_NEAR(t.acceptance_rate(), 0.35, 0.07) << to_string(a);
    EXPECT_FALSE(t.final_scales.empty());
  }
}

TEST(Samplers, StateIsInternallyConsistent) {
  const Model m = chain4_model();
  Philox rng(3);
  const ProbParams pp = initial_params(m, 1.0, rng);
  EXPECT_GT(pp.min_probability(), 0.0);
  const ChainState st = evaluate_state(m, pp, true);
  const auto lv = lambda_from_P(m.scheme(), joint_from_params(st.pp, m.layout()).observed);
  EXPECT_LT((lv.free - st.lambda.free).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(st.log_lik, multinomial_loglik(m.table().counts, st.joint.observed), 1e-10);
  EXPECT_NEAR(st.log_prior, m.lambda_prior().log_density(st.lambda.free), 1e-12);
  EXPECT_EQ(st.xi.size(), 6);
  EXPECT_TRUE(std::isfinite(st.log_jac));
}

TEST(Samplers, PseudoPriorWithUnitAlphaIsConstant) {
  const Model m = chain4_model();
  Philox rng(4);
  const double a = pseudo_prior_logdensity(initial_params(m, 1.0, rng), m.layout(), 1.0);
  const double b = pseudo_prior_logdensity(initial_params(m, 1.0, rng), m.layout(), 1.0);
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(Samplers, GibbsOnSaturatedPairIsExactDirichlet) {
  const auto g = BidirectedGraph::from_edge_list({{"A", 2}, {"B", 2}}, {{"A", "B"}});
  PriorSpec flat;
  flat.kind = PriorKind::flat;
  const Model m(g, ContingencyTable{{30, 10, 20, 40}}, 2, flat);
  auto c = short_config(Algorithm::gibbs, 20000, 0);
  c.prior = flat;
  const Trace t = run_chain(c, m, 0);
  // A ~ Beta(1 + 50, 1 + 50); B | A=1 ~ Beta(31, 21); lambda_A(2) = E over cells of
  // the log contrast, estimated here through the marginal of A only
  const auto rows = summarize(t.draws, t.labels, 1.0);
  // lambda_AB(2,2) = (1/4) log odds ratio; its posterior mean under independent
  // Beta conditionals is (1/4)(E log p(B=1|A=1)/p(B=2|A=1) - same for A=2)
  auto digamma_diff = [](double a, double b) {
    // E[log X - log(1-X)] for X ~ Beta(a, b) = psi(a) - psi(b); use series for psi
    auto psi = [](double x) {
      double r = 0.0;
      while (x < 8) r -= 1 / x++;
      const double f = 1 / (x * x);
      return r + std::log(x) - 0.5 / x - f * (1.0 / 12 - f * (1.0 / 120 - f / 252));
    };
    return psi(a) - psi(b);
  };
  // cells (A,B): (1,1)=30 (2,1)=10 (1,2)=20 (2,2)=40
  const double expect_ab = 0.25 * (digamma_diff(1 + 30, 1 + 20) - digamma_diff(1 + 10, 1 + 40));
  EXPECT_NEAR(rows[3].mean, expect_ab, 3 * rows[3].mce_mean);
}

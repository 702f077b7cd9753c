#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "margmc/error.hpp"
#include "margmc/graph.hpp"
#include "margmc/prob_model.hpp"
#include "margmc/rng.hpp"
#include "margmc/scheme.hpp"

using namespace margmc;

namespace {

BidirectedGraph chain4() {
  return BidirectedGraph::from_edge_list({{"A", 2}, {"B", 2}, {"C", 2}, {"D", 2}},
                                         {{"A", "B"}, {"B", "C"}, {"C", "D"}});
}

VertexSet set_of(const BidirectedGraph& g, const std::string& names) {
  VertexSet s;
  for (char c : names) s = s.with(g.index_of(std::string(1, c)));
  return s;
}

Eigen::VectorXd random_table(int n, std::uint64_t seed) {
  Philox rng(seed);
  return sample_dirichlet(Eigen::VectorXd::Constant(n, 3.0), rng);
}

// cell index with first variable fastest, levels 1-based
int cell(const std::vector<int>& levels) {
  int idx = 0, stride = 1;
  for (int l : levels) {
    idx += (l - 1) * stride;
    stride *= 2;
  }
  return idx;
}

}  // namespace

TEST(Scheme, ChainMarginalsAndEffects) {
  const auto g = chain4();
  const auto s = build_marginal_scheme(g);
  std::vector<std::string> m;
  for (auto v : s.marginals) m.push_back(g.label(v));
  EXPECT_EQ(m, (std::vector<std::string>{"AC", "AD", "BD", "ABD", "ACD", "ABCD"}));
  EXPECT_TRUE(s.hierarchical);
  EXPECT_TRUE(s.order_decomposable);
  EXPECT_EQ(s.effects.size(), 16u);
  EXPECT_EQ(s.n_free(), 11);
  EXPECT_EQ(s.zero_index.size(), 5u);
  std::vector<std::string> zeros;
  for (int r : s.zero_index) zeros.push_back(s.label(r));
  EXPECT_EQ(zeros, (std::vector<std::string>{"lambda[AC].AC(2,2)", "lambda[AD].AD(2,2)",
                                             "lambda[BD].BD(2,2)", "lambda[ABD].ABD(2,2,2)",
                                             "lambda[ACD].ACD(2,2,2)"}));
  EXPECT_EQ(s.free_labels().front(), "lambda[AC].()");
  EXPECT_EQ(s.M.rows(), 4 + 4 + 4 + 8 + 8 + 16);
  EXPECT_EQ(s.C.rows(), 16);
  EXPECT_EQ(s.K.rows(), 5);
}

TEST(Scheme, EveryEffectAllocatedOnce) {
  const auto s = build_marginal_scheme(chain4());
  std::set<std::uint32_t> seen;
  for (const auto& e : s.effects) {
    EXPECT_TRUE(seen.insert(e.subset.bits()).second) << "effect allocated twice";
    EXPECT_TRUE(s.marginals[e.marginal].contains(e.subset));
    for (int j = 0; j < e.marginal; ++j) EXPECT_FALSE(s.marginals[j].contains(e.subset));
  }
}

TEST(Scheme, MarginalisationBlocksSumToOne) {
  const auto s = build_marginal_scheme(chain4());
  const Eigen::VectorXd p = random_table(16, 3);
  const Eigen::VectorXd mp = s.M * p;
  int off = 0;
  for (std::size_t k = 0; k < s.marginals.size(); ++k) {
    const int n = 1 << s.marginals[k].size();
    EXPECT_NEAR(mp.segment(off, n).sum(), 1.0, 1e-14);
    EXPECT_EQ(off, s.marginal_offset[k]);
    off += n;
  }
  // M has one 1 per column in each block
  EXPECT_TRUE((s.M.colwise().sum().array() == static_cast<double>(s.marginals.size())).all());
}

TEST(Scheme, BinaryContrastsMatchClosedForm) {
  const auto g = chain4();
  const auto s = build_marginal_scheme(g);
  const Eigen::VectorXd p = random_table(16, 5);
  const auto lv = lambda_from_P(s, p);
  // AC margin
  double m[3][3] = {};
  for (int a = 1; a <= 2; ++a)
    for (int b = 1; b <= 2; ++b)
      for (int c = 1; c <= 2; ++c)
        for (int d = 1; d <= 2; ++d) m[a][c] += p[cell({a, b, c, d})];
  const double intercept = 0.25 * std::log(m[1][1] * m[1][2] * m[2][1] * m[2][2]);
  const double a2 = 0.25 * std::log(m[2][1] * m[2][2] / (m[1][1] * m[1][2]));
  const double c2 = 0.25 * std::log(m[1][2] * m[2][2] / (m[1][1] * m[2][1]));
  const double ac = 0.25 * std::log(m[1][1] * m[2][2] / (m[1][2] * m[2][1]));
  EXPECT_NEAR(lv.full[0], intercept, 1e-12);
  EXPECT_NEAR(lv.full[1], a2, 1e-12);
  EXPECT_NEAR(lv.full[2], c2, 1e-12);
  EXPECT_NEAR(lv.full[3], ac, 1e-12);
}

TEST(Scheme, SaturatedDesignInvertsContrasts) {
  const auto g = BidirectedGraph::from_edge_list({{"X", 3}, {"Y", 2}}, {{"X", "Y"}});
  const Eigen::MatrixXd X = saturated_design(g, g.all());
  ASSERT_EQ(X.rows(), 6);
  ASSERT_EQ(X.cols(), 6);
  EXPECT_TRUE(X.col(0).isApproxToConstant(1.0));
  // sum-to-zero columns apart from the intercept
  for (int c = 1; c < 6; ++c) EXPECT_NEAR(X.col(c).sum(), 0.0, 1e-12);
  const auto s = build_marginal_scheme(g);
  EXPECT_TRUE((s.C * X).isIdentity(1e-12));
}

TEST(Scheme, IndependenceTablesHaveZeroConstrainedInteractions) {
  // p built from the augmented DAG satisfies every marginal independence
  const auto g = chain4();
  const auto s = build_marginal_scheme(g);
  const DagLayout layout(augmented_dag(g, 3));
  Philox rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> nA(layout.n_augmented_cells(), 0.0);
    const ProbParams pp = sample_conditional_dirichlet(nA, layout, 1.0, rng);
    const auto lv = lambda_from_P(s, joint_from_params(pp, layout).observed);
    EXPECT_LT(lv.zero_residual, 1e-13);
    for (int r : s.zero_index) EXPECT_NEAR(lv.full[r], 0.0, 1e-13);
  }
  // a generic table does not
  EXPECT_GT(lambda_from_P(s, random_table(16, 1)).zero_residual, 1e-4);
}

TEST(Scheme, ExplicitOrderingKeepsFreeSet) {
  const auto g = chain4();
  const auto def = build_marginal_scheme(g);
  const std::vector<VertexSet> paper = {set_of(g, "AC"), set_of(g, "AD"), set_of(g, "BD"),
                                        set_of(g, "ACD"), set_of(g, "ABD"), g.all()};
  const auto alt = build_marginal_scheme(g, paper);
  auto sorted = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  EXPECT_EQ(sorted(def.free_labels()), sorted(alt.free_labels()));
  const Eigen::VectorXd p = random_table(16, 2);
  EXPECT_NEAR(lambda_from_P(def, p).full.norm(), lambda_from_P(alt, p).full.norm(), 1e-12);
}

TEST(Scheme, RejectsInvalidOrderings) {
  const auto g = chain4();
  // full set first: not hierarchical
  EXPECT_THROW(build_marginal_scheme(g, std::vector<VertexSet>{g.all(), set_of(g, "AC"), set_of(g, "AD"),
                                                               set_of(g, "BD"), set_of(g, "ABD"),
                                                               set_of(g, "ACD")}),
               InputError);
  // missing a disconnected set
  EXPECT_THROW(build_marginal_scheme(g, std::vector<VertexSet>{set_of(g, "AC"), set_of(g, "AD"),
                                                               set_of(g, "BD"), set_of(g, "ABD"), g.all()}),
               InputError);
  // not ending with the full set
  EXPECT_THROW(build_marginal_scheme(g, std::vector<VertexSet>{set_of(g, "AC"), set_of(g, "AD"),
                                                               set_of(g, "BD"), set_of(g, "ABD"),
                                                               set_of(g, "ACD")}),
               InputError);
}

TEST(Scheme, Decomposability) {
  const auto g = chain4();
  EXPECT_TRUE(is_decomposable({set_of(g, "AB"), set_of(g, "BC")}));
  EXPECT_FALSE(is_decomposable({set_of(g, "AB"), set_of(g, "BC"), set_of(g, "AC")}));
  EXPECT_TRUE(is_decomposable({set_of(g, "ABC"), set_of(g, "AB"), set_of(g, "BC"), set_of(g, "AC")}));
}

TEST(Scheme, LambdaFromPRejectsZeroCell) {
  const auto s = build_marginal_scheme(chain4());
  Eigen::VectorXd p = Eigen::VectorXd::Constant(16, 1.0 / 15);
  p[0] = 0.0;
  EXPECT_THROW(lambda_from_P(s, p), NonPositiveProbability);
}

TEST(Scheme, InversionRoundTrip) {
  const auto s = build_marginal_scheme(chain4());
  Philox rng(4);
  for (int rep = 0; rep < 25; ++rep) {
    Eigen::VectorXd lam(s.n_free());
    for (auto& x : lam) x = rng.uniform() - 0.5;
    const Eigen::VectorXd p = invert_lambda(s, lam);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GT(p.minCoeff(), 0.0);
    const auto back = lambda_from_P(s, p);
    EXPECT_LT((back.free.tail(lam.size() - 1) - lam.tail(lam.size() - 1)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(back.zero_residual, 1e-9);
    // warm start from another interior table converges to the same point
    const Eigen::VectorXd warm = invert_lambda(s, lam, random_table(16, 100 + rep));
    EXPECT_LT((warm - p).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Scheme, InversionOfZeroIsUniform) {
  const auto s = build_marginal_scheme(chain4());
  const Eigen::VectorXd p = invert_lambda(s, Eigen::VectorXd::Zero(s.n_free()));
  EXPECT_TRUE(p.isApproxToConstant(1.0 / 16, 1e-12));
}

TEST(Scheme, InversionReportsNonConvergence) {
  const auto s = build_marginal_scheme(chain4());
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(s.n_free());
  lam[1] = 0.8;
  InversionOptions opt;
  opt.max_iterations = 1;
  EXPECT_THROW(invert_lambda(s, lam, opt), NonConvergence);
}

TEST(Scheme, EmbedFree) {
  const auto s = build_marginal_scheme(chain4());
  Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(s.n_free(), 1.0, 11.0);
  const Eigen::VectorXd full = embed_free(s, f);
  for (int r : s.zero_index) EXPECT_EQ(full[r], 0.0);
  for (int i = 0; i < s.n_free(); ++i) EXPECT_EQ(full[s.free_index[i]], f[i]);
}

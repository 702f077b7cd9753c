#include <benchmark/benchmark.h>

#include <string>

#include "margmc/jacobian.hpp"
#include "margmc/samplers.hpp"

using namespace margmc;

namespace {

const Model& chain4() {
  static const Model m = [] {
    const auto g = read_graph_file(std::string(MARGMC_DATA_DIR) + "/chain4.graph");
    return Model(g, read_counts_csv(std::string(MARGMC_DATA_DIR) + "/table3_counts.csv", g), 3,
                 PriorSpec{});
  }();
  return m;
}

ProbParams start_params() {
  Philox rng(11);
  return initial_params(chain4(), 1.0, rng);
}

void BM_LambdaFromP(benchmark::State& state) {
  const auto& m = chain4();
  const Eigen::VectorXd p = joint_from_params(start_params(), m.layout()).observed;
  for (auto _ : state) benchmark::DoNotOptimize(lambda_from_P(m.scheme(), p));
}
BENCHMARK(BM_LambdaFromP);

void BM_InvertLambda(benchmark::State& state) {
  const auto& m = chain4();
  const Eigen::VectorXd p = joint_from_params(start_params(), m.layout()).observed;
  const Eigen::VectorXd lf = lambda_from_P(m.scheme(), p).free;
  for (auto _ : state) benchmark::DoNotOptimize(invert_lambda(m.scheme(), lf));
}
BENCHMARK(BM_InvertLambda);

void BM_JacobianMatrix(benchmark::State& state) {
  const auto& m = chain4();
  const ProbParams pp = start_params();
  for (auto _ : state) benchmark::DoNotOptimize(jacobian_matrix(pp, m.scheme(), m.layout(), m.xi()));
}
BENCHMARK(BM_JacobianMatrix);

void BM_GibbsStep(benchmark::State& state) {
  const auto& m = chain4();
  ProbParams pp = start_params();
  Philox rng(12);
  for (auto _ : state) {
    const auto nA = sample_latent_split(pp, m.table(), m.layout(), rng);
    pp = sample_conditional_dirichlet(nA, m.layout(), 1.0, rng);
    benchmark::DoNotOptimize(pp);
  }
}
BENCHMARK(BM_GibbsStep);

void BM_Chain(benchmark::State& state) {
  ChainConfig c;
  c.algorithm = static_cast<Algorithm>(state.range(0));
  c.iterations = 2000;
  c.burn_in = 500;
  for (auto _ : state) benchmark::DoNotOptimize(run_chain(c, chain4(), 0));
  state.SetLabel(to_string(c.algorithm));
  state.SetItemsProcessed(state.iterations() * c.iterations);
}
BENCHMARK(BM_Chain)
    ->DenseRange(static_cast<int>(Algorithm::gibbs), static_cast<int>(Algorithm::rw_pi))
    ->Unit(benchmark::kMillisecond);

}  // namespace

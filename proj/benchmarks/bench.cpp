#include <benchmark/benchmark.h>

#include <random>

#include "sfgp/elbo.hpp"
#include "sfgp/objective.hpp"
#include "sfgp/train.hpp"

namespace {

using namespace sfgp;

Eigen::MatrixXd random_inputs(int N, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(N, d);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = normal(rng);
  }
  return X;
}

Problem classification_problem(int N, int K, int M) {
  Problem pb;
  pb.task = Task::Bernoulli;
  pb.partition = uniform_partition(K, -3, 3);
  pb.link_mode = LinkMode::TrainablePoint;
  pb.X = random_inputs(N, 2, 1);
  pb.y.resize(N);
  for (int i = 0; i < N; ++i) pb.y[i] = (pb.X(i, 0) > 0) ? 1.0 : 0.0;
  pb.M = M;
  return pb;
}

Theta problem_init(const Problem& pb) {
  std::vector<double> levels;
  for (double r : representatives(pb.partition)) {
    levels.push_back(1.0 / (1.0 + std::exp(-r)));
  }
  return init_theta(pb, 1, 1.0, levels);
}

void BM_Gram(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd X = random_inputs(n, 4, 2);
  const KernelParams params{0.0, 0.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(gram(X, params));
  }
}
BENCHMARK(BM_Gram)->Arg(10)->Arg(50)->Arg(200);

void BM_IntervalProbs(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const Partition p = uniform_partition(K, -3, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(interval_probs(p, {0.3, 1.7}));
  }
}
BENCHMARK(BM_IntervalProbs)->Arg(4)->Arg(20)->Arg(100);

void BM_ObjectiveValue(benchmark::State& state) {
  const Problem pb = classification_problem(static_cast<int>(state.range(0)), 20, 10);
  const Theta init = problem_init(pb);
  const Eigen::VectorXd theta = pack(layout_for(pb), init);
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective_value(pb, theta, init));
  }
}
BENCHMARK(BM_ObjectiveValue)->Arg(50)->Arg(200)->Arg(1000);

void BM_ValueAndGrad(benchmark::State& state) {
  const Problem pb = classification_problem(static_cast<int>(state.range(0)), 20, 10);
  const Theta init = problem_init(pb);
  const Eigen::VectorXd theta = pack(layout_for(pb), init);
  for (auto _ : state) {
    benchmark::DoNotOptimize(value_and_grad(pb, theta, init));
  }
}
BENCHMARK(BM_ValueAndGrad)->Arg(50)->Arg(200)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sfgp/elbo.hpp"
#include "sfgp/train.hpp"

using namespace sfgp;

namespace {

Eigen::MatrixXd make_inputs(int N, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(N, d);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = normal(rng);
  }
  return X;
}

Problem classify_problem(int N = 12, int K = 4, int M = 3) {
  Problem pb;
  pb.task = Task::Bernoulli;
  pb.partition = uniform_partition(K, -3, 3);
  pb.link_mode = LinkMode::TrainablePoint;
  pb.X = make_inputs(N, 2, 10);
  pb.y.resize(N);
  for (int i = 0; i < N; ++i) pb.y[i] = (pb.X(i, 0) + pb.X(i, 1) > 0) ? 1.0 : 0.0;
  pb.M = M;
  return pb;
}

Problem hetero_problem(int N = 10, int K = 3, int M = 3) {
  Problem pb;
  pb.task = Task::HeteroGauss;
  pb.partition = uniform_partition(K, -2, 2);
  pb.link_mode = LinkMode::Fixed;
  const auto reps = representatives(pb.partition);
  for (double r : reps) pb.fixed_levels.push_back(std::exp(r));
  pb.X = make_inputs(N, 1, 20);
  pb.y.resize(N);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  for (int i = 0; i < N; ++i) pb.y[i] = std::sin(pb.X(i, 0)) + 0.3 * normal(rng);
  pb.M = M;
  return pb;
}

Problem learnable_problem(LinkMode mode, RegKind reg_kind = RegKind::None, int N = 10,
                          int K = 3, int M = 3) {
  Problem pb;
  pb.task = Task::LearnableGauss;
  pb.partition = uniform_partition(K, -2, 2);
  pb.link_mode = mode;
  if (mode == LinkMode::Fixed) pb.fixed_levels = representatives(pb.partition);
  pb.X = make_inputs(N, 2, 30);
  pb.y.resize(N);
  for (int i = 0; i < N; ++i) pb.y[i] = 0.5 * pb.X(i, 0) - 0.2 * pb.X(i, 1);
  pb.M = M;
  pb.reg.kind = reg_kind;
  pb.reg.lambda = 0.7;
  pb.reg.c = 0.1;
  const auto reps = representatives(pb.partition);
  pb.reg.reference = reps;
  pb.reg.prior_mean = reps;
  pb.reg.prior_var.assign(K, 1.0);
  return pb;
}

Theta init_for(const Problem& pb, std::uint64_t seed = 1) {
  std::vector<double> levels;
  if (pb.link_mode != LinkMode::Fixed) {
    const auto reps = representatives(pb.partition);
    for (double r : reps) {
      levels.push_back(pb.task == Task::Bernoulli ? 1.0 / (1.0 + std::exp(-r)) : r);
    }
  }
  return init_theta(pb, seed, 1.0, levels);
}

// max relative error with an absolute floor, the gradcheck acceptance rule
double grad_discrepancy(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("pack/unpack is a bitwise round trip for every variant") {
  for (int variant = 0; variant < 4; ++variant) {
    Problem pb;
    switch (variant) {
      case 0: pb = classify_problem(); break;
      case 1: pb = hetero_problem(); break;
      case 2: pb = learnable_problem(LinkMode::TrainableGaussian); break;
      default:
        pb = learnable_problem(LinkMode::Fixed);
        pb.train_inducing = false;
        break;
    }
    const Layout lay = layout_for(pb);
    const Theta theta = init_for(pb);
    const Eigen::VectorXd v = pack(lay, theta);
    CHECK(v.size() == lay.total());
    const Theta back = unpack(lay, v, theta);
    const Eigen::VectorXd v2 = pack(lay, back);
    REQUIRE(v2.size() == v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) CHECK(v2[i] == v[i]);  // bitwise
  }
}

TEST_CASE("adam_step: first step moves by alpha * sign(grad)") {
  AdamConfig cfg;
  cfg.alpha = 0.05;
  AdamState st(3, cfg);
  Eigen::VectorXd params(3), grad(3);
  params << 1.0, -2.0, 0.5;
  grad << 10.0, -0.01, 0.0;
  const Eigen::VectorXd before = params;
  adam_step(st, params, grad);
  // bias correction makes m_hat/sqrt(v_hat) = sign(g) on step one (ascent)
  CHECK(params[0] == doctest::Approx(before[0] + 0.05).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(before[1] - 0.05).epsilon(1e-4));
  CHECK(params[2] == before[2]);  // zero gradient leaves the coordinate alone

  Eigen::VectorXd bad(2);
  CHECK_THROWS_AS(adam_step(st, params, bad), std::invalid_argument);
}

TEST_CASE("reverse-mode gradient matches central finite differences") {
  struct Case {
    const char* name;
    Problem pb;
  };
  std::vector<Case> cases;
  cases.push_back({"classification, trainable levels", classify_problem()});
  cases.push_back({"heteroscedastic two-GP", hetero_problem()});
  cases.push_back({"learnable point levels", learnable_problem(LinkMode::TrainablePoint)});
  cases.push_back({"learnable Gaussian levels + prior",
                   learnable_problem(LinkMode::TrainableGaussian, RegKind::BayesPrior)});
  cases.push_back({"learnable + L2 constant",
                   learnable_problem(LinkMode::TrainablePoint, RegKind::L2Constant)});
  {
    Problem pb = learnable_problem(LinkMode::Fixed);
    pb.train_inducing = false;
    cases.push_back({"frozen inducing locations", pb});
  }
  {
    Problem pb = learnable_problem(LinkMode::Fixed);
    pb.task = Task::Gauss;
    pb.fixed_levels.clear();
    pb.partition = Partition{};
    cases.push_back({"constant-variance baseline", pb});
  }

  for (auto& c : cases) {
    CAPTURE(c.name);
    c.pb.validate();
    const Theta init = init_for(c.pb, 3);
    const Layout lay = layout_for(c.pb);
    const Eigen::VectorXd theta0 = pack(lay, init);
    const ValueGrad vg = value_and_grad(c.pb, theta0, init);
    CHECK(std::isfinite(vg.value));
    CHECK(vg.value == doctest::Approx(objective_value(c.pb, theta0, init)).epsilon(1e-12));
    const Eigen::VectorXd fd = finite_diff_grad(
        [&](const Eigen::VectorXd& t) { return objective_value(c.pb, t, init); }, theta0);
    CHECK(grad_discrepancy(vg.grad, fd) < 1e-4);
  }
}

TEST_CASE("fit: ELBO increases and the run is deterministic") {
  Problem pb = classify_problem();
  const Theta init = init_for(pb, 7);
  FitConfig cfg;
  cfg.iters = 60;
  cfg.record_grad_norm = true;

  const FitResult a = fit(pb, init, cfg);
  const FitResult b = fit(pb, init, cfg);
  REQUIRE(a.steps_run == b.steps_run);
  CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() == 0.0);  // bit-identical rerun
  REQUIRE(a.elbo_trace.size() == static_cast<std::size_t>(a.steps_run));
  CHECK(a.grad_norm_trace.size() == a.elbo_trace.size());
  CHECK(a.elbo_trace.back() > a.elbo_trace.front());

  // final parameters reproduce the last recorded objective value
  const double val = objective_value(pb, a.theta, init);
  CHECK(std::isfinite(val));
}

TEST_CASE("fit: zero iterations returns the initial parameters") {
  Problem pb = classify_problem();
  const Theta init = init_for(pb, 9);
  FitConfig cfg;
  cfg.iters = 0;
  const FitResult r = fit(pb, init, cfg);
  CHECK(r.steps_run == 0);
  CHECK(r.elbo_trace.empty());
  CHECK((r.theta - pack(layout_for(pb), init)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit: early stopping fires on a flat objective") {
  // A tiny well-conditioned Gaussian problem converges long before the cap.
  Problem pb = learnable_problem(LinkMode::Fixed, RegKind::None, 6, 1, 2);
  pb.task = Task::Gauss;
  pb.fixed_levels.clear();
  pb.partition = Partition{};
  const Theta init = init_for(pb, 11);
  FitConfig cfg;
  cfg.iters = 5000;
  cfg.early_stop_tol = 1e-3;  // coarse tolerance to keep the test quick
  cfg.early_stop_patience = 25;
  const FitResult r = fit(pb, init, cfg);
  CHECK(r.steps_run < cfg.iters);
}

TEST_CASE("numerical failures are reported, not silently propagated") {
  Problem pb = classify_problem();
  const Theta init = init_for(pb, 13);
  const Layout lay = layout_for(pb);

  // exp(log_v) overflow wrecks the Gram factorization
  Eigen::VectorXd theta0 = pack(lay, init);
  theta0[0] = 1e308;
  CHECK_THROWS_AS(value_and_grad(pb, theta0, init), std::runtime_error);

  // an astronomical variational mean sends the KL term to infinity
  Eigen::VectorXd theta1 = pack(lay, init);
  theta1[2 + lay.M * lay.d] = 1e308;  // first entry of a
  CHECK_THROWS_AS(value_and_grad(pb, theta1, init), NumericalError);
}

TEST_CASE("Layout::block_name covers every index") {
  Problem pb = hetero_problem();
  const Layout lay = layout_for(pb);
  CHECK(lay.block_name(0) == "log_v");
  CHECK(lay.block_name(1) == "log_s");
  CHECK(lay.block_name(lay.model_block()) == "var_model.log_v");
  bool saw_a = false, saw_L = false, saw_Z = false;
  for (int i = 0; i < lay.total(); ++i) {
    const std::string n = lay.block_name(i);
    saw_a |= (n == "a");
    saw_L |= (n == "L");
    saw_Z |= (n == "Z");
    CHECK(!n.empty());
  }
  CHECK(saw_a);
  CHECK(saw_L);
  CHECK(saw_Z);

  Problem lp = learnable_problem(LinkMode::TrainableGaussian);
  const Layout lay2 = layout_for(lp);
  CHECK(lay2.block_name(lay2.link_offset()) == "link");
  CHECK(lay2.block_name(lay2.total() - 1) == "log_noise");
}

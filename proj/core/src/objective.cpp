#include "sfgp/objective.hpp"

#include <algorithm>
#include <random>

namespace sfgp {

void Problem::validate() const {
  if (N() == 0) throw std::invalid_argument("objective: empty dataset");
  if (M < 1) throw std::invalid_argument("objective: M must be >= 1");
  if (task == Task::Bernoulli) {
    for (int i = 0; i < N(); ++i) {
      if (y(i) != 0.0 && y(i) != 1.0) {
        throw std::invalid_argument("objective: classification labels must be 0 or 1 (row " +
                                    std::to_string(i) + ")");
      }
    }
  }
  if (task == Task::HeteroGauss) {
    if (static_cast<int>(fixed_levels.size()) != K()) {
      throw std::invalid_argument("objective: heteroscedastic model needs K fixed link levels");
    }
    for (double g : fixed_levels) {
      if (!(g > 0.0)) throw std::invalid_argument("objective: variance link levels must be > 0");
    }
  }
  if (link_mode == LinkMode::Fixed && task != Task::Gauss &&
      static_cast<int>(fixed_levels.size()) != K()) {
    throw std::invalid_argument("objective: fixed link needs K levels");
  }
  if (reg.kind == RegKind::BayesPrior) {
    if (link_mode != LinkMode::TrainableGaussian || task != Task::LearnableGauss) {
      throw std::invalid_argument(
          "objective: Bayesian level priors require the Gaussian-likelihood model with "
          "distributional link levels");
    }
    if (static_cast<int>(reg.prior_mean.size()) != K() ||
        static_cast<int>(reg.prior_var.size()) != K()) {
      throw std::invalid_argument("objective: prior mean/var must have K entries");
    }
    for (double v : reg.prior_var) {
      if (!(v > 0.0)) throw std::invalid_argument("objective: prior variances must be > 0");
    }
  }
  if (link_mode == LinkMode::TrainableGaussian && task != Task::LearnableGauss) {
    throw std::invalid_argument("objective: distributional link levels require the "
                                "Gaussian-likelihood model");
  }
  if (reg.kind == RegKind::L2Reference && static_cast<int>(reg.reference.size()) != K()) {
    throw std::invalid_argument("objective: reference levels must have K entries");
  }
  if (reg.lambda < 0.0) throw std::invalid_argument("objective: lambda must be >= 0");
}

Layout layout_for(const Problem& p) {
  Layout lay;
  lay.M = p.M;
  lay.d = p.d();
  lay.K = p.K();
  lay.train_inducing = p.train_inducing;
  lay.two_models = p.two_models();
  lay.has_noise = p.has_noise();
  if (p.link_mode == LinkMode::TrainablePoint) {
    lay.link_params = lay.K;
  } else if (p.link_mode == LinkMode::TrainableGaussian) {
    lay.link_params = 2 * lay.K;
  }
  return lay;
}

std::string Layout::block_name(int index) const {
  const int per_model = model_block();
  std::string prefix;
  if (two_models && index >= per_model) {
    if (index < 2 * per_model) {
      prefix = "var_model.";
      index -= per_model;
    }
  }
  if (index < per_model) {
    if (index == 0) return prefix + "log_v";
    if (index == 1) return prefix + "log_s";
    index -= 2;
    if (train_inducing) {
      if (index < M * d) return prefix + "Z";
      index -= M * d;
    }
    if (index < M) return prefix + "a";
    return prefix + "L";
  }
  index -= link_offset();
  if (index < link_params) return "link";
  return "log_noise";
}

namespace {

int pack_model(const Layout& lay, const ModelParams& m, Eigen::VectorXd& v, int pos) {
  v[pos++] = m.log_v;
  v[pos++] = m.log_s;
  if (lay.train_inducing) {
    for (int i = 0; i < lay.M; ++i) {
      for (int j = 0; j < lay.d; ++j) v[pos++] = m.Z(i, j);
    }
  }
  for (int i = 0; i < lay.M; ++i) v[pos++] = m.a(i);
  for (int i = 0; i < lay.M; ++i) {
    for (int j = 0; j <= i; ++j) v[pos++] = m.L_raw(i, j);
  }
  return pos;
}

int unpack_model(const Layout& lay, const Eigen::VectorXd& v, int pos, const ModelParams& ref,
                 ModelParams& out) {
  out.log_v = v[pos++];
  out.log_s = v[pos++];
  out.Z.resize(lay.M, lay.d);
  if (lay.train_inducing) {
    for (int i = 0; i < lay.M; ++i) {
      for (int j = 0; j < lay.d; ++j) out.Z(i, j) = v[pos++];
    }
  } else {
    out.Z = ref.Z;
  }
  out.a.resize(lay.M);
  for (int i = 0; i < lay.M; ++i) out.a(i) = v[pos++];
  out.L_raw = Eigen::MatrixXd::Zero(lay.M, lay.M);
  for (int i = 0; i < lay.M; ++i) {
    for (int j = 0; j <= i; ++j) out.L_raw(i, j) = v[pos++];
  }
  return pos;
}

}  // namespace

Eigen::VectorXd pack(const Layout& lay, const Theta& theta) {
  Eigen::VectorXd v(lay.total());
  int pos = pack_model(lay, theta.model, v, 0);
  if (lay.two_models) pos = pack_model(lay, *theta.var_model, v, pos);
  for (int i = 0; i < lay.link_params; ++i) v[pos++] = theta.link[i];
  if (lay.has_noise) v[pos++] = theta.log_noise;
  return v;
}

Theta unpack(const Layout& lay, const Eigen::VectorXd& v, const Theta& ref) {
  if (v.size() != lay.total()) throw std::invalid_argument("unpack: wrong parameter count");
  Theta theta;
  int pos = unpack_model(lay, v, 0, ref.model, theta.model);
  if (lay.two_models) {
    theta.var_model.emplace();
    pos = unpack_model(lay, v, pos, *ref.var_model, *theta.var_model);
  }
  theta.link.resize(lay.link_params);
  for (int i = 0; i < lay.link_params; ++i) theta.link[i] = v[pos++];
  if (lay.has_noise) theta.log_noise = v[pos++];
  return theta;
}

ModelParams to_params(const SVGPModel& model) {
  ModelParams p;
  p.log_v = model.kernel.log_v;
  p.log_s = model.kernel.log_s;
  p.Z = model.Z;
  p.a = model.vdist.a;
  p.L_raw = model.vdist.L;
  p.L_raw.diagonal() = model.vdist.L.diagonal().array().log();
  return p;
}

SVGPModel to_model(const ModelParams& p, std::optional<double> log_noise) {
  SVGPModel m;
  m.kernel.log_v = p.log_v;
  m.kernel.log_s = p.log_s;
  m.Z = p.Z;
  m.vdist.a = p.a;
  m.vdist.L = p.L_raw.triangularView<Eigen::Lower>();
  m.vdist.L.diagonal() = p.L_raw.diagonal().array().exp();
  m.log_noise = log_noise;
  return m;
}

Theta theta_from(const SVGPModel& model, const PiecewiseLink& link, const SVGPModel* var_model) {
  Theta theta;
  theta.model = to_params(model);
  if (var_model) theta.var_model = to_params(*var_model);
  if (link.mode == LinkMode::TrainablePoint) {
    theta.link = link.levels;
  } else if (link.mode == LinkMode::TrainableGaussian) {
    theta.link = link.levels;
    for (double v : link.level_var) theta.link.push_back(std::log(v));
  }
  if (model.log_noise) theta.log_noise = *model.log_noise;
  return theta;
}

PiecewiseLink link_from(const Problem& problem, const Theta& theta) {
  PiecewiseLink link;
  link.partition = problem.partition;
  link.mode = problem.link_mode;
  const int K = problem.K();
  if (problem.link_mode == LinkMode::Fixed) {
    link.levels = problem.fixed_levels;
    if (problem.task == Task::Gauss) link.levels.assign(K, 0.0);
  } else if (problem.link_mode == LinkMode::TrainablePoint) {
    link.levels.resize(K);
    for (int k = 0; k < K; ++k) {
      link.levels[k] =
          problem.task == Task::Bernoulli ? sigmoid(theta.link[k]) : theta.link[k];
    }
  } else {
    link.levels.assign(theta.link.begin(), theta.link.begin() + K);
    link.level_var.resize(K);
    for (int k = 0; k < K; ++k) link.level_var[k] = std::exp(theta.link[K + k]);
  }
  return link;
}

Theta init_theta(const Problem& problem, std::uint64_t seed, double sigma2_init,
                 const std::vector<double>& link_init_levels) {
  problem.validate();
  Theta theta;
  theta.model = to_params(init_model(problem.X, problem.M, seed));
  if (problem.two_models()) {
    theta.var_model = to_params(init_model(problem.X, problem.M, seed + 1));
  }
  const int K = problem.K();
  std::vector<double> levels = link_init_levels;
  if (levels.empty() && !problem.fixed_levels.empty()) levels = problem.fixed_levels;
  if (problem.link_mode == LinkMode::TrainablePoint) {
    if (static_cast<int>(levels.size()) != K) {
      throw std::invalid_argument("init_theta: trainable link needs K initial levels");
    }
    theta.link.resize(K);
    for (int k = 0; k < K; ++k) {
      if (problem.task == Task::Bernoulli) {
        const double g = std::clamp(levels[k], 1e-9, 1.0 - 1e-9);
        theta.link[k] = std::log(g / (1.0 - g));  // pre-sigmoid
      } else {
        theta.link[k] = levels[k];
      }
    }
  } else if (problem.link_mode == LinkMode::TrainableGaussian) {
    if (static_cast<int>(levels.size()) != K) {
      throw std::invalid_argument("init_theta: trainable link needs K initial levels");
    }
    theta.link = levels;
    theta.link.resize(2 * K, std::log(0.01));  // posterior sd 0.1 to start
  }
  if (problem.has_noise()) theta.log_noise = std::log(sigma2_init);
  return theta;
}

double objective_value(const Problem& problem, const Eigen::VectorXd& theta, const Theta& ref) {
  std::vector<double> t(theta.data(), theta.data() + theta.size());
  return eval_objective<double>(problem, t, ref);
}

ValueGrad value_and_grad(const Problem& problem, const Eigen::VectorXd& theta, const Theta& ref) {
  const Layout lay = layout_for(problem);
  ad::Tape tape;
  // rough per-row node estimate keeps reallocation away
  tape.reserve(64 + static_cast<std::size_t>(problem.N()) *
                        (8u * lay.M * lay.M + 12u * lay.K) +
               8u * lay.M * lay.M * lay.M);
  std::vector<ad::Var> vars;
  vars.reserve(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) vars.emplace_back(theta[i], &tape);
  double jitter = 0.0;
  const ad::Var out = eval_objective<ad::Var>(problem, vars, ref, &jitter);
  ValueGrad vg;
  vg.value = out.v;
  vg.jitter_used = jitter;
  if (!std::isfinite(vg.value)) {
    throw NumericalError("objective evaluated to a non-finite value", "objective");
  }
  const std::vector<double> adj = tape.backward(out.idx);
  vg.grad.resize(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    vg.grad[i] = adj[vars[i].idx];
    if (!std::isfinite(vg.grad[i])) {
      throw NumericalError("non-finite gradient", lay.block_name(static_cast<int>(i)));
    }
  }
  return vg;
}

}  // namespace sfgp

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfgp/ad.hpp"
#include "sfgp/math.hpp"
#include "sfgp/piecewise.hpp"
#include "sfgp/svgp.hpp"

namespace sfgp {

enum class Task { Bernoulli, HeteroGauss, LearnableGauss, Gauss };

enum class RegKind { None, L2Constant, L2Reference, BayesPrior };

struct RegSpec {
  RegKind kind = RegKind::None;
  double lambda = 1.0;
  double c = 0.0;                          // L2Constant target
  std::vector<double> reference;           // L2Reference: g(x_k) at representatives
  std::vector<double> prior_mean;          // BayesPrior: per-level prior N(mean, var)
  std::vector<double> prior_var;
};

/// Everything an objective evaluation needs besides the parameter values.
struct Problem {
  Task task = Task::Bernoulli;
  Partition partition;
  LinkMode link_mode = LinkMode::Fixed;
  std::vector<double> fixed_levels;        // used when link_mode == Fixed (and always for HeteroGauss)
  RegSpec reg;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  int M = 10;
  bool train_inducing = true;
  bool simplified_form = false;               // simplified collapsed-expectation variants, kept for comparison
  double var_floor = 1e-12;

  int N() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }
  int K() const { return partition.size(); }

  bool has_noise() const { return task == Task::LearnableGauss || task == Task::Gauss; }
  bool two_models() const { return task == Task::HeteroGauss; }
  void validate() const;
};

/// Unconstrained parameters for one SVGP. L_raw holds the lower triangle of
/// the variational Cholesky factor with the diagonal stored as its log.
struct ModelParams {
  double log_v = 0.0;
  double log_s = 0.0;
  Eigen::MatrixXd Z;      // M x d
  Eigen::VectorXd a;      // M
  Eigen::MatrixXd L_raw;  // M x M, lower triangle used
};

/// Full unconstrained parameter set for an objective.
struct Theta {
  ModelParams model;
  std::optional<ModelParams> var_model;  // HeteroGauss second GP
  std::vector<double> link;              // K (point values / pre-sigmoid) or 2K (mu.., log var..)
  double log_noise = 0.0;
};

/// Flat-vector layout: [log_v, log_s, Z?, a, L-tri] per model, then link
/// parameters, then log noise.
struct Layout {
  int M = 0, d = 0, K = 0;
  bool train_inducing = true;
  bool two_models = false;
  bool has_noise = false;
  int link_params = 0;  // 0, K, or 2K

  int model_block() const { return 2 + (train_inducing ? M * d : 0) + M + M * (M + 1) / 2; }
  int link_offset() const { return model_block() * (two_models ? 2 : 1); }
  int total() const { return link_offset() + link_params + (has_noise ? 1 : 0); }

  /// Human-readable block name for a flat index (error reports, gradcheck).
  std::string block_name(int index) const;
};

Layout layout_for(const Problem& p);

Eigen::VectorXd pack(const Layout& layout, const Theta& theta);
/// `ref` supplies the frozen inducing locations when train_inducing is off.
Theta unpack(const Layout& layout, const Eigen::VectorXd& v, const Theta& ref);

/// Conversions between the unconstrained Theta form and the model structures.
ModelParams to_params(const SVGPModel& model);
SVGPModel to_model(const ModelParams& p, std::optional<double> log_noise = std::nullopt);
Theta theta_from(const SVGPModel& model, const PiecewiseLink& link,
                 const SVGPModel* var_model = nullptr);
/// Link with current level values (sigmoid applied for Bernoulli trainable levels).
PiecewiseLink link_from(const Problem& problem, const Theta& theta);

/// Fresh parameters for a problem: inducing rows sampled from X, a = 0,
/// L = 0.1 I, link initialized from fixed_levels (or the given init levels).
Theta init_theta(const Problem& problem, std::uint64_t seed, double sigma2_init = 1.0,
                 const std::vector<double>& link_init_levels = {});

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what, std::string block = {})
      : std::runtime_error(what), offending_block(std::move(block)) {}
  std::string offending_block;
};

namespace detail {

template <class T>
struct ModelArrays {
  int M = 0, d = 0;
  T log_v, log_s;
  std::vector<T> Z;     // M*d row-major (constants when inducing frozen)
  std::vector<T> a;     // M
  std::vector<T> Lraw;  // M*M row-major, lower triangle; diagonal = log of factor diagonal
};

template <class T>
struct ModelEval {
  std::vector<T> mean, var;  // per data row, var clamped at the floor
  T kl;
  double jitter = 0.0;
};

template <class T>
ModelArrays<T> extract_model(const std::vector<T>& theta, int offset, const Layout& lay,
                             const ModelParams& ref) {
  ModelArrays<T> m;
  m.M = lay.M;
  m.d = lay.d;
  int pos = offset;
  m.log_v = theta[pos++];
  m.log_s = theta[pos++];
  m.Z.resize(lay.M * lay.d);
  if (lay.train_inducing) {
    for (int i = 0; i < lay.M * lay.d; ++i) m.Z[i] = theta[pos++];
  } else {
    for (int i = 0; i < lay.M; ++i) {
      for (int j = 0; j < lay.d; ++j) m.Z[i * lay.d + j] = T(ref.Z(i, j));
    }
  }
  m.a.resize(lay.M);
  for (int i = 0; i < lay.M; ++i) m.a[i] = theta[pos++];
  m.Lraw.assign(lay.M * lay.M, T(0.0));
  for (int i = 0; i < lay.M; ++i) {
    for (int j = 0; j <= i; ++j) m.Lraw[i * lay.M + j] = theta[pos++];
  }
  return m;
}

// In-place Cholesky of the lower triangle of A (row-major M x M).
template <class T>
void chol_in_place(std::vector<T>& A, int M) {
  using std::sqrt;
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j <= i; ++j) {
      T sum = A[i * M + j];
      for (int k = 0; k < j; ++k) sum = sum - A[i * M + k] * A[j * M + k];
      if (i == j) {
        if (!(primal(sum) > 0.0)) {
          throw NumericalError("cholesky failed on the tape path (non-positive pivot)");
        }
        A[i * M + j] = sqrt(sum);
      } else {
        A[i * M + j] = sum / A[j * M + j];
      }
    }
  }
}

template <class T>
void forward_solve_inplace(const std::vector<T>& L, int M, std::vector<T>& b) {
  for (int i = 0; i < M; ++i) {
    T sum = b[i];
    for (int k = 0; k < i; ++k) sum = sum - L[i * M + k] * b[k];
    b[i] = sum / L[i * M + i];
  }
}

// Solves L^T w = c.
template <class T>
void backward_solve_inplace(const std::vector<T>& L, int M, std::vector<T>& c) {
  for (int i = M - 1; i >= 0; --i) {
    T sum = c[i];
    for (int k = i + 1; k < M; ++k) sum = sum - L[k * M + i] * c[k];
    c[i] = sum / L[i * M + i];
  }
}

/// Variational marginals and KL for one SVGP, templated over double / tape Var.
template <class T>
ModelEval<T> eval_model(const ModelArrays<T>& m, const Eigen::MatrixXd& X, double var_floor) {
  using std::exp;
  using std::log;
  const int M = m.M, d = m.d;
  const T v = exp(m.log_v);
  const T half_inv_s2 = T(0.5) * exp(T(-2.0) * m.log_s);

  // Gram at inducing locations; jitter chosen on a primal-value pre-pass so
  // the tape sees a fixed epsilon.
  std::vector<T> Kmm(M * M, T(0.0));
  Eigen::MatrixXd Kmm_primal(M, M);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j <= i; ++j) {
      T sq(0.0);
      for (int f = 0; f < d; ++f) {
        const T diff = m.Z[i * d + f] - m.Z[j * d + f];
        sq = sq + diff * diff;
      }
      const T k = v * exp(-(sq * half_inv_s2));
      Kmm[i * M + j] = k;
      Kmm_primal(i, j) = primal(k);
      Kmm_primal(j, i) = Kmm_primal(i, j);
    }
  }
  const CholeskyResult primal_chol =
      cholesky_jitter(Kmm_primal, default_base_jitter(Kmm_primal));
  for (int i = 0; i < M; ++i) Kmm[i * M + i] = Kmm[i * M + i] + T(primal_chol.jitter);
  chol_in_place(Kmm, M);  // Kmm now holds Lp
  const std::vector<T>& Lp = Kmm;

  // Variational factor Lq with exponentiated diagonal.
  std::vector<T> Lq(M * M, T(0.0));
  T logdet_S(0.0);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < i; ++j) Lq[i * M + j] = m.Lraw[i * M + j];
    Lq[i * M + i] = exp(m.Lraw[i * M + i]);
    logdet_S = logdet_S + T(2.0) * m.Lraw[i * M + i];
  }

  // KL(q || p) from the two factors.
  T trace_term(0.0);
  {
    std::vector<T> col(M);
    for (int j = 0; j < M; ++j) {
      for (int i = 0; i < M; ++i) col[i] = Lq[i * M + j];
      forward_solve_inplace(Lp, M, col);
      for (int i = 0; i < M; ++i) trace_term = trace_term + col[i] * col[i];
    }
  }
  std::vector<T> ca = m.a;
  forward_solve_inplace(Lp, M, ca);
  T quad(0.0);
  for (int i = 0; i < M; ++i) quad = quad + ca[i] * ca[i];
  T logdet_P(0.0);
  for (int i = 0; i < M; ++i) logdet_P = logdet_P + T(2.0) * log(Lp[i * M + i]);
  ModelEval<T> out;
  out.jitter = primal_chol.jitter;
  out.kl = T(0.5) * (trace_term + quad - T(static_cast<double>(M)) + logdet_P - logdet_S);

  // Per-row marginal moments via Cholesky solves (never explicit inverses).
  const int N = static_cast<int>(X.rows());
  out.mean.resize(N);
  out.var.resize(N);
  std::vector<T> kvec(M), w(M);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      T sq(0.0);
      for (int f = 0; f < d; ++f) {
        const T diff = T(X(i, f)) - m.Z[j * d + f];
        sq = sq + diff * diff;
      }
      kvec[j] = v * exp(-(sq * half_inv_s2));
    }
    forward_solve_inplace(Lp, M, kvec);  // kvec = c
    w = kvec;
    backward_solve_inplace(Lp, M, w);    // w = Lambda row
    T mean(0.0), c2(0.0);
    for (int j = 0; j < M; ++j) {
      mean = mean + w[j] * m.a[j];
      c2 = c2 + kvec[j] * kvec[j];
    }
    T s2(0.0);
    for (int j = 0; j < M; ++j) {
      T acc(0.0);
      for (int r = j; r < M; ++r) acc = acc + Lq[r * M + j] * w[r];
      s2 = s2 + acc * acc;
    }
    out.mean[i] = mean;
    out.var[i] = clamp_min(v - c2 + s2, var_floor);
  }
  return out;
}

constexpr double kLevelClamp = 1e-12;

template <class T>
T log_gauss(double y, const T& mean, const T& variance) {
  using std::log;
  const T diff = T(y) - mean;
  return T(-0.5) * (T(kLog2Pi) + log(variance) + diff * diff / variance);
}

}  // namespace detail

/// Closed-form objective value for any variant, templated over double / Var.
/// theta follows layout_for(problem); ref supplies frozen blocks.
template <class T>
T eval_objective(const Problem& pb, const std::vector<T>& theta, const Theta& ref,
                 double* jitter_out = nullptr) {
  using std::exp;
  using std::log;
  using std::sqrt;
  using detail::log_gauss;

  const Layout lay = layout_for(pb);
  const int K = pb.K();
  const int N = pb.N();

  const auto m1 = detail::extract_model(theta, 0, lay, ref.model);
  auto e1 = detail::eval_model(m1, pb.X, pb.var_floor);
  if (jitter_out) *jitter_out = e1.jitter;

  // Link parameters (if trainable) and noise.
  std::vector<T> link(theta.begin() + lay.link_offset(),
                      theta.begin() + lay.link_offset() + lay.link_params);
  T sigma2(1.0);
  if (lay.has_noise) sigma2 = exp(theta[lay.total() - 1]);

  T data_term(0.0);

  switch (pb.task) {
    case Task::Bernoulli: {
      std::vector<T> log_g(K), log_1mg(K);
      if (pb.link_mode == LinkMode::Fixed) {
        for (int k = 0; k < K; ++k) {
          const double g = std::clamp(pb.fixed_levels[k], detail::kLevelClamp,
                                      1.0 - detail::kLevelClamp);
          log_g[k] = T(std::log(g));
          log_1mg[k] = T(std::log1p(-g));
        }
      } else {
        for (int k = 0; k < K; ++k) {
          log_g[k] = -softplus(-link[k]);
          log_1mg[k] = -softplus(link[k]);
        }
      }
      for (int i = 0; i < N; ++i) {
        const T sigma_i = sqrt(e1.var[i]);
        const bool positive = pb.y(i) == 1.0;
        for (int k = 0; k < K; ++k) {
          const T p = interval_prob(e1.mean[i], sigma_i, pb.partition.lower(k),
                                    pb.partition.upper(k));
          data_term = data_term + (positive ? log_g[k] : log_1mg[k]) * p;
        }
      }
      break;
    }
    case Task::HeteroGauss: {
      const auto m2 = detail::extract_model(theta, lay.model_block(), lay, *ref.var_model);
      auto e2 = detail::eval_model(m2, pb.X, pb.var_floor);
      for (int i = 0; i < N; ++i) {
        const T sigma_i = sqrt(e2.var[i]);
        for (int k = 0; k < K; ++k) {
          const double gk = pb.fixed_levels[k];  // exp(x_k) > 0
          const T p = interval_prob(e2.mean[i], sigma_i, pb.partition.lower(k),
                                    pb.partition.upper(k));
          T inner;
          if (pb.simplified_form) {
            inner = log_gauss(pb.y(i), e1.mean[i], T(gk) + e1.var[i]) -
                    T(0.5 / gk) * e1.var[i];
          } else {
            // exact collapsed expectation E[log N(y | f_mu, gk)]
            inner = log_gauss(pb.y(i), e1.mean[i], T(gk)) - T(0.5 / gk) * e1.var[i];
          }
          data_term = data_term + inner * p;
        }
      }
      data_term = data_term - e2.kl;
      break;
    }
    case Task::LearnableGauss: {
      for (int i = 0; i < N; ++i) {
        const T sigma_i = sqrt(e1.var[i]);
        for (int k = 0; k < K; ++k) {
          const T p = interval_prob(e1.mean[i], sigma_i, pb.partition.lower(k),
                                    pb.partition.upper(k));
          T inner;
          if (pb.link_mode == LinkMode::TrainableGaussian) {
            const T& mu_g = link[k];
            const T var_g = exp(link[K + k]);
            if (pb.simplified_form) {
              inner = log_gauss(pb.y(i), mu_g, sigma2 + var_g) - T(0.5) * var_g / sigma2;
            } else {
              // exact E_{q(g_k)}[log N(y | g_k, sigma^2)]
              inner = log_gauss(pb.y(i), mu_g, sigma2) - T(0.5) * var_g / sigma2;
            }
          } else {
            const T gk = (pb.link_mode == LinkMode::Fixed) ? T(pb.fixed_levels[k]) : link[k];
            inner = log_gauss(pb.y(i), gk, sigma2);
          }
          data_term = data_term + inner * p;
        }
      }
      break;
    }
    case Task::Gauss: {
      for (int i = 0; i < N; ++i) {
        data_term = data_term + log_gauss(pb.y(i), e1.mean[i], sigma2) -
                    T(0.5) * e1.var[i] / sigma2;
      }
      break;
    }
  }

  T elbo = data_term - e1.kl;

  // Regularization / prior terms on the link levels.
  if (pb.reg.kind != RegKind::None) {
    auto level_value = [&](int k) -> T {
      if (pb.link_mode == LinkMode::Fixed) return T(pb.fixed_levels[k]);
      if (pb.task == Task::Bernoulli) return sigmoid(link[k]);
      return link[k];  // point value or Gaussian posterior mean
    };
    T penalty(0.0);
    switch (pb.reg.kind) {
      case RegKind::L2Constant:
        for (int k = 0; k < K; ++k) {
          const T diff = level_value(k) - T(pb.reg.c);
          penalty = penalty + diff * diff;
        }
        penalty = T(pb.reg.lambda) * penalty;
        break;
      case RegKind::L2Reference:
        for (int k = 0; k < K; ++k) {
          const T diff = level_value(k) - T(pb.reg.reference[k]);
          penalty = penalty + diff * diff;
        }
        penalty = T(pb.reg.lambda) * penalty;
        break;
      case RegKind::BayesPrior:
        for (int k = 0; k < K; ++k) {
          const T var_q = exp(link[K + k]);
          const T dm = link[k] - T(pb.reg.prior_mean[k]);
          const double pv = pb.reg.prior_var[k];
          penalty = penalty +
                    T(0.5) * (T(std::log(pv)) - link[K + k] + (var_q + dm * dm) / T(pv) -
                              T(1.0));
        }
        break;
      case RegKind::None:
        break;
    }
    elbo = elbo - penalty;
  }
  return elbo;
}

struct ValueGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
  double jitter_used = 0.0;
};

/// Objective value at a flat parameter vector.
double objective_value(const Problem& problem, const Eigen::VectorXd& theta, const Theta& ref);

/// Objective value and gradient via reverse-mode accumulation.
ValueGrad value_and_grad(const Problem& problem, const Eigen::VectorXd& theta, const Theta& ref);

}  // namespace sfgp

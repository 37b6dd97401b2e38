#include "sfgp/svgp.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sfgp {

InducingPrior prior_at_inducing(const SVGPModel& model) {
  Eigen::MatrixXd Kmm = gram(model.Z, model.kernel);
  CholeskyResult chol = cholesky_jitter(Kmm, default_base_jitter(Kmm));
  Kmm.diagonal().array() += chol.jitter;
  return {Eigen::VectorXd::Zero(model.M()), std::move(Kmm), std::move(chol.L), chol.jitter};
}

std::vector<GaussianMarginal> marginal_q(const SVGPModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.d()) throw std::invalid_argument("marginal_q: dimension mismatch");
  const InducingPrior prior = prior_at_inducing(model);
  const Eigen::MatrixXd Kxm = cross_gram(X, model.Z, model.kernel);
  // c = Lp^{-1} Kmx, w = Lp^{-T} c (so w columns are Lambda rows)
  const Eigen::MatrixXd C = prior.cov_chol.triangularView<Eigen::Lower>().solve(Kxm.transpose());
  const Eigen::MatrixXd W =
      prior.cov_chol.transpose().triangularView<Eigen::Upper>().solve(C);
  const Eigen::MatrixXd LtW = model.vdist.L.transpose() * W;
  const double v = model.kernel.v();
  std::vector<GaussianMarginal> out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double mean = W.col(i).dot(model.vdist.a);
    double var = v - C.col(i).squaredNorm() + LtW.col(i).squaredNorm();
    out[i] = {mean, var < 0.0 ? 0.0 : var};
  }
  return out;
}

double kl_term(const SVGPModel& model) {
  const InducingPrior prior = prior_at_inducing(model);
  return kl_mvn(model.vdist.a, model.vdist.L, prior.mean, prior.cov_chol);
}

SVGPModel init_model(const Eigen::MatrixXd& X, int M, std::uint64_t seed,
                     std::optional<double> log_noise) {
  if (M < 1) throw std::invalid_argument("init_model: M must be >= 1");
  if (X.rows() < M) throw std::invalid_argument("init_model: fewer data rows than inducing points");
  std::vector<Eigen::Index> idx(X.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  SVGPModel model;
  model.Z.resize(M, X.cols());
  for (int i = 0; i < M; ++i) model.Z.row(i) = X.row(idx[i]);
  model.vdist.a = Eigen::VectorXd::Zero(M);
  // start q(f_M) at the prior: KL = 0 and the trace term equals M regardless
  // of how ill-conditioned K_MM is (data rows can nearly coincide)
  model.vdist.L = prior_at_inducing(model).cov_chol;
  model.log_noise = log_noise;
  return model;
}

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  out["data"] = data;  // row-major
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows"), cols = j.at("cols");
  const std::vector<double> data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::runtime_error("checkpoint: matrix shape mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[i * cols + j2];
  }
  return m;
}

json model_to_json(const SVGPModel& m) {
  json out;
  out["kernel"] = {{"log_v", m.kernel.log_v}, {"log_s", m.kernel.log_s}};
  out["inducing"] = matrix_to_json(m.Z);
  // L serialized as the full lower triangle row-major
  std::vector<double> ltri;
  for (int i = 0; i < m.M(); ++i) {
    for (int j = 0; j <= i; ++j) ltri.push_back(m.vdist.L(i, j));
  }
  out["vdist"] = {{"a", std::vector<double>(m.vdist.a.data(), m.vdist.a.data() + m.vdist.a.size())},
                  {"L", ltri}};
  if (m.log_noise) out["noise"] = {{"log_sigma2", *m.log_noise}};
  return out;
}

SVGPModel model_from_json(const json& j) {
  SVGPModel m;
  m.kernel.log_v = j.at("kernel").at("log_v");
  m.kernel.log_s = j.at("kernel").at("log_s");
  m.Z = matrix_from_json(j.at("inducing"));
  const std::vector<double> a = j.at("vdist").at("a");
  const std::vector<double> ltri = j.at("vdist").at("L");
  const int M = m.M();
  m.vdist.a = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
  m.vdist.L = Eigen::MatrixXd::Zero(M, M);
  std::size_t pos = 0;
  for (int i = 0; i < M; ++i) {
    for (int j2 = 0; j2 <= i; ++j2) m.vdist.L(i, j2) = ltri.at(pos++);
  }
  if (j.contains("noise")) m.log_noise = j.at("noise").at("log_sigma2").get<double>();
  return m;
}

json link_to_json(const PiecewiseLink& link) {
  json out;
  out["edges"] = link.partition.edges;
  out["levels"] = link.levels;
  switch (link.mode) {
    case LinkMode::Fixed: out["mode"] = "fixed"; break;
    case LinkMode::TrainablePoint: out["mode"] = "point"; break;
    case LinkMode::TrainableGaussian: out["mode"] = "gaussian"; break;
  }
  if (link.mode == LinkMode::TrainableGaussian) out["level_var"] = link.level_var;
  return out;
}

PiecewiseLink link_from_json(const json& j) {
  PiecewiseLink link;
  link.partition.edges = j.at("edges").get<std::vector<double>>();
  link.levels = j.at("levels").get<std::vector<double>>();
  const std::string mode = j.at("mode");
  if (mode == "fixed") {
    link.mode = LinkMode::Fixed;
  } else if (mode == "point") {
    link.mode = LinkMode::TrainablePoint;
  } else if (mode == "gaussian") {
    link.mode = LinkMode::TrainableGaussian;
    link.level_var = j.at("level_var").get<std::vector<double>>();
  } else {
    throw std::runtime_error("checkpoint: unknown link mode '" + mode + "'");
  }
  return link;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json out;
  out["task"] = ckpt.task;
  out["model"] = model_to_json(ckpt.model);
  if (ckpt.var_model) out["var_model"] = model_to_json(*ckpt.var_model);
  out["link"] = link_to_json(ckpt.link);
  out["meta"] = {{"seed", ckpt.seed},
                 {"jitter_used", ckpt.jitter_used},
                 {"formula_variant", "standard"}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os << out.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j = json::parse(is);
  Checkpoint ckpt;
  ckpt.task = j.at("task");
  ckpt.model = model_from_json(j.at("model"));
  if (j.contains("var_model")) ckpt.var_model = model_from_json(j.at("var_model"));
  ckpt.link = link_from_json(j.at("link"));
  ckpt.seed = j.at("meta").at("seed");
  ckpt.jitter_used = j.at("meta").at("jitter_used");
  return ckpt;
}

}  // namespace sfgp

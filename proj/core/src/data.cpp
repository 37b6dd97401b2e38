#include "sfgp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "sfgp/mc_oracle.hpp"

namespace sfgp {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim whitespace and CR
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

Dataset ingest_csv(const std::string& path, const std::string& target, Task task) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("ingest_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("ingest_csv: empty file " + path);
  const std::vector<std::string> header = split_csv_line(line);
  const int ncols = static_cast<int>(header.size());

  int target_col = -1;
  for (int c = 0; c < ncols; ++c) {
    if (header[c] == target) target_col = c;
  }
  if (target_col < 0) {
    // fall back to a numeric column index
    try {
      std::size_t used = 0;
      const int idx = std::stoi(target, &used);
      if (used == target.size() && idx >= 0 && idx < ncols) target_col = idx;
    } catch (...) {
    }
  }
  if (target_col < 0) {
    throw std::runtime_error("ingest_csv: target column '" + target + "' not found");
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != ncols) {
      throw std::runtime_error("ingest_csv: row " + std::to_string(lineno) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(ncols));
    }
    std::vector<double> row;
    row.reserve(ncols - 1);
    for (int c = 0; c < ncols; ++c) {
      double value;
      try {
        std::size_t used = 0;
        value = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
      } catch (...) {
        throw std::runtime_error("ingest_csv: non-numeric cell at row " +
                                 std::to_string(lineno) + ", column '" + header[c] + "'");
      }
      if (!std::isfinite(value)) {
        throw std::runtime_error("ingest_csv: non-finite value at row " +
                                 std::to_string(lineno) + ", column '" + header[c] + "'");
      }
      if (c == target_col) {
        targets.push_back(value);
      } else {
        row.push_back(value);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("ingest_csv: no data rows in " + path);

  if (task == Task::Bernoulli) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i] != 0.0 && targets[i] != 1.0) {
        throw std::runtime_error("ingest_csv: non-binary label at data row " +
                                 std::to_string(i + 1));
      }
    }
  }

  Dataset ds;
  ds.X.resize(static_cast<int>(rows.size()), ncols - 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < ncols - 1; ++c) ds.X(static_cast<int>(i), c) = rows[i][c];
  }
  ds.y = Eigen::Map<const Eigen::VectorXd>(targets.data(), targets.size());
  for (int c = 0; c < ncols; ++c) {
    if (c != target_col) ds.feature_names.push_back(header[c]);
  }
  ds.target_name = header[target_col];
  return ds;
}

StandardStats fit_standardizer(const Dataset& train, bool standardize_y) {
  if (train.N() == 0) throw std::invalid_argument("zstandardize: empty training split");
  StandardStats stats;
  stats.standardize_y = standardize_y;
  const int p = static_cast<int>(train.X.cols());
  std::vector<double> means, sds;
  for (int c = 0; c < p; ++c) {
    const double mean = train.X.col(c).mean();
    const double sd = std::sqrt((train.X.col(c).array() - mean).square().sum() /
                                std::max(1, train.N() - 1));
    if (sd <= 0.0) {
      std::cerr << "warning: dropping constant feature '"
                << (c < static_cast<int>(train.feature_names.size()) ? train.feature_names[c]
                                                                      : std::to_string(c))
                << "'\n";
      continue;
    }
    stats.kept.push_back(c);
    means.push_back(mean);
    sds.push_back(sd);
  }
  if (stats.kept.empty()) throw std::runtime_error("zstandardize: all features constant");
  stats.mean = Eigen::Map<const Eigen::VectorXd>(means.data(), means.size());
  stats.sd = Eigen::Map<const Eigen::VectorXd>(sds.data(), sds.size());
  if (standardize_y) {
    stats.y_mean = train.y.mean();
    stats.y_sd = std::sqrt((train.y.array() - stats.y_mean).square().sum() /
                           std::max(1, train.N() - 1));
    if (stats.y_sd <= 0.0) stats.y_sd = 1.0;
  }
  return stats;
}

Dataset apply_standardizer(const StandardStats& stats, const Dataset& data) {
  Dataset out;
  out.target_name = data.target_name;
  const int p = static_cast<int>(stats.kept.size());
  out.X.resize(data.N(), p);
  for (int j = 0; j < p; ++j) {
    out.X.col(j) = (data.X.col(stats.kept[j]).array() - stats.mean[j]) / stats.sd[j];
    if (stats.kept[j] < static_cast<int>(data.feature_names.size())) {
      out.feature_names.push_back(data.feature_names[stats.kept[j]]);
    }
  }
  out.y = stats.standardize_y
              ? ((data.y.array() - stats.y_mean) / stats.y_sd).matrix().eval()
              : data.y;
  return out;
}

ZResult zstandardize(const Dataset& train, const std::vector<Dataset>& others,
                     bool standardize_y) {
  ZResult result;
  result.stats = fit_standardizer(train, standardize_y);
  result.train = apply_standardizer(result.stats, train);
  for (const Dataset& d : others) result.others.push_back(apply_standardizer(result.stats, d));
  return result;
}

std::vector<int> fold_assignment(int N, int folds, std::uint64_t seed) {
  if (folds < 2 || folds > N) throw std::invalid_argument("fold_assignment: need 2 <= folds <= N");
  std::vector<int> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(split_seed(seed, 0xF01D));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> assignment(N);
  for (int i = 0; i < N; ++i) assignment[idx[i]] = i % folds;
  return assignment;
}

double f1_score(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("f1_score: length mismatch");
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_pred[i] == 1 && y_true[i] == 1) ++tp;
    if (y_pred[i] == 1 && y_true[i] == 0) ++fp;
    if (y_pred[i] == 0 && y_true[i] == 1) ++fn;
  }
  if (tp == 0) {
    if (fp == 0 && fn == 0) return 1.0;  // no positives anywhere
    if (fp == 0) std::cerr << "warning: no positive predictions, F1 = 0\n";
    return 0.0;
  }
  const double precision = static_cast<double>(tp) / (tp + fp);
  const double recall = static_cast<double>(tp) / (tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

using nlohmann::json;

namespace {

json config_to_jobj(const ExperimentConfig& c) {
  return json{{"task", c.task},
              {"K", c.K},
              {"link_lo", c.link_lo},
              {"link_hi", c.link_hi},
              {"M", c.M},
              {"link_mode", c.link_mode},
              {"link_init", c.link_init},
              {"regularizer", c.regularizer},
              {"lambda", c.lambda},
              {"reg_c", c.reg_c},
              {"prior_var", c.prior_var},
              {"adam", {{"alpha", c.alpha}, {"iters", c.iters}}},
              {"folds", c.folds},
              {"seed", c.seed},
              {"sigma2_init", c.sigma2_init},
              {"train_inducing", c.train_inducing},
              {"simplified_form", c.simplified_form},
              {"data_path", c.data_path},
              {"target", c.target}};
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) { return config_to_jobj(cfg).dump(2); }

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
  const json j = json::parse(is);
  ExperimentConfig c;
  c.task = j.value("task", c.task);
  c.K = j.value("K", c.K);
  c.link_lo = j.value("link_lo", c.link_lo);
  c.link_hi = j.value("link_hi", c.link_hi);
  c.M = j.value("M", c.M);
  c.link_mode = j.value("link_mode", c.link_mode);
  c.link_init = j.value("link_init", c.link_init);
  c.regularizer = j.value("regularizer", c.regularizer);
  c.lambda = j.value("lambda", c.lambda);
  c.reg_c = j.value("reg_c", c.reg_c);
  c.prior_var = j.value("prior_var", c.prior_var);
  if (j.contains("adam")) {
    c.alpha = j["adam"].value("alpha", c.alpha);
    c.iters = j["adam"].value("iters", c.iters);
  }
  c.folds = j.value("folds", c.folds);
  c.seed = j.value("seed", c.seed);
  c.sigma2_init = j.value("sigma2_init", c.sigma2_init);
  c.train_inducing = j.value("train_inducing", c.train_inducing);
  c.simplified_form = j.value("simplified_form", c.simplified_form);
  c.data_path = j.value("data_path", c.data_path);
  c.target = j.value("target", c.target);
  return c;
}

Task config_task(const ExperimentConfig& cfg) { return task_from_string(cfg.task); }

std::vector<double> initial_levels(const ExperimentConfig& cfg) {
  const Task task = config_task(cfg);
  if (task == Task::Gauss) return {};
  const Partition p = uniform_partition(cfg.K, cfg.link_lo, cfg.link_hi);
  std::string init = cfg.link_init;
  if (init.empty()) {
    init = task == Task::Bernoulli ? "sigmoid" : (task == Task::HeteroGauss ? "exp" : "identity");
  }
  std::function<double(double)> g;
  if (init == "sigmoid") {
    g = [](double x) { return sigmoid(x); };
  } else if (init == "exp") {
    g = [](double x) { return std::exp(x); };
  } else if (init == "identity") {
    g = [](double x) { return x; };
  } else {
    throw std::invalid_argument("config: unknown link_init '" + init + "'");
  }
  return discretize_link(g, p).levels;
}

Problem build_problem(const ExperimentConfig& cfg, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& y) {
  Problem pb;
  pb.task = config_task(cfg);
  pb.X = X;
  pb.y = y;
  pb.M = cfg.M;
  pb.train_inducing = cfg.train_inducing;
  pb.simplified_form = cfg.simplified_form;
  if (pb.task == Task::Gauss) {
    pb.partition = uniform_partition(1, -1.0, 1.0);
    pb.partition.edges.clear();
    return pb;
  }
  pb.partition = uniform_partition(cfg.K, cfg.link_lo, cfg.link_hi);
  if (cfg.link_mode == "fixed" || pb.task == Task::HeteroGauss) {
    pb.link_mode = LinkMode::Fixed;
    pb.fixed_levels = initial_levels(cfg);
  } else if (cfg.link_mode == "point") {
    pb.link_mode = LinkMode::TrainablePoint;
  } else if (cfg.link_mode == "gaussian") {
    pb.link_mode = LinkMode::TrainableGaussian;
  } else {
    throw std::invalid_argument("config: unknown link_mode '" + cfg.link_mode + "'");
  }

  const std::vector<double> reps = representatives(pb.partition);
  if (cfg.regularizer == "none") {
    pb.reg.kind = RegKind::None;
  } else if (cfg.regularizer == "l2-constant") {
    pb.reg.kind = RegKind::L2Constant;
    pb.reg.lambda = cfg.lambda;
    pb.reg.c = cfg.reg_c;
  } else if (cfg.regularizer == "l2-reference") {
    pb.reg.kind = RegKind::L2Reference;
    pb.reg.lambda = cfg.lambda;
    pb.reg.reference = initial_levels(cfg);
  } else if (cfg.regularizer == "bayes-prior") {
    pb.reg.kind = RegKind::BayesPrior;
    pb.reg.prior_mean = reps;  // p(g_k) = N(x_k, prior_var)
    pb.reg.prior_var.assign(reps.size(), cfg.prior_var);
  } else {
    throw std::invalid_argument("config: unknown regularizer '" + cfg.regularizer + "'");
  }
  return pb;
}

TrainOutput train_once(const ExperimentConfig& cfg, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, std::uint64_t seed, bool record_grad_norm) {
  const Problem pb = build_problem(cfg, X, y);
  const Theta init = init_theta(pb, seed, cfg.sigma2_init, initial_levels(cfg));
  FitConfig fit_cfg;
  fit_cfg.iters = cfg.iters;
  fit_cfg.adam.alpha = cfg.alpha;
  fit_cfg.record_grad_norm = record_grad_norm;
  const FitResult res = fit(pb, init, fit_cfg);

  TrainOutput out;
  out.ckpt.task = cfg.task;
  const std::optional<double> noise =
      pb.has_noise() ? std::optional<double>(res.params.log_noise) : std::nullopt;
  out.ckpt.model = to_model(res.params.model, noise);
  if (res.params.var_model) out.ckpt.var_model = to_model(*res.params.var_model);
  out.ckpt.link = link_from(pb, res.params);
  out.ckpt.seed = seed;
  out.ckpt.jitter_used = res.jitter_used;
  out.elbo_trace = res.elbo_trace;
  out.grad_norm_trace = res.grad_norm_trace;
  return out;
}

CrossvalResult crossval(const ExperimentConfig& cfg, const Dataset& data) {
  const Task task = config_task(cfg);
  const bool regression = task != Task::Bernoulli;
  const std::vector<int> assignment = fold_assignment(data.N(), cfg.folds, cfg.seed);

  CrossvalResult result;
  std::map<std::string, std::vector<double>> per_metric;
  for (int fold = 0; fold < cfg.folds; ++fold) {
    Dataset train, test;
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < data.N(); ++i) {
      (assignment[i] == fold ? test_rows : train_rows).push_back(i);
    }
    auto take = [&](const std::vector<int>& rows) {
      Dataset d;
      d.X.resize(static_cast<int>(rows.size()), data.X.cols());
      d.y.resize(static_cast<int>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        d.X.row(static_cast<int>(r)) = data.X.row(rows[r]);
        d.y[static_cast<int>(r)] = data.y[rows[r]];
      }
      d.feature_names = data.feature_names;
      return d;
    };
    train = take(train_rows);
    test = take(test_rows);

    ZResult z = zstandardize(train, {test}, regression);
    TrainOutput trained;
    try {
      trained = train_once(cfg, z.train.X, z.train.y, split_seed(cfg.seed, fold + 1));
    } catch (const NumericalError& e) {
      throw NumericalError("crossval: fold " + std::to_string(fold) + ": " + e.what(),
                           e.offending_block);
    }
    const Dataset& ztest = z.others[0];
    const auto mixtures = predictive_mixture(trained.ckpt, ztest.X);

    CompensatedSum ll;
    for (int i = 0; i < ztest.N(); ++i) ll.add(mixtures[i].log_density(ztest.y[i]));
    result.per_fold.push_back({fold, "log_like", ll.value() / ztest.N()});
    per_metric["log_like"].push_back(ll.value() / ztest.N());

    if (regression) {
      CompensatedSum se;
      for (int i = 0; i < ztest.N(); ++i) {
        const double pred = mixtures[i].mixture_mean() * z.stats.y_sd + z.stats.y_mean;
        const double diff = pred - test.y[i];  // raw-space target
        se.add(diff * diff);
      }
      const double rmse = std::sqrt(se.value() / ztest.N());
      result.per_fold.push_back({fold, "rmse", rmse});
      per_metric["rmse"].push_back(rmse);
    } else {
      std::vector<int> yt(ztest.N()), yp(ztest.N());
      for (int i = 0; i < ztest.N(); ++i) {
        yt[i] = static_cast<int>(ztest.y[i]);
        yp[i] = mixtures[i].class_prob() >= 0.5 ? 1 : 0;
      }
      const double f1 = f1_score(yt, yp);
      result.per_fold.push_back({fold, "f1", f1});
      per_metric["f1"].push_back(f1);
    }
  }

  for (const auto& [metric, values] : per_metric) {
    CompensatedSum s;
    for (double v : values) s.add(v);
    const double mean = s.value() / values.size();
    CompensatedSum sq;
    for (double v : values) sq.add((v - mean) * (v - mean));
    const double sd = values.size() > 1 ? std::sqrt(sq.value() / (values.size() - 1)) : 0.0;
    result.summary[metric] = {mean, sd};
  }
  return result;
}

}  // namespace sfgp

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sfgp/elbo.hpp"
#include "sfgp/objective.hpp"
#include "sfgp/train.hpp"

namespace sfgp {

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> feature_names;
  std::string target_name;

  int N() const { return static_cast<int>(X.rows()); }
};

/// Parse a headered numeric CSV, splitting out the target column (selected by
/// name or by zero-based index). Row order preserved. Classification targets
/// must be 0/1; any non-numeric or missing cell is rejected with its location.
Dataset ingest_csv(const std::string& path, const std::string& target, Task task);

struct StandardStats {
  Eigen::VectorXd mean, sd;   // over kept features, training fold only
  std::vector<int> kept;      // surviving feature column indices
  double y_mean = 0.0, y_sd = 1.0;
  bool standardize_y = false;
};

StandardStats fit_standardizer(const Dataset& train, bool standardize_y);
Dataset apply_standardizer(const StandardStats& stats, const Dataset& data);

struct ZResult {
  Dataset train;
  std::vector<Dataset> others;
  StandardStats stats;
};

/// z-standardization with statistics taken from the training split only;
/// constant features are dropped with a warning.
ZResult zstandardize(const Dataset& train, const std::vector<Dataset>& others,
                     bool standardize_y);

/// Seeded shuffled fold labels in [0, folds); depends only on (seed, N).
std::vector<int> fold_assignment(int N, int folds, std::uint64_t seed);

/// F1 with positive class = 1; no positive predictions gives 0 with a warning.
double f1_score(const std::vector<int>& y_true, const std::vector<int>& y_pred);

struct ExperimentConfig {
  std::string task = "classify";  // classify | regress-learnable | regress-hetero | regress-gauss
  int K = 20;
  double link_lo = -3.0, link_hi = 3.0;
  int M = 10;
  std::string link_mode = "fixed";     // fixed | point | gaussian
  std::string link_init = "";          // sigmoid | exp | identity (task default when empty)
  std::string regularizer = "none";    // none | l2-constant | l2-reference | bayes-prior
  double lambda = 1.0;
  double reg_c = 0.0;
  double prior_var = 1.0;              // bayes-prior: p(g_k) = N(x_k, prior_var)
  double alpha = 0.05;
  int iters = 1000;
  int folds = 10;
  std::uint64_t seed = 0;
  double sigma2_init = 1.0;
  bool train_inducing = true;
  bool simplified_form = false;
  std::string data_path;
  std::string target = "y";
};

ExperimentConfig config_from_json_file(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

Task config_task(const ExperimentConfig& cfg);
/// Assemble the objective for (already standardized) data.
Problem build_problem(const ExperimentConfig& cfg, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& y);
/// Initial link levels per config (task default link function at the reps).
std::vector<double> initial_levels(const ExperimentConfig& cfg);

struct TrainOutput {
  Checkpoint ckpt;
  std::vector<double> elbo_trace;
  std::vector<double> grad_norm_trace;
};

TrainOutput train_once(const ExperimentConfig& cfg, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, std::uint64_t seed,
                       bool record_grad_norm = false);

struct FoldMetric {
  int fold;
  std::string metric;
  double value;
};

struct CrossvalResult {
  std::vector<FoldMetric> per_fold;
  std::map<std::string, std::pair<double, double>> summary;  // metric -> (mean, sd)
};

/// Seeded k-fold cross-validation reproducing the standard protocol:
/// per-fold standardization from the training split, fit, held-out mixture
/// log-likelihood plus F1 (classification, threshold 0.5) or RMSE
/// (regression, un-standardized predictions).
CrossvalResult crossval(const ExperimentConfig& cfg, const Dataset& data);

}  // namespace sfgp

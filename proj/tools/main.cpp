// Command-line front end: train/predict/crossval plus the link, bound,
// Monte-Carlo, and gradient-check utilities.
#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sfgp/data.hpp"
#include "sfgp/elbo.hpp"
#include "sfgp/mc_oracle.hpp"
#include "sfgp/piecewise.hpp"
#include "sfgp/svgp.hpp"
#include "sfgp/train.hpp"

namespace {

using namespace sfgp;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 1;

// Registers the shared experiment options on a subcommand. `--config` is
// registered first so a config file loads before explicit flags override it.
void add_config_flags(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option_function<std::string>(
         "--config", [&cfg](const std::string& path) { cfg = config_from_json_file(path); },
         "JSON config file (flags below override its values)");
  cmd->add_option("--data", cfg.data_path, "input CSV path");
  cmd->add_option("--target", cfg.target, "target column name or zero-based index");
  cmd->add_option("--task", cfg.task,
                  "classify | regress-hetero | regress-learnable | regress-gauss");
  cmd->add_option("-K,--levels", cfg.K, "number of link intervals");
  cmd->add_option("--lo", cfg.link_lo, "left end of the finite partition range");
  cmd->add_option("--hi", cfg.link_hi, "right end of the finite partition range");
  cmd->add_option("-M,--inducing", cfg.M, "number of inducing points");
  cmd->add_option("--link-mode", cfg.link_mode, "fixed | point | gaussian");
  cmd->add_option("--link-init", cfg.link_init, "sigmoid | exp | identity (task default)");
  cmd->add_option("--regularizer", cfg.regularizer,
                  "none | l2-constant | l2-reference | bayes-prior");
  cmd->add_option("--lambda", cfg.lambda, "regularization strength");
  cmd->add_option("--reg-c", cfg.reg_c, "l2-constant target value");
  cmd->add_option("--prior-var", cfg.prior_var, "bayes-prior level variance");
  cmd->add_option("--alpha", cfg.alpha, "Adam step size");
  cmd->add_option("--iters", cfg.iters, "optimization steps");
  cmd->add_option("--folds", cfg.folds, "cross-validation folds");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--sigma2-init", cfg.sigma2_init, "initial noise variance");
  cmd->add_flag("--freeze-inducing",
                [&cfg](std::int64_t count) { cfg.train_inducing = (count == 0); },
                "keep inducing locations fixed during training");
  cmd->add_flag("--simplified-form", cfg.simplified_form,
                "use the simplified collapsed-expectation variants instead of the exact forms");
}

Dataset load_data(const ExperimentConfig& cfg) {
  if (cfg.data_path.empty()) throw std::invalid_argument("--data is required");
  return ingest_csv(cfg.data_path, cfg.target, config_task(cfg));
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open output file '" + path + "'");
  return file;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out_path,
              const std::string& trace_path) {
  const Dataset data = load_data(cfg);
  const TrainOutput res =
      train_once(cfg, data.X, data.y, cfg.seed, /*record_grad_norm=*/!trace_path.empty());
  save_checkpoint(out_path, res.ckpt);
  if (!trace_path.empty()) {
    std::ofstream file;
    std::ostream& os = open_out(trace_path, file);
    os << std::setprecision(17) << "step,elbo,grad_norm\n";
    for (std::size_t s = 0; s < res.elbo_trace.size(); ++s) {
      os << s << ',' << res.elbo_trace[s] << ',' << res.grad_norm_trace[s] << '\n';
    }
  }
  std::cout << "wrote " << out_path << ": " << res.elbo_trace.size() << " steps, final elbo "
            << std::setprecision(10)
            << (res.elbo_trace.empty() ? 0.0 : res.elbo_trace.back()) << '\n';
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& target, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const Task task = task_from_string(ckpt.task);
  const Dataset data = ingest_csv(data_path, target, task);
  if (data.X.cols() != ckpt.model.d()) {
    throw std::invalid_argument("predict: dataset has " + std::to_string(data.X.cols()) +
                                " features, model expects " + std::to_string(ckpt.model.d()));
  }
  const auto mixtures = predictive_mixture(ckpt, data.X);
  std::ofstream file;
  std::ostream& os = open_out(out_path, file);
  os << std::setprecision(17);
  const bool classify = task == Task::Bernoulli;
  os << "row,mean,log_density" << (classify ? ",class_prob" : "") << '\n';
  for (std::size_t i = 0; i < mixtures.size(); ++i) {
    os << i << ',' << mixtures[i].mixture_mean() << ','
       << mixtures[i].log_density(data.y[static_cast<Eigen::Index>(i)]);
    if (classify) os << ',' << mixtures[i].class_prob();
    os << '\n';
  }
  return 0;
}

int cmd_crossval(const ExperimentConfig& cfg, const std::string& out_path) {
  const Dataset data = load_data(cfg);
  const CrossvalResult res = crossval(cfg, data);
  std::ofstream file;
  std::ostream& os = open_out(out_path, file);
  os << std::setprecision(17) << "fold,metric,value\n";
  for (const FoldMetric& m : res.per_fold) {
    os << m.fold << ',' << m.metric << ',' << m.value << '\n';
  }
  for (const auto& [metric, stats] : res.summary) {
    os << "mean," << metric << ',' << stats.first << '\n';
    os << "sd," << metric << ',' << stats.second << '\n';
  }
  std::cout << std::setprecision(6);
  for (const auto& [metric, stats] : res.summary) {
    std::cout << metric << ": " << stats.first << " +/- " << stats.second << " ("
              << cfg.folds << "-fold)\n";
  }
  return 0;
}

int cmd_linkdump(const ExperimentConfig& cfg, const std::string& model_path,
                 const std::string& out_path) {
  PiecewiseLink link;
  if (!model_path.empty()) {
    link = load_checkpoint(model_path).link;
  } else {
    link.partition = uniform_partition(cfg.K, cfg.link_lo, cfg.link_hi);
    link.levels = initial_levels(cfg);
    if (link.levels.empty()) {
      throw std::invalid_argument("linkdump: task has no piecewise link");
    }
    if (cfg.link_mode == "gaussian") {
      link.mode = LinkMode::TrainableGaussian;
      link.level_var.assign(link.levels.size(), 0.01);
    }
  }
  std::ofstream file;
  std::ostream& os = open_out(out_path, file);
  write_link_csv(os, link);
  return 0;
}

int cmd_bound(int K, double lo, double hi, double mu, double sigma, bool exp_link,
              std::optional<double> lipschitz, bool force) {
  const Partition p = uniform_partition(K, lo, hi);
  if (!exp_link && !lipschitz) {
    throw std::invalid_argument("bound: pass --exp and/or --lipschitz");
  }
  std::cout << std::setprecision(12);
  if (exp_link) {
    std::cout << "exp_mse " << exp_link_mse(p, mu, sigma) << '\n';
  }
  if (lipschitz) {
    if (exp_link && !force) {
      // the exponential is not globally Lipschitz, so the bound does not apply
      throw std::invalid_argument(
          "bound: the Lipschitz bound does not cover the exp link; pass --force to "
          "evaluate it anyway with the given constant");
    }
    std::cout << "lipschitz_bound " << lipschitz_mse_bound(p, *lipschitz, mu, sigma) << '\n';
  }
  return 0;
}

int cmd_oracle(const std::vector<double>& mus, const std::vector<double>& vars,
               const std::string& link_name, int K, double lo, double hi,
               const std::string& fn, std::size_t n, std::uint64_t seed) {
  if (mus.size() != vars.size() || mus.empty()) {
    throw std::invalid_argument("oracle: need matching --mu/--var pairs (1-3)");
  }
  std::vector<GaussianMarginal> marginals;
  for (std::size_t i = 0; i < mus.size(); ++i) marginals.push_back({mus[i], vars[i]});

  std::optional<PiecewiseLink> link;
  std::vector<const PiecewiseLink*> links;
  if (link_name != "none") {
    const Partition p = uniform_partition(K, lo, hi);
    std::function<double(double)> g;
    if (link_name == "sigmoid") {
      g = [](double x) { return sigmoid(x); };
    } else if (link_name == "exp") {
      g = [](double x) { return std::exp(x); };
    } else if (link_name == "identity") {
      g = [](double x) { return x; };
    } else {
      throw std::invalid_argument("oracle: unknown link '" + link_name + "'");
    }
    link = discretize_link(g, p);
    links.assign(marginals.size(), &*link);
  }

  std::function<double(double)> post;
  if (fn == "mean") {
    post = [](double x) { return x; };
  } else if (fn == "square") {
    post = [](double x) { return x * x; };
  } else if (fn == "exp") {
    post = [](double x) { return std::exp(x); };
  } else if (fn == "log") {
    post = [](double x) { return std::log(x); };
  } else {
    throw std::invalid_argument("oracle: unknown --fn '" + fn + "'");
  }
  auto h = [&post](const std::vector<double>& args) {
    double prod = 1.0;
    for (double a : args) prod *= a;
    return post(prod);
  };
  const McEstimate est = mc_expectation(h, marginals, links, n, seed);
  std::cout << std::setprecision(12) << "mean " << est.mean << "\nse " << est.std_error
            << "\nn " << est.n_samples << "\nseed " << est.seed << "\ngenerator "
            << est.generator << '\n';
  return 0;
}

int cmd_gradcheck(const ExperimentConfig& cfg, double h_scale, double tol) {
  const Dataset data = load_data(cfg);
  const Problem pb = build_problem(cfg, data.X, data.y);
  pb.validate();
  const Theta init = init_theta(pb, cfg.seed, cfg.sigma2_init, initial_levels(cfg));
  const Layout lay = layout_for(pb);
  const Eigen::VectorXd theta0 = pack(lay, init);
  const ValueGrad vg = value_and_grad(pb, theta0, init);
  const Eigen::VectorXd fd = finite_diff_grad(
      [&](const Eigen::VectorXd& t) { return objective_value(pb, t, init); }, theta0, h_scale);

  std::map<std::string, double> worst_by_block;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta0.size(); ++i) {
    const double denom = std::max({1.0, std::abs(vg.grad[i]), std::abs(fd[i])});
    const double rel = std::abs(vg.grad[i] - fd[i]) / denom;
    const std::string block = lay.block_name(static_cast<int>(i));
    worst_by_block[block] = std::max(worst_by_block[block], rel);
    worst = std::max(worst, rel);
  }
  std::cout << std::setprecision(6) << "objective " << vg.value << '\n';
  for (const auto& [block, rel] : worst_by_block) {
    std::cout << block << " max_rel_err " << rel << '\n';
  }
  std::cout << "overall max_rel_err " << worst << " (tolerance " << tol << ")\n";
  if (worst >= tol) {
    std::cerr << "gradcheck FAILED\n";
    return kExitNumerical;
  }
  std::cout << "gradcheck passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse variational GP regression/classification with piecewise-constant "
               "inverse links"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string out_path, trace_path, model_path;

  CLI::App* train_cmd = app.add_subcommand("train", "fit a model and write a checkpoint");
  add_config_flags(train_cmd, cfg);
  train_cmd->add_option("--out", out_path, "checkpoint path")->capture_default_str();
  train_cmd->add_option("--trace", trace_path, "write a step,elbo,grad_norm CSV");

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "per-row mixture mean / log-density / class probability");
  std::string predict_data, predict_target = "y";
  predict_cmd->add_option("--model", model_path, "checkpoint path")->required();
  predict_cmd->add_option("--data", predict_data, "input CSV")->required();
  predict_cmd->add_option("--target", predict_target, "target column name or index");
  predict_cmd->add_option("--out", out_path, "predictions CSV (default stdout)");

  CLI::App* crossval_cmd = app.add_subcommand("crossval", "k-fold cross-validation report");
  add_config_flags(crossval_cmd, cfg);
  crossval_cmd->add_option("--out", out_path, "metrics CSV (default stdout)");

  CLI::App* linkdump_cmd =
      app.add_subcommand("linkdump", "dump the piecewise link as CSV (plot-ready)");
  add_config_flags(linkdump_cmd, cfg);
  linkdump_cmd->add_option("--model", model_path, "checkpoint to dump instead of a fresh link");
  linkdump_cmd->add_option("--out", out_path, "link CSV (default stdout)");

  CLI::App* bound_cmd =
      app.add_subcommand("bound", "link approximation error: exact exp-link MSE and/or "
                                  "Lipschitz bound");
  int bK = 4;
  double blo = -3, bhi = 3, bmu = 0, bsigma = 1;
  bool bexp = false, bforce = false;
  std::optional<double> blip;
  bound_cmd->add_option("-K,--levels", bK, "number of link intervals");
  bound_cmd->add_option("--lo", blo, "partition range left end");
  bound_cmd->add_option("--hi", bhi, "partition range right end");
  bound_cmd->add_option("--mu", bmu, "input mean");
  bound_cmd->add_option("--sigma", bsigma, "input standard deviation");
  bound_cmd->add_flag("--exp", bexp, "exact MSE for the exponential link");
  bound_cmd->add_option("--lipschitz", blip, "Lipschitz constant for the generic bound");
  bound_cmd->add_flag("--force", bforce, "evaluate the Lipschitz bound even for --exp");

  CLI::App* oracle_cmd =
      app.add_subcommand("oracle", "seeded Monte-Carlo expectation for cross-checks");
  std::vector<double> omus, ovars;
  std::string olink = "none", ofn = "mean";
  int oK = 20;
  double olo = -3, ohi = 3;
  std::size_t on = 100000;
  std::uint64_t oseed = 0;
  oracle_cmd->add_option("--mu", omus, "marginal mean (repeat for 2-3 inputs)")->required();
  oracle_cmd->add_option("--var", ovars, "marginal variance (one per --mu)")->required();
  oracle_cmd->add_option("--link", olink, "none | sigmoid | exp | identity");
  oracle_cmd->add_option("-K,--levels", oK, "link intervals");
  oracle_cmd->add_option("--lo", olo, "link partition range left end");
  oracle_cmd->add_option("--hi", ohi, "link partition range right end");
  oracle_cmd->add_option("--fn", ofn, "mean | square | exp | log of the coordinate product");
  oracle_cmd->add_option("-n,--samples", on, "number of draws");
  oracle_cmd->add_option("--seed", oseed, "seed");

  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "compare the analytic gradient with central finite differences");
  double gh = 1e-5, gtol = 1e-4;
  add_config_flags(gradcheck_cmd, cfg);
  gradcheck_cmd->add_option("--fd-step", gh, "finite-difference step scale");
  gradcheck_cmd->add_option("--tol", gtol, "max relative error tolerance");

  CLI::App* config_cmd = app.add_subcommand("config", "configuration utilities");
  bool show_defaults = false;
  config_cmd->add_flag("--defaults", show_defaults, "print the default config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (train_cmd->parsed()) {
      return cmd_train(cfg, out_path.empty() ? "checkpoint.json" : out_path, trace_path);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(model_path, predict_data, predict_target, out_path);
    }
    if (crossval_cmd->parsed()) return cmd_crossval(cfg, out_path);
    if (linkdump_cmd->parsed()) return cmd_linkdump(cfg, model_path, out_path);
    if (bound_cmd->parsed()) return cmd_bound(bK, blo, bhi, bmu, bsigma, bexp, blip, bforce);
    if (oracle_cmd->parsed()) {
      return cmd_oracle(omus, ovars, olink, oK, olo, ohi, ofn, on, oseed);
    }
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(cfg, gh, gtol);
    if (config_cmd->parsed()) {
      if (show_defaults) {
        std::cout << config_to_json(ExperimentConfig{}) << '\n';
        return 0;
      }
      throw std::invalid_argument("config: pass --defaults");
    }
  } catch (const sfgp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what();
    if (!e.offending_block.empty()) std::cerr << " (block: " << e.offending_block << ")";
    std::cerr << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}

#include "sfgp/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "sfgp/math.hpp"

namespace sfgp {

int Partition::interval_of(double x) const {
  // first edge strictly greater than x -> x lies in the interval to its left
  auto it = std::upper_bound(edges.begin(), edges.end(), x);
  return static_cast<int>(it - edges.begin());
}

Partition uniform_partition(int K, double lo, double hi) {
  if (K < 1) throw std::invalid_argument("uniform_partition: K must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("uniform_partition: requires lo < hi");
  Partition p;
  if (K == 1) return p;
  if (K == 2) {
    p.edges = {0.5 * (lo + hi)};
    return p;
  }
  p.edges.resize(K - 1);
  const double step = (hi - lo) / static_cast<double>(K - 2);
  for (int i = 0; i <= K - 2; ++i) p.edges[i] = lo + step * i;
  p.edges.back() = hi;  // exact endpoint regardless of rounding
  return p;
}

std::vector<double> representatives(const Partition& p) {
  const int K = p.size();
  if (K == 1) return {0.0};
  std::vector<double> reps(K);
  for (int k = 0; k + 1 < K; ++k) reps[k] = p.upper(k);
  reps[K - 1] = p.lower(K - 1);
  return reps;
}

PiecewiseLink discretize_link(const std::function<double(double)>& g, const Partition& p) {
  PiecewiseLink link;
  link.partition = p;
  for (double x : representatives(p)) {
    const double gk = g(x);
    if (!std::isfinite(gk)) {
      throw std::domain_error("discretize_link: link function not finite at a representative");
    }
    link.levels.push_back(gk);
  }
  return link;
}

double eval_piecewise(const PiecewiseLink& link, double x) {
  return link.levels[link.partition.interval_of(x)];
}

std::vector<double> interval_probs(const Partition& p, const GaussianMarginal& m) {
  if (m.var < 0.0) throw std::domain_error("interval_probs: negative variance");
  const int K = p.size();
  std::vector<double> probs(K, 0.0);
  if (m.var == 0.0) {
    probs[p.interval_of(m.mean)] = 1.0;  // point mass, half-open convention
    return probs;
  }
  const double sigma = std::sqrt(m.var);
  for (int k = 0; k < K; ++k) {
    probs[k] = gauss_interval_prob(m.mean, sigma, p.lower(k), p.upper(k));
  }
  return probs;
}

double lipschitz_mse_bound(const Partition& p, double lipschitz, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("lipschitz_mse_bound: sigma must be > 0");
  if (!(lipschitz >= 0.0)) {
    throw std::domain_error("lipschitz_mse_bound: Lipschitz constant must be >= 0");
  }
  const std::vector<double> reps = representatives(p);
  CompensatedSum acc;
  acc.add(mu * mu + sigma * sigma);
  for (int k = 0; k < p.size(); ++k) {
    const double l = p.lower(k);
    const double u = p.upper(k);
    const double mass = gauss_interval_prob(mu, sigma, l, u);
    const double partial_mean = truncated_normal_partial_mean(mu, sigma, l, u);
    acc.add(-reps[k] * (2.0 * partial_mean - reps[k] * mass));
  }
  const double bound = lipschitz * lipschitz * acc.value();
  return bound < 0.0 ? 0.0 : bound;
}

double exp_link_mse(const Partition& p, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("exp_link_mse: sigma must be > 0");
  const std::vector<double> reps = representatives(p);
  const double m2 = std::exp(2.0 * mu + 2.0 * sigma * sigma);   // E[exp(2x)]
  const double m1 = std::exp(mu + 0.5 * sigma * sigma);         // E[exp(x)]
  auto phi = [](double z) { return std_normal_cdf(z); };
  CompensatedSum acc;
  for (int k = 0; k < p.size(); ++k) {
    const double zl = std::isinf(p.lower(k)) ? p.lower(k) : (p.lower(k) - mu) / sigma;
    const double zu = std::isinf(p.upper(k)) ? p.upper(k) : (p.upper(k) - mu) / sigma;
    const double gk = std::exp(reps[k]);
    acc.add(m2 * (phi(zu - 2.0 * sigma) - phi(zl - 2.0 * sigma)));
    acc.add(-2.0 * gk * m1 * (phi(zu - sigma) - phi(zl - sigma)));
    acc.add(gk * gk * (phi(zu) - phi(zl)));
  }
  const double mse = acc.value();
  return mse < 0.0 ? 0.0 : mse;
}

namespace {
void put_edge(std::ostream& os, double x) {
  if (std::isinf(x)) {
    os << (x > 0 ? "inf" : "-inf");
  } else {
    os << x;
  }
}
}  // namespace

void write_link_csv(std::ostream& os, const PiecewiseLink& link) {
  const bool with_sd = link.mode == LinkMode::TrainableGaussian;
  os << "k,lower,upper,rep,level" << (with_sd ? ",level_sd" : "") << "\n";
  const std::vector<double> reps = representatives(link.partition);
  os.precision(17);
  for (int k = 0; k < link.size(); ++k) {
    os << k << ",";
    put_edge(os, link.partition.lower(k));
    os << ",";
    put_edge(os, link.partition.upper(k));
    os << "," << reps[k] << "," << link.levels[k];
    if (with_sd) os << "," << std::sqrt(link.level_var[k]);
    os << "\n";
  }
}

}  // namespace sfgp

#include "sfgp/mc_oracle.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "sfgp/math.hpp"

namespace sfgp {

std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 step on master ^ index; decorrelated deterministic children
  std::uint64_t z = (master ^ (index * 0x9E3779B97F4A7C15ULL)) + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

McEstimate mc_expectation(const std::function<double(const std::vector<double>&)>& h,
                          const std::vector<GaussianMarginal>& marginals,
                          const std::vector<const PiecewiseLink*>& links, std::size_t n,
                          std::uint64_t seed) {
  const std::size_t C = marginals.size();
  if (C == 0 || C > 3) throw std::invalid_argument("mc_expectation: need 1-3 marginals");
  if (!links.empty() && links.size() != C) {
    throw std::invalid_argument("mc_expectation: links must be empty or match marginals");
  }
  if (n < 100) throw std::invalid_argument("mc_expectation: need n >= 100");
  std::mt19937_64 rng(split_seed(seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> sigma(C);
  for (std::size_t c = 0; c < C; ++c) {
    if (marginals[c].var < 0.0) throw std::invalid_argument("mc_expectation: negative variance");
    sigma[c] = std::sqrt(marginals[c].var);
  }
  CompensatedSum sum, sum_sq;
  std::size_t bad = 0;
  std::vector<double> args(C);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      double x = marginals[c].mean + sigma[c] * normal(rng);
      if (!links.empty() && links[c] != nullptr) x = eval_piecewise(*links[c], x);
      args[c] = x;
    }
    const double val = h(args);
    if (!std::isfinite(val)) {
      if (++bad > n / 1000) {
        throw std::runtime_error("mc_expectation: h non-finite on > 0.1% of draws");
      }
      continue;
    }
    sum.add(val);
    sum_sq.add(val * val);
  }
  const double m = sum.value() / static_cast<double>(n - bad);
  const double var =
      (sum_sq.value() - static_cast<double>(n - bad) * m * m) / static_cast<double>(n - bad - 1);
  McEstimate est;
  est.mean = m;
  est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(n - bad));
  est.n_samples = n;
  est.seed = seed;
  return est;
}

McEstimate mc_link_mse(const std::function<double(double)>& true_g, const PiecewiseLink& link,
                       double mu, double sigma, std::size_t n, std::uint64_t seed) {
  return mc_expectation(
      [&](const std::vector<double>& args) {
        const double diff = true_g(args[0]) - eval_piecewise(link, args[0]);
        return diff * diff;
      },
      {{mu, sigma * sigma}}, {}, n, seed);
}

}  // namespace sfgp

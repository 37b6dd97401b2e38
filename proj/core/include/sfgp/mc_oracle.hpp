#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sfgp/piecewise.hpp"

namespace sfgp {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string generator = "mt19937_64/splitmix64";
};

/// Seeded reparameterized Monte-Carlo estimate of E[h(x_1, ..., x_C)] for
/// 1-3 independent Gaussian inputs (x = mu + sigma * eps). When a link is
/// supplied for a coordinate, the draw is passed through eval_piecewise
/// before h sees it. Throws if h is non-finite on more than 0.1% of draws.
McEstimate mc_expectation(const std::function<double(const std::vector<double>&)>& h,
                          const std::vector<GaussianMarginal>& marginals,
                          const std::vector<const PiecewiseLink*>& links,  // empty or size C
                          std::size_t n, std::uint64_t seed);

/// MC estimate of E[(g(x) - ghat_K(x))^2] under x ~ N(mu, sigma^2).
McEstimate mc_link_mse(const std::function<double(double)>& true_g, const PiecewiseLink& link,
                       double mu, double sigma, std::size_t n, std::uint64_t seed);

/// Deterministic child seed for parallel substreams / per-fold seeding.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

}  // namespace sfgp

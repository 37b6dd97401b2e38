#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

namespace sfgp {

struct GaussianMarginal {
  double mean = 0.0;
  double var = 0.0;
};

/// K ordered half-open intervals [l_k, u_k) covering the real line, described
/// by the K-1 finite interior breakpoints.
struct Partition {
  std::vector<double> edges;  // strictly increasing

  int size() const { return static_cast<int>(edges.size()) + 1; }

  double lower(int k) const {
    return k == 0 ? -std::numeric_limits<double>::infinity() : edges[k - 1];
  }
  double upper(int k) const {
    return k == size() - 1 ? std::numeric_limits<double>::infinity() : edges[k];
  }

  /// Index of the interval containing x (half-open convention: an edge
  /// belongs to the interval on its right).
  int interval_of(double x) const;
};

/// K-1 edges uniformly spaced so that [lo, hi] splits into K-2 finite
/// intervals plus two infinite tails. K=2 places the single edge at the
/// midpoint; K=1 has no edges.
Partition uniform_partition(int K, double lo, double hi);

/// Representatives x_k = u_k for k < K and x_K = l_K; the K=1 degenerate
/// partition uses 0.
std::vector<double> representatives(const Partition& p);

enum class LinkMode { Fixed, TrainablePoint, TrainableGaussian };

struct PiecewiseLink {
  Partition partition;
  std::vector<double> levels;     // g_k; posterior means in TrainableGaussian mode
  LinkMode mode = LinkMode::Fixed;
  std::vector<double> level_var;  // sigma_tilde^2 per level (TrainableGaussian only)

  int size() const { return partition.size(); }
};

/// Sample a function at the partition representatives to build a fixed link.
PiecewiseLink discretize_link(const std::function<double(double)>& g, const Partition& p);

double eval_piecewise(const PiecewiseLink& link, double x);

/// Interval probabilities of a Gaussian marginal over all K intervals.
/// A zero-variance marginal is a point mass on the interval containing the
/// mean; negative variance throws.
std::vector<double> interval_probs(const Partition& p, const GaussianMarginal& m);

/// Upper bound on E[(g(x) - ghat_K(x))^2] for a Lipschitz link with constant
/// `lipschitz`, under x ~ N(mu, sigma^2). Clamped at 0 from below.
double lipschitz_mse_bound(const Partition& p, double lipschitz, double mu, double sigma);

/// Exact E[(exp(x) - exphat_K(x))^2] under x ~ N(mu, sigma^2), with levels
/// exp(x_k) at the partition representatives.
double exp_link_mse(const Partition& p, double mu, double sigma);

/// CSV dump: header `k,lower,upper,rep,level[,level_sd]`, infinities as
/// -inf/inf.
void write_link_csv(std::ostream& os, const PiecewiseLink& link);

}  // namespace sfgp

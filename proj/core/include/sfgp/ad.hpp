#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sfgp/math.hpp"

// Minimal reverse-mode tape over scalars. Every node has at most two
// parents; leaves are created via Tape::leaf / Var(value, &tape).
// Constants (Var without a tape) mix freely with tracked values.
namespace sfgp::ad {

class Tape {
 public:
  struct Node {
    double w0, w1;
    std::int32_t p0, p1;
  };

  std::int32_t leaf() { return push(-1, 0.0, -1, 0.0); }

  std::int32_t push(std::int32_t p0, double w0, std::int32_t p1, double w1) {
    nodes_.push_back({w0, w1, p0, p1});
    return static_cast<std::int32_t>(nodes_.size()) - 1;
  }

  // Adjoints of every node w.r.t. the output node.
  std::vector<double> backward(std::int32_t out) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[out] = 1.0;
    for (std::int32_t i = out; i >= 0; --i) {
      const double a = adj[i];
      if (a == 0.0) continue;
      const Node& n = nodes_[i];
      if (n.p0 >= 0) adj[n.p0] += n.w0 * a;
      if (n.p1 >= 0) adj[n.p1] += n.w1 * a;
    }
    return adj;
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  std::vector<Node> nodes_;
};

struct Var {
  double v = 0.0;
  Tape* tape = nullptr;
  std::int32_t idx = -1;

  Var() = default;
  Var(double constant) : v(constant) {}  // NOLINT: implicit constants are the point
  Var(double value, Tape* t) : v(value), tape(t), idx(t->leaf()) {}

  bool tracked() const { return tape != nullptr; }
};

inline Var unary(const Var& x, double value, double dx) {
  Var r(value);
  if (x.tracked()) {
    r.tape = x.tape;
    r.idx = x.tape->push(x.idx, dx, -1, 0.0);
  }
  return r;
}

inline Var binary(const Var& x, const Var& y, double value, double dx, double dy) {
  Tape* t = x.tracked() ? x.tape : y.tape;
  Var r(value);
  if (t) {
    r.tape = t;
    r.idx = t->push(x.tracked() ? x.idx : -1, dx, y.tracked() ? y.idx : -1, dy);
  }
  return r;
}

inline Var operator+(const Var& a, const Var& b) { return binary(a, b, a.v + b.v, 1.0, 1.0); }
inline Var operator-(const Var& a, const Var& b) { return binary(a, b, a.v - b.v, 1.0, -1.0); }
inline Var operator*(const Var& a, const Var& b) { return binary(a, b, a.v * b.v, b.v, a.v); }
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.v;
  return binary(a, b, a.v * inv, inv, -a.v * inv * inv);
}
inline Var operator-(const Var& a) { return unary(a, -a.v, -1.0); }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline Var exp(const Var& x) {
  const double e = std::exp(x.v);
  return unary(x, e, e);
}
inline Var log(const Var& x) { return unary(x, std::log(x.v), 1.0 / x.v); }
inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.v);
  return unary(x, s, 0.5 / s);
}
inline Var square(const Var& x) { return unary(x, x.v * x.v, 2.0 * x.v); }

inline Var softplus(const Var& x) {
  return unary(x, sfgp::softplus(x.v), sfgp::sigmoid(x.v));
}
inline Var sigmoid(const Var& x) {
  const double s = sfgp::sigmoid(x.v);
  return unary(x, s, s * (1.0 - s));
}

inline Var clamp_min(const Var& x, double floor) {
  if (x.v >= floor) return unary(x, x.v, 1.0);
  return unary(x, floor, 0.0);
}

namespace detail {
// x * pdf(x), with the correct 0 limit at +-infinity.
inline double x_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return x * sfgp::std_normal_pdf(x);
}
}  // namespace detail

/// P(a < X < b) for X ~ N(mu, sigma^2) with constant bounds; differentiable
/// in mu and sigma.
inline Var interval_prob(const Var& mu, const Var& sigma, double a, double b) {
  const double p = sfgp::gauss_interval_prob(mu.v, sigma.v, a, b);
  const double za = std::isinf(a) ? a : (a - mu.v) / sigma.v;
  const double zb = std::isinf(b) ? b : (b - mu.v) / sigma.v;
  const double inv_sigma = 1.0 / sigma.v;
  const double dmu = (sfgp::std_normal_pdf(za) - sfgp::std_normal_pdf(zb)) * inv_sigma;
  const double dsigma = (detail::x_pdf(za) - detail::x_pdf(zb)) * inv_sigma;
  return binary(mu, sigma, p, dmu, dsigma);
}

inline double primal(double x) { return x; }
inline double primal(const Var& x) { return x.v; }

}  // namespace sfgp::ad

namespace sfgp {
using ad::primal;
}

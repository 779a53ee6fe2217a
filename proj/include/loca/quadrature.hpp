#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "loca/rng.hpp"
#include "loca/tensor.hpp"

namespace loca {

// Fixed integration rule on an axis-aligned box: nodes [Q x d], weights [Q].
// Defines the discrete integral transform; the model trains through it.
struct QuadratureRule {
  std::string kind;  // "gauss_legendre" | "monte_carlo"
  Tensor nodes;
  Tensor weights;
  std::vector<double> lo, hi;

  std::size_t count() const { return weights.size(); }
  std::size_t dim() const { return lo.size(); }
  double volume() const {
    double v = 1.0;
    for (std::size_t k = 0; k < lo.size(); ++k) v *= hi[k] - lo[k];
    return v;
  }
};

namespace detail {

// Legendre P_q and P_{q-1} at t via the three-term recurrence.
inline void legendre_pair(std::size_t q, double t, double& pq, double& pq1) {
  double pm = 1.0, pc = t;
  for (std::size_t k = 2; k <= q; ++k) {
    double pn = ((2.0 * k - 1.0) * t * pc - (k - 1.0) * pm) / static_cast<double>(k);
    pm = pc;
    pc = pn;
  }
  pq = pc;
  pq1 = pm;
}

// Nodes and weights on [-1,1] by Newton iteration from Chebyshev guesses.
inline void gl_reference(std::size_t q, std::vector<double>& x, std::vector<double>& w) {
  x.assign(q, 0.0);
  w.assign(q, 0.0);
  if (q == 1) {
    x[0] = 0.0;
    w[0] = 2.0;
    return;
  }
  for (std::size_t i = 0; i < q; ++i) {
    double t = std::cos(3.141592653589793238462643 * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(q) + 0.5));
    double pq = 0.0, pq1 = 0.0, deriv = 1.0;
    for (int it = 0; it < 100; ++it) {
      legendre_pair(q, t, pq, pq1);
      deriv = static_cast<double>(q) * (t * pq - pq1) / (t * t - 1.0);
      double dt = pq / deriv;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    legendre_pair(q, t, pq, pq1);
    deriv = static_cast<double>(q) * (t * pq - pq1) / (t * t - 1.0);
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * deriv * deriv);
  }
}

}  // namespace detail

// Tensor-product Gauss-Legendre rule mapped onto the box.
inline QuadratureRule gauss_legendre(const std::vector<double>& lo, const std::vector<double>& hi,
                                     const std::vector<std::size_t>& per_dim) {
  std::size_t d = lo.size();
  if (d == 0 || hi.size() != d || per_dim.size() != d)
    throw ConfigError("quadrature: box/dimension mismatch");
  for (std::size_t k = 0; k < d; ++k) {
    if (!(hi[k] > lo[k])) throw ConfigError("quadrature: empty box extent");
    if (per_dim[k] == 0) throw ConfigError("quadrature: zero nodes requested");
  }
  std::vector<std::vector<double>> xs(d), ws(d);
  for (std::size_t k = 0; k < d; ++k) {
    detail::gl_reference(per_dim[k], xs[k], ws[k]);
    double a = lo[k], b = hi[k];
    for (std::size_t i = 0; i < per_dim[k]; ++i) {
      xs[k][i] = 0.5 * (b - a) * xs[k][i] + 0.5 * (a + b);
      ws[k][i] *= 0.5 * (b - a);
    }
  }
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) total *= per_dim[k];
  QuadratureRule r;
  r.kind = "gauss_legendre";
  r.lo = lo;
  r.hi = hi;
  r.nodes = Tensor({total, d});
  r.weights = Tensor({total});
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t i = 0; i < total; ++i) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      r.nodes.v[i * d + k] = xs[k][idx[k]];
      w *= ws[k][idx[k]];
    }
    r.weights.v[i] = w;
    for (std::size_t k = d; k-- > 0;) {
      if (++idx[k] < per_dim[k]) break;
      idx[k] = 0;
    }
  }
  return r;
}

// Uniform Monte Carlo rule; equal weights vol/Q.
inline QuadratureRule monte_carlo(const std::vector<double>& lo, const std::vector<double>& hi,
                                  std::size_t q, Rng& rng) {
  std::size_t d = lo.size();
  if (d == 0 || hi.size() != d) throw ConfigError("quadrature: box/dimension mismatch");
  if (q == 0) throw ConfigError("quadrature: zero nodes requested");
  QuadratureRule r;
  r.kind = "monte_carlo";
  r.lo = lo;
  r.hi = hi;
  r.nodes = Tensor({q, d});
  r.weights = Tensor({q});
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t k = 0; k < d; ++k) r.nodes.v[i * d + k] = rng.uniform(lo[k], hi[k]);
  double w = r.volume() / static_cast<double>(q);
  for (std::size_t i = 0; i < q; ++i) r.weights.v[i] = w;
  return r;
}

// Monte Carlo rule whose nodes alias an existing point set (e.g. the queries),
// so the coupling kernel is computed once on that set.
inline QuadratureRule monte_carlo_from_points(const Tensor& pts, const std::vector<double>& lo,
                                              const std::vector<double>& hi) {
  if (pts.ndim() != 2) throw ShapeError("quadrature: point set must be [Q x d]");
  std::size_t q = pts.rows(), d = pts.cols();
  if (q == 0) throw ConfigError("quadrature: zero nodes requested");
  if (lo.size() != d || hi.size() != d) throw ConfigError("quadrature: box/dimension mismatch");
  QuadratureRule r;
  r.kind = "monte_carlo";
  r.lo = lo;
  r.hi = hi;
  r.nodes = pts;
  r.weights = Tensor({q});
  double w = r.volume() / static_cast<double>(q);
  for (std::size_t i = 0; i < q; ++i) r.weights.v[i] = w;
  return r;
}

// integral of f sampled at the rule's nodes
inline double apply_rule(const QuadratureRule& r, const std::vector<double>& f) {
  if (f.size() != r.count()) throw ShapeError("quadrature: sample count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += r.weights.v[i] * f[i];
  return s;
}

}  // namespace loca

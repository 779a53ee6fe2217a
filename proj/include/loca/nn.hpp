#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "loca/rng.hpp"
#include "loca/tape.hpp"

namespace loca {

struct MlpSpec {
  std::size_t in = 0;
  std::vector<std::size_t> hidden;  // empty = single affine map
  std::size_t out = 0;
};

// Weights stored [in x out] so the forward pass is a plain row-major matmul.
struct MlpParams {
  std::vector<Tensor> W;
  std::vector<Tensor> b;
};

// Glorot normal: std = sqrt(2 / (fan_in + fan_out)), biases zero.
// Draw order is layer by layer, weights row-major, so init is reproducible.
inline Tensor glorot_normal(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw ConfigError("glorot: zero fan");
  Tensor w({fan_in, fan_out});
  double sd = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : w.v) x = sd * rng.normal();
  return w;
}

inline MlpParams mlp_init(Rng& rng, const MlpSpec& spec) {
  if (spec.in == 0 || spec.out == 0) throw ConfigError("mlp: zero width");
  MlpParams p;
  std::size_t prev = spec.in;
  for (std::size_t h : spec.hidden) {
    if (h == 0) throw ConfigError("mlp: zero hidden width");
    p.W.push_back(glorot_normal(rng, prev, h));
    p.b.push_back(Tensor({h}));
    prev = h;
  }
  p.W.push_back(glorot_normal(rng, prev, spec.out));
  p.b.push_back(Tensor({spec.out}));
  return p;
}

// Leaf vars for one MLP's parameters on a given tape.
struct MlpVars {
  std::vector<Var> W;
  std::vector<Var> b;
};

inline MlpVars mlp_leaves(Tape& t, const MlpParams& p) {
  MlpVars v;
  for (const Tensor& w : p.W) v.W.push_back(t.leaf(w));
  for (const Tensor& b : p.b) v.b.push_back(t.leaf(b));
  return v;
}

// GELU between affine layers, linear output layer.
inline Var mlp_forward(const MlpVars& m, const Var& x) {
  Tape& t = *x.tape;
  std::size_t L = m.W.size();
  Var h = x;
  for (std::size_t k = 0; k < L; ++k) {
    if (t.val(h).cols() != t.val(m.W[k]).rows())
      throw ShapeError("mlp layer " + std::to_string(k) + ": input width " +
                       std::to_string(t.val(h).cols()) + " vs weight rows " +
                       std::to_string(t.val(m.W[k]).rows()));
    h = ops::linear(h, m.W[k], m.b[k]);
    if (k + 1 < L) h = ops::gelu(h);
  }
  return h;
}

// Plain forward on raw tensors (no tape); used by evaluation helpers.
inline Tensor mlp_apply(const MlpParams& p, const Tensor& x) {
  Tape t;
  MlpVars m = mlp_leaves(t, p);
  Var out = mlp_forward(m, t.leaf(x));
  return t.val(out);
}

}  // namespace loca

#pragma once

#include <cstddef>

#include "loca/quadrature.hpp"
#include "loca/tape.hpp"

namespace loca {

// Kernel-coupled attention pieces. Lifted queries qy [P x l] and lifted
// integration nodes qz [Q x l] are compared through an RBF base kernel
//   k(a, b) = gamma * exp(-beta |a - b|^2),
// then normalized into the coupling kernel
//   kappa(y, z) = k(y, z) / sqrt(S(y)) sqrt(S(z)),
// where S(.) is the quadrature estimate of the integral of k against the node
// set. The normalization is a congruence D k D, so kappa stays symmetric and
// positive semidefinite on shared point sets, and the domain volume cancels
// from the attention scores.

struct KernelConfig {
  double init_gamma = 1.0;
  double init_beta = 1.0;
  double denom_floor = 1e-12;  // floor under the normalization integrals
};

// Node-side quantities reused across a batch: k(z, z') and its normalizer.
struct KernelNodeCache {
  Var rz;  // 1/sqrt(S(z_q)), [Q]
};

inline KernelNodeCache kernel_node_cache(const Var& qz, const Var& lg, const Var& lb,
                                         const Tensor& w, double floor) {
  Var d_zz = ops::pairwise_sqdist(qz, qz);
  Var k_zz = ops::rbf_from_sqdist(d_zz, lg, lb);
  Var den_z = ops::weighted_rowsum(k_zz, w);
  return KernelNodeCache{ops::rsqrt_floored(den_z, floor)};
}

inline Var coupling_kernel_cached(const Var& qy, const Var& qz, const Var& lg, const Var& lb,
                                  const Tensor& w, double floor, const KernelNodeCache& cache) {
  Var d = ops::pairwise_sqdist(qy, qz);
  Var k = ops::rbf_from_sqdist(d, lg, lb);
  Var den_y = ops::weighted_rowsum(k, w);
  Var ry = ops::rsqrt_floored(den_y, floor);
  return ops::scale_rows_cols(k, ry, cache.rz);
}

inline Var coupling_kernel(const Var& qy, const Var& qz, const Var& lg, const Var& lb,
                           const Tensor& w, double floor = 1e-12) {
  return coupling_kernel_cached(qy, qz, lg, lb, w, floor,
                                kernel_node_cache(qz, lg, lb, w, floor));
}

// Discretized integral transform: out[p,:] = sum_q w_q kappa[p,q] g[q,:].
inline Var kca_transform(const Var& kappa, const Var& g_nodes, const Tensor& w) {
  return ops::matmul(ops::scale_cols_const(kappa, w), g_nodes);
}

// Per-channel softmax over the n candidate features at every query.
inline Var attention_weights(const Var& scores, std::size_t n, std::size_t ds) {
  return ops::softmax_features(scores, n, ds);
}

}  // namespace loca

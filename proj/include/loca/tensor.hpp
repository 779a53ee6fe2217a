#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "loca/common.hpp"

namespace loca {

// Dense row-major float64 array with an explicit shape.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    v.assign(count(shape), 0.0);
  }
  Tensor(std::vector<std::size_t> s, std::vector<double> data)
      : shape(std::move(s)), v(std::move(data)) {
    if (v.size() != count(shape)) throw ShapeError("tensor data does not match shape");
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor scalar(double x) { return Tensor({1}, {x}); }

  std::size_t size() const { return v.size(); }
  std::size_t ndim() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const {
    std::size_t c = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
    return c;
  }

  double& at(std::size_t i) { return v[i]; }
  double at(std::size_t i) const { return v[i]; }
  double& at2(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  double at2(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline bool all_finite(const Tensor& t) {
  for (double x : t.v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline std::string shape_str(const Tensor& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + ")";
}

// ---- raw matmul kernels; all accumulate into C ----

// C[M x N] += A[M x K] * B[K x N]
inline void mm_ab(double* c, const double* a, const double* b, std::size_t M, std::size_t K,
                  std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    double* ci = c + i * N;
    const double* ai = a + i * K;
    for (std::size_t k = 0; k < K; ++k) {
      double aik = ai[k];
      const double* bk = b + k * N;
      for (std::size_t j = 0; j < N; ++j) ci[j] += aik * bk[j];
    }
  }
}

// C[M x N] += A[M x K] * B^T, with B stored [N x K]
inline void mm_abt(double* c, const double* a, const double* b, std::size_t M, std::size_t K,
                   std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* ai = a + i * K;
    double* ci = c + i * N;
    for (std::size_t j = 0; j < N; ++j) {
      const double* bj = b + j * K;
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += ai[k] * bj[k];
      ci[j] += s;
    }
  }
}

// C[K x N] += A^T * B, with A stored [M x K], B stored [M x N]
inline void mm_atb(double* c, const double* a, const double* b, std::size_t M, std::size_t K,
                   std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* ai = a + i * K;
    const double* bi = b + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      double aik = ai[k];
      double* ck = c + k * N;
      for (std::size_t j = 0; j < N; ++j) ck[j] += aik * bi[j];
    }
  }
}

}  // namespace loca

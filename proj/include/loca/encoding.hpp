#pragma once

#include <cmath>
#include <cstddef>

#include "loca/tensor.hpp"

namespace loca {

// Harmonic positional features. Each coordinate i of a query obtains an
// H-wide block of pairs [cos(2^j pi y_i), sin(2^j pi y_i)], j = 1..H/2, so a
// [P x d_y] query set becomes [P x H*d_y]. Frequencies start at 2*pi; the map
// is (2^(H/2) pi)-Lipschitz per coordinate. Queries are expected in [0,1]^d_y.
inline Tensor positional_encode(const Tensor& y, std::size_t H) {
  if (H == 0 || H % 2 != 0) throw ConfigError("positional encoding: H must be even and positive");
  if (y.ndim() != 2) throw ShapeError("positional encoding: queries must be [P x d_y]");
  std::size_t P = y.rows(), dy = y.cols();
  constexpr double pi = 3.141592653589793238462643;
  Tensor e({P, H * dy});
  for (std::size_t p = 0; p < P; ++p) {
    const double* yp = y.v.data() + p * dy;
    double* ep = e.v.data() + p * H * dy;
    for (std::size_t i = 0; i < dy; ++i) {
      double freq = 2.0 * pi;
      for (std::size_t j = 0; j < H / 2; ++j) {
        ep[i * H + 2 * j] = std::cos(freq * yp[i]);
        ep[i * H + 2 * j + 1] = std::sin(freq * yp[i]);
        freq *= 2.0;
      }
    }
  }
  return e;
}

// Projection of periodic sensor samples onto the d/2 lowest Fourier modes,
// returned re/im interleaved, lowest mode first. Coefficients carry a 1/m
// factor so the DC entry equals the sample mean. Direct summation: m need not
// be a power of two.
inline Tensor fourier_project(const Tensor& u, std::size_t d) {
  if (u.ndim() != 1) throw ShapeError("spectral encoder expects a 1d sample vector");
  if (d == 0 || d % 2 != 0) throw ConfigError("spectral encoder: d must be even and positive");
  std::size_t m = u.size();
  if (d / 2 > m) throw ConfigError("spectral encoder: more modes requested than samples");
  constexpr double two_pi = 6.283185307179586476925287;
  Tensor out({d});
  for (std::size_t k = 0; k < d / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double a = two_pi * static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(m);
      re += u.v[j] * std::cos(a);
      im -= u.v[j] * std::sin(a);
    }
    out.v[2 * k] = re / static_cast<double>(m);
    out.v[2 * k + 1] = im / static_cast<double>(m);
  }
  return out;
}

// Linear interpolation of samples on one uniform grid over [0,1] (endpoints
// included) onto another uniform periodic grid i/n. Used to bring sensor
// counts to the power-of-two lattice the scattering encoder runs on.
inline Tensor resample_linear(const Tensor& u, std::size_t n) {
  if (u.ndim() != 1 || u.size() < 2) throw ShapeError("resample: need a 1d vector of >= 2 samples");
  std::size_t m = u.size();
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    double x = static_cast<double>(i) / static_cast<double>(n) * static_cast<double>(m - 1);
    std::size_t j = static_cast<std::size_t>(x);
    if (j >= m - 1) j = m - 2;
    double t = x - static_cast<double>(j);
    out.v[i] = (1.0 - t) * u.v[j] + t * u.v[j + 1];
  }
  return out;
}

}  // namespace loca

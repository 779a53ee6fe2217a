#pragma once

#include <complex>
#include <vector>

#include "loca/common.hpp"

namespace loca {

// Iterative radix-2 FFT. Forward is unscaled; inverse divides by N, so
// Parseval reads |x|^2 = (1/N) |x_hat|^2.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ConfigError("fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * 3.141592653589793238462643 / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

// Row-major 2D transform: FFT on every row, then every column.
inline void fft2_inplace(std::vector<std::complex<double>>& a, std::size_t rows, std::size_t cols,
                         bool inverse) {
  if (a.size() != rows * cols) throw ShapeError("fft2: buffer size mismatch");
  std::vector<std::complex<double>> tmp;
  for (std::size_t r = 0; r < rows; ++r) {
    tmp.assign(a.begin() + r * cols, a.begin() + (r + 1) * cols);
    fft_inplace(tmp, inverse);
    std::copy(tmp.begin(), tmp.end(), a.begin() + r * cols);
  }
  tmp.resize(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) tmp[r] = a[r * cols + c];
    fft_inplace(tmp, inverse);
    for (std::size_t r = 0; r < rows; ++r) a[r * cols + c] = tmp[r];
  }
}

}  // namespace loca

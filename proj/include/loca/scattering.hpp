#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "loca/fft.hpp"
#include "loca/tensor.hpp"

namespace loca {

// Wavelet-scattering encoder. Filters are analytic Morlet bumps defined
// directly on the DFT frequency lattice, with the correction term that makes
// every wavelet vanish exactly at DC. After filtering, modulus envelopes are
// low-passed and block-average pooled by 2^J. The wavelet bank carries a
// global gain chosen so the Littlewood-Paley sum |phi|^2 + Sum |psi|^2 never
// exceeds 1; with the modulus being 1-Lipschitz and pooling a per-block mean,
// the whole map is non-expansive in l2.
struct ScatteringConfig {
  std::size_t J = 1;   // number of dyadic scales
  std::size_t L = 1;   // orientations on the half-circle (2d only)
  std::size_t m0 = 2;  // maximum path length
  std::vector<std::size_t> input_shape;  // {N} or {Ny, Nx}, powers of two
};

// One filtering path: (scale, angle) per hop, scales strictly increasing.
struct ScatteringPath {
  std::vector<std::size_t> scale;
  std::vector<std::size_t> angle;
};

struct ScatteringTransform {
  ScatteringConfig cfg;
  std::size_t dim = 1;
  std::size_t n_total = 0;
  std::size_t pool = 1;          // 2^J, per axis
  std::size_t out_per_path = 0;  // pooled field size
  double wavelet_gain = 1.0;
  std::vector<ScatteringPath> paths;              // depth-first, empty path first
  std::vector<std::vector<double>> psi_hat;       // [J] (1d) or [J*L] (2d)
  std::vector<double> phi_hat;

  std::size_t filter_index(std::size_t j, std::size_t r) const {
    return dim == 1 ? j : j * cfg.L + r;
  }
  std::size_t output_width() const { return paths.size() * out_per_path; }
};

namespace detail {

inline bool pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline double wrap_freq(std::size_t k, std::size_t n) {
  constexpr double two_pi = 6.283185307179586476925287;
  double w = two_pi * static_cast<double>(k) / static_cast<double>(n);
  if (k > n / 2) w -= two_pi;
  return w;
}

inline void enumerate_paths(const ScatteringConfig& cfg, std::size_t n_angles,
                            ScatteringPath& cur, std::vector<ScatteringPath>& out) {
  out.push_back(cur);
  if (cur.scale.size() >= cfg.m0) return;
  std::size_t j_min = cur.scale.empty() ? 0 : cur.scale.back() + 1;
  for (std::size_t j = j_min; j < cfg.J; ++j)
    for (std::size_t r = 0; r < n_angles; ++r) {
      cur.scale.push_back(j);
      cur.angle.push_back(r);
      enumerate_paths(cfg, n_angles, cur, out);
      cur.scale.pop_back();
      cur.angle.pop_back();
    }
}

}  // namespace detail

inline ScatteringTransform make_scattering(const ScatteringConfig& cfg) {
  ScatteringTransform t;
  t.cfg = cfg;
  if (cfg.J == 0) throw ConfigError("scattering: J must be >= 1");
  if (cfg.input_shape.empty() || cfg.input_shape.size() > 2)
    throw ConfigError("scattering: input must be 1d or 2d");
  t.dim = cfg.input_shape.size();
  if (t.dim == 2 && cfg.L == 0) throw ConfigError("scattering: L must be >= 1 in 2d");
  t.pool = std::size_t(1) << cfg.J;
  t.n_total = 1;
  t.out_per_path = 1;
  for (std::size_t ext : cfg.input_shape) {
    if (!detail::pow2(ext)) throw ConfigError("scattering: grid extents must be powers of two");
    if (ext < t.pool) throw ConfigError("scattering: grid finer than the pooling window required");
    t.n_total *= ext;
    t.out_per_path *= ext / t.pool;
  }

  std::size_t n_angles = t.dim == 1 ? 1 : cfg.L;
  ScatteringPath cur;
  detail::enumerate_paths(cfg, n_angles, cur, t.paths);

  constexpr double pi = 3.141592653589793238462643;
  double w0 = 0.75 * pi;
  // low-pass bandwidth at half the lowest wavelet center: keeps the smoothed
  // field bandlimited to the pooling stride, so block means barely alias
  double s_phi = w0 / static_cast<double>(std::size_t(2) << cfg.J);

  // per-bin frequency vectors
  std::size_t ny = cfg.input_shape[0];
  std::size_t nx = t.dim == 2 ? cfg.input_shape[1] : 1;
  t.phi_hat.resize(t.n_total);
  t.psi_hat.assign(cfg.J * n_angles, std::vector<double>(t.n_total, 0.0));
  for (std::size_t ky = 0; ky < ny; ++ky) {
    double wy = detail::wrap_freq(ky, ny);
    for (std::size_t kx = 0; kx < nx; ++kx) {
      std::size_t bin = ky * nx + kx;
      double w1 = wy;
      double w2 = t.dim == 2 ? detail::wrap_freq(kx, nx) : 0.0;
      double wsq = w1 * w1 + w2 * w2;
      t.phi_hat[bin] = std::exp(-wsq / (2.0 * s_phi * s_phi));
      for (std::size_t j = 0; j < cfg.J; ++j) {
        double cj = w0 / static_cast<double>(std::size_t(1) << j);
        double sj = cj / 2.0;
        double corr = std::exp(-cj * cj / (2.0 * sj * sj));
        for (std::size_t r = 0; r < n_angles; ++r) {
          double th = pi * static_cast<double>(r) / static_cast<double>(n_angles);
          double c1 = t.dim == 1 ? cj : cj * std::cos(th);
          double c2 = t.dim == 1 ? 0.0 : cj * std::sin(th);
          double d1 = w1 - c1, d2 = w2 - c2;
          double g = std::exp(-(d1 * d1 + d2 * d2) / (2.0 * sj * sj));
          double low = std::exp(-wsq / (2.0 * sj * sj));
          t.psi_hat[t.filter_index(j, r)][bin] = g - corr * low;
        }
      }
    }
  }

  // gain: keep |phi|^2 + gain^2 * Sum |psi|^2 <= 1 at every frequency bin
  double c2 = -1.0;
  for (std::size_t bin = 0; bin < t.n_total; ++bin) {
    double a = 0.0;
    for (const auto& f : t.psi_hat) a += f[bin] * f[bin];
    if (a < 1e-12) continue;
    double head = 1.0 - t.phi_hat[bin] * t.phi_hat[bin];
    if (head < 0.0) head = 0.0;
    double r = head / a;
    if (c2 < 0.0 || r < c2) c2 = r;
  }
  t.wavelet_gain = c2 > 0.0 ? std::sqrt(c2) : 0.0;
  if (!(t.wavelet_gain > 0.0)) throw InvariantError("scattering: degenerate filter bank gain");
  return t;
}

namespace detail {

inline void pooled_output(const ScatteringTransform& t, const std::vector<double>& field,
                          double* out) {
  std::size_t ny = t.cfg.input_shape[0];
  if (t.dim == 1) {
    std::size_t no = ny / t.pool;
    double inv = 1.0 / static_cast<double>(t.pool);
    for (std::size_t i = 0; i < no; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < t.pool; ++k) s += field[i * t.pool + k];
      out[i] = s * inv;
    }
  } else {
    std::size_t nx = t.cfg.input_shape[1];
    std::size_t oy = ny / t.pool, ox = nx / t.pool;
    double inv = 1.0 / static_cast<double>(t.pool * t.pool);
    for (std::size_t i = 0; i < oy; ++i)
      for (std::size_t j = 0; j < ox; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < t.pool; ++a)
          for (std::size_t b = 0; b < t.pool; ++b)
            s += field[(i * t.pool + a) * nx + j * t.pool + b];
        out[i * ox + j] = s * inv;
      }
  }
}

inline void spectrum(const ScatteringTransform& t, std::vector<std::complex<double>>& buf,
                     bool inverse) {
  if (t.dim == 1)
    fft_inplace(buf, inverse);
  else
    fft2_inplace(buf, t.cfg.input_shape[0], t.cfg.input_shape[1], inverse);
}

// DFS over path suffixes. env_hat is the spectrum of the current envelope;
// emits one pooled low-pass output per visited prefix, matching the order
// produced by enumerate_paths.
inline void propagate(const ScatteringTransform& t, const std::vector<std::complex<double>>& env_hat,
                      std::size_t depth, std::size_t min_scale, double*& out) {
  std::size_t n = t.n_total;
  std::vector<std::complex<double>> buf(n);
  // low-pass head for this prefix
  for (std::size_t i = 0; i < n; ++i) buf[i] = env_hat[i] * t.phi_hat[i];
  spectrum(t, buf, true);
  std::vector<double> field(n);
  for (std::size_t i = 0; i < n; ++i) field[i] = buf[i].real();
  pooled_output(t, field, out);
  out += t.out_per_path;
  if (depth >= t.cfg.m0) return;
  std::size_t n_angles = t.dim == 1 ? 1 : t.cfg.L;
  for (std::size_t j = min_scale; j < t.cfg.J; ++j)
    for (std::size_t r = 0; r < n_angles; ++r) {
      const std::vector<double>& psi = t.psi_hat[t.filter_index(j, r)];
      for (std::size_t i = 0; i < n; ++i) buf[i] = env_hat[i] * (t.wavelet_gain * psi[i]);
      spectrum(t, buf, true);
      std::vector<std::complex<double>> next(n);
      for (std::size_t i = 0; i < n; ++i) next[i] = std::abs(buf[i]);
      spectrum(t, next, false);
      propagate(t, next, depth + 1, j + 1, out);
    }
}

}  // namespace detail

// Scattering coefficients of one sample; u must match the configured grid.
inline Tensor scatter(const ScatteringTransform& t, const Tensor& u) {
  if (u.size() != t.n_total) throw ShapeError("scatter: sample does not match the configured grid");
  if (!all_finite(u)) throw NumericError("scatter: non-finite input");
  std::vector<std::complex<double>> u_hat(t.n_total);
  for (std::size_t i = 0; i < t.n_total; ++i) u_hat[i] = u.v[i];
  detail::spectrum(t, u_hat, false);
  Tensor out({t.output_width()});
  double* p = out.v.data();
  detail::propagate(t, u_hat, 0, 0, p);
  if (p != out.v.data() + out.size()) throw InvariantError("scatter: path walk output mismatch");
  if (!all_finite(out)) throw NumericError("scatter: non-finite coefficients");
  return out;
}

}  // namespace loca

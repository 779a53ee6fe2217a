#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "loca/tensor.hpp"

namespace loca {

// Adam with bias correction and a stepped lr decay (x rate every `every` iters).
struct AdamState {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_rate = 0.99;
  std::int64_t decay_every = 100;
  std::int64_t step = 0;  // 0-based iteration counter
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline AdamState adam_init(const std::vector<Tensor*>& params, double base_lr) {
  AdamState s;
  s.base_lr = base_lr;
  for (const Tensor* p : params) {
    s.m.push_back(Tensor(p->shape));
    s.v.push_back(Tensor(p->shape));
  }
  return s;
}

inline double adam_lr(const AdamState& s) {
  return s.base_lr * std::pow(s.decay_rate, static_cast<double>(s.step / s.decay_every));
}

inline void adam_step(AdamState& s, const std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads) {
  if (params.size() != s.m.size() || grads.size() != params.size())
    throw ShapeError("adam: parameter/state count mismatch");
  double lr = adam_lr(s);
  double t = static_cast<double>(s.step + 1);
  double c1 = 1.0 - std::pow(s.beta1, t);
  double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(s.m[i]) || g.size() != p.size())
      throw ShapeError("adam: gradient shape mismatch");
    double* pv = p.v.data();
    double* mv = s.m[i].v.data();
    double* vv = s.v[i].v.data();
    const double* gv = g.v.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      mv[j] = s.beta1 * mv[j] + (1.0 - s.beta1) * gv[j];
      vv[j] = s.beta2 * vv[j] + (1.0 - s.beta2) * gv[j] * gv[j];
      double mh = mv[j] / c1;
      double vh = vv[j] / c2;
      pv[j] -= lr * mh / (std::sqrt(vh) + s.eps);
    }
    if (!all_finite(p)) throw NumericError("adam: non-finite parameter after update");
  }
  ++s.step;
}

}  // namespace loca

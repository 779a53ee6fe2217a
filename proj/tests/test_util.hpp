#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "loca/tensor.hpp"

namespace testutil {

// Central finite difference with the step scaled to the parameter magnitude.
inline double fd_partial(const std::function<double()>& eval, double& theta) {
  double h = 1e-6 * std::max(1.0, std::abs(theta));
  double orig = theta;
  theta = orig + h;
  double fp = eval();
  theta = orig - h;
  double fm = eval();
  theta = orig;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Worst relative disagreement between analytic grads and finite differences
// over every entry of every listed parameter tensor.
inline double max_grad_rel_err(const std::function<double()>& eval,
                               const std::vector<loca::Tensor*>& params,
                               const std::vector<const loca::Tensor*>& grads) {
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t]->size(); ++i) {
      double fd = fd_partial(eval, params[t]->v[i]);
      worst = std::max(worst, rel_err(fd, grads[t]->v[i]));
    }
  }
  return worst;
}

}  // namespace testutil

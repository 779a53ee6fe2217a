#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "loca/tensor.hpp"

namespace loca {

// Reverse-mode tape. Nodes hold values; backward closures push adjoints to
// parents. Parents always have smaller ids, so one descending sweep from the
// loss node visits every node exactly once.
class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  struct Node {
    std::array<int, 3> parent{{-1, -1, -1}};
    int np = 0;
    std::function<void(Tape&, int)> back;  // (tape, self id); null for leaves
  };

  Var leaf(Tensor t) {
    if (!all_finite(t)) throw NumericError("leaf: non-finite input");
    return emplace(std::move(t), Node{});
  }

  Var push(Tensor out, const char* op, Node n) {
    if (!all_finite(out)) throw NumericError(std::string(op) + ": non-finite output");
    return emplace(std::move(out), std::move(n));
  }

  const Tensor& val(const Var& x) const { return vals_[check(x)]; }
  double item(const Var& x) const {
    const Tensor& t = val(x);
    if (t.size() != 1) throw ShapeError("item: tensor is not scalar");
    return t.v[0];
  }

  // adjoint buffer for a node, allocated lazily during backward
  Tensor& grad_ref(int id) {
    Tensor& g = grads_[id];
    if (g.v.empty()) g = Tensor(vals_[id].shape);
    return g;
  }

  const Tensor& grad(const Var& x) const {
    int id = check(x);
    if (grads_.empty()) throw InvariantError("grad: backward has not been run");
    if (grads_[id].v.empty()) {
      zero_.reset(new Tensor(vals_[id].shape));
      return *zero_;
    }
    return grads_[id];
  }

  void backward(const Var& loss) {
    if (!loss.valid() || loss.tape != this)
      throw InvariantError("backward: no loss recorded on this tape");
    int L = check(loss);
    if (vals_[L].size() != 1) throw InvariantError("backward: loss must be scalar");
    grads_.assign(vals_.size(), Tensor{});
    std::vector<char> reach(vals_.size(), 0);
    std::vector<int> stack{L};
    reach[L] = 1;
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      const Node& n = nodes_[id];
      for (int k = 0; k < n.np; ++k) {
        int p = n.parent[k];
        if (!reach[p]) {
          reach[p] = 1;
          stack.push_back(p);
        }
      }
    }
    grad_ref(L).v[0] = 1.0;
    for (int id = L; id >= 0; --id) {
      if (reach[id] && nodes_[id].back && !grads_[id].v.empty()) nodes_[id].back(*this, id);
    }
    for (int id = 0; id <= L; ++id) {
      if (reach[id] && !grads_[id].v.empty() && !all_finite(grads_[id]))
        throw NumericError("backward: non-finite gradient");
    }
  }

  void reset() {
    vals_.clear();
    grads_.clear();
    nodes_.clear();
  }

  std::size_t size() const { return vals_.size(); }

  std::vector<Tensor> vals_;
  std::vector<Tensor> grads_;
  std::vector<Node> nodes_;

 private:
  Var emplace(Tensor t, Node n) {
    vals_.push_back(std::move(t));
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(vals_.size()) - 1};
  }

  int check(const Var& x) const {
    if (!x.valid() || x.tape != this || x.id >= static_cast<int>(vals_.size()))
      throw InvariantError("var does not belong to this tape");
    return x.id;
  }

  mutable std::unique_ptr<Tensor> zero_;
};

namespace ops {

inline Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape != b.tape) throw InvariantError("operands recorded on different tapes");
  return *a.tape;
}

inline Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  if (!x.same_shape(y)) throw ShapeError("add: shape mismatch " + shape_str(x) + " vs " + shape_str(y));
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] + y.v[i];
  Tape::Node n;
  n.parent = {a.id, b.id, -1};
  n.np = 2;
  n.back = [](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tape::Node& nd = tp.nodes_[self];
    Tensor& ga = tp.grad_ref(nd.parent[0]);
    Tensor& gb = tp.grad_ref(nd.parent[1]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] += g.v[i];
    }
  };
  return t.push(std::move(out), "add", std::move(n));
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  if (!x.same_shape(y)) throw ShapeError("sub: shape mismatch " + shape_str(x) + " vs " + shape_str(y));
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] - y.v[i];
  Tape::Node n;
  n.parent = {a.id, b.id, -1};
  n.np = 2;
  n.back = [](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tape::Node& nd = tp.nodes_[self];
    Tensor& ga = tp.grad_ref(nd.parent[0]);
    Tensor& gb = tp.grad_ref(nd.parent[1]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] -= g.v[i];
    }
  };
  return t.push(std::move(out), "sub", std::move(n));
}

// a - c with c a plain tensor (e.g. training targets)
inline Var sub_const(const Var& a, const Tensor& c) {
  Tape& t = *a.tape;
  const Tensor& x = t.val(a);
  if (x.size() != c.size()) throw ShapeError("sub_const: size mismatch");
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] - c.v[i];
  Tape::Node n;
  n.parent = {a.id, -1, -1};
  n.np = 1;
  n.back = [](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    Tensor& ga = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
  };
  return t.push(std::move(out), "sub_const", std::move(n));
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  if (!x.same_shape(y)) throw ShapeError("mul: shape mismatch");
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] * y.v[i];
  Tape::Node n;
  n.parent = {a.id, b.id, -1};
  n.np = 2;
  n.back = [](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tape::Node& nd = tp.nodes_[self];
    const Tensor& x = tp.vals_[nd.parent[0]];
    const Tensor& y = tp.vals_[nd.parent[1]];
    Tensor& ga = tp.grad_ref(nd.parent[0]);
    Tensor& gb = tp.grad_ref(nd.parent[1]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i] * y.v[i];
      gb.v[i] += g.v[i] * x.v[i];
    }
  };
  return t.push(std::move(out), "mul", std::move(n));
}

inline Var scale(const Var& a, double c) {
  Tape& t = *a.tape;
  const Tensor& x = t.val(a);
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] * c;
  Tape::Node n;
  n.parent = {a.id, -1, -1};
  n.np = 1;
  n.back = [c](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    Tensor& ga = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * c;
  };
  return t.push(std::move(out), "scale", std::move(n));
}

inline Var sum(const Var& a) {
  Tape& t = *a.tape;
  const Tensor& x = t.val(a);
  double s = 0.0;
  for (double xi : x.v) s += xi;
  Tape::Node n;
  n.parent = {a.id, -1, -1};
  n.np = 1;
  n.back = [](Tape& tp, int self) {
    double g = tp.grads_[self].v[0];
    Tensor& ga = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.v[i] += g;
  };
  return t.push(Tensor::scalar(s), "sum", std::move(n));
}

inline Var sum_squares(const Var& a) {
  Tape& t = *a.tape;
  const Tensor& x = t.val(a);
  double s = 0.0;
  for (double xi : x.v) s += xi * xi;
  Tape::Node n;
  n.parent = {a.id, -1, -1};
  n.np = 1;
  n.back = [](Tape& tp, int self) {
    double g = tp.grads_[self].v[0];
    const Tensor& x = tp.vals_[tp.nodes_[self].parent[0]];
    Tensor& ga = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t i = 0; i < x.size(); ++i) ga.v[i] += g * 2.0 * x.v[i];
  };
  return t.push(Tensor::scalar(s), "sum_squares", std::move(n));
}

// Y = X * W + b, with X [R x in], W [in x out], b [out]
inline Var linear(const Var& xv, const Var& wv, const Var& bv) {
  Tape& t = *xv.tape;
  const Tensor& x = t.val(xv);
  const Tensor& w = t.val(wv);
  const Tensor& b = t.val(bv);
  std::size_t R = x.rows(), in = x.cols(), out = w.cols();
  if (w.rows() != in)
    throw ShapeError("linear: input width " + std::to_string(in) + " vs weight rows " +
                     std::to_string(w.rows()));
  if (b.size() != out) throw ShapeError("linear: bias size mismatch");
  Tensor y({R, out});
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < out; ++j) y.v[i * out + j] = b.v[j];
  mm_ab(y.v.data(), x.v.data(), w.v.data(), R, in, out);
  Tape::Node n;
  n.parent = {xv.id, wv.id, bv.id};
  n.np = 3;
  n.back = [R, in, out](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tape::Node& nd = tp.nodes_[self];
    const Tensor& x = tp.vals_[nd.parent[0]];
    const Tensor& w = tp.vals_[nd.parent[1]];
    Tensor& gx = tp.grad_ref(nd.parent[0]);
    Tensor& gw = tp.grad_ref(nd.parent[1]);
    Tensor& gb = tp.grad_ref(nd.parent[2]);
    mm_abt(gx.v.data(), g.v.data(), w.v.data(), R, out, in);
    mm_atb(gw.v.data(), x.v.data(), g.v.data(), R, in, out);
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < out; ++j) gb.v[j] += g.v[i * out + j];
  };
  return t.push(std::move(y), "linear", std::move(n));
}

// x * Phi(x) with Phi the standard normal CDF (exact erf form)
inline Var gelu(const Var& a) {
  Tape& t = *a.tape;
  const Tensor& x = t.val(a);
  Tensor y(x.shape);
  Tensor deriv(x.shape);
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double xi = x.v[i];
    double cdf = 0.5 * std::erfc(-xi * inv_sqrt2);
    double pdf = inv_sqrt2pi * std::exp(-0.5 * xi * xi);
    y.v[i] = xi * cdf;
    deriv.v[i] = cdf + xi * pdf;
  }
  Tape::Node n;
  n.parent = {a.id, -1, -1};
  n.np = 1;
  n.back = [d = std::move(deriv)](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    Tensor& ga = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * d.v[i];
  };
  return t.push(std::move(y), "gelu", std::move(n));
}

// Rows of X hold [n x d_s] blocks; softmax over the n axis independently for
// each (row, channel). A single [n x d_s] score matrix is the R = 1 case.
inline Var softmax_features(const Var& a, std::size_t n, std::size_t ds) {
  Tape& t = *a.tape;
  const Tensor& x = t.val(a);
  if (n == 0 || ds == 0) throw ConfigError("softmax: empty feature axis");
  std::size_t R;
  if (x.cols() == n * ds) {
    R = x.rows();  // batched: one [n x d_s] block per row
  } else if (x.ndim() == 2 && x.rows() == n && x.cols() == ds) {
    R = 1;  // a single score matrix; same memory layout
  } else {
    throw ShapeError("softmax: row width != n*d_s");
  }
  Tensor y(x.shape);
  for (std::size_t r = 0; r < R; ++r) {
    const double* xr = x.v.data() + r * n * ds;
    double* yr = y.v.data() + r * n * ds;
    for (std::size_t k = 0; k < ds; ++k) {
      double mx = xr[k];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xr[i * ds + k]);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double e = std::exp(xr[i * ds + k] - mx);
        yr[i * ds + k] = e;
        s += e;
      }
      double inv = 1.0 / s;
      for (std::size_t i = 0; i < n; ++i) yr[i * ds + k] *= inv;
    }
  }
  Tape::Node nn;
  nn.parent = {a.id, -1, -1};
  nn.np = 1;
  nn.back = [n, ds, R](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tensor& y = tp.vals_[self];
    Tensor& ga = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t r = 0; r < R; ++r) {
      const double* yr = y.v.data() + r * n * ds;
      const double* gr = g.v.data() + r * n * ds;
      double* ar = ga.v.data() + r * n * ds;
      for (std::size_t k = 0; k < ds; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += gr[i * ds + k] * yr[i * ds + k];
        for (std::size_t i = 0; i < n; ++i)
          ar[i * ds + k] += yr[i * ds + k] * (gr[i * ds + k] - dot);
      }
    }
  };
  return t.push(std::move(y), "softmax", std::move(nn));
}

// D[p,q] = |A_p - B_q|^2 via the inner-product expansion, clamped at zero
inline Var pairwise_sqdist(const Var& av, const Var& bv) {
  Tape& t = same_tape(av, bv);
  const Tensor& a = t.val(av);
  const Tensor& b = t.val(bv);
  std::size_t P = a.rows(), l = a.cols(), Q = b.rows();
  if (b.cols() != l) throw ShapeError("pairwise_sqdist: feature width mismatch");
  Tensor d({P, Q});
  std::vector<double> an(P), bn(Q);
  for (std::size_t p = 0; p < P; ++p) {
    double s = 0.0;
    const double* ap = a.v.data() + p * l;
    for (std::size_t k = 0; k < l; ++k) s += ap[k] * ap[k];
    an[p] = s;
  }
  for (std::size_t q = 0; q < Q; ++q) {
    double s = 0.0;
    const double* bq = b.v.data() + q * l;
    for (std::size_t k = 0; k < l; ++k) s += bq[k] * bq[k];
    bn[q] = s;
  }
  mm_abt(d.v.data(), a.v.data(), b.v.data(), P, l, Q);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t q = 0; q < Q; ++q) {
      double v = an[p] + bn[q] - 2.0 * d.v[p * Q + q];
      d.v[p * Q + q] = v > 0.0 ? v : 0.0;
    }
  Tape::Node n;
  n.parent = {av.id, bv.id, -1};
  n.np = 2;
  n.back = [P, Q, l](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tape::Node& nd = tp.nodes_[self];
    const Tensor& a = tp.vals_[nd.parent[0]];
    const Tensor& b = tp.vals_[nd.parent[1]];
    Tensor& ga = tp.grad_ref(nd.parent[0]);
    Tensor& gb = tp.grad_ref(nd.parent[1]);
    // dA = 2 rowsum(g) . A - 2 g B ; dB = 2 colsum(g) . B - 2 g^T A
    std::vector<double> rs(P, 0.0), cs(Q, 0.0);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t q = 0; q < Q; ++q) {
        double gv = g.v[p * Q + q];
        rs[p] += gv;
        cs[q] += gv;
      }
    Tensor gB({P, l});
    mm_ab(gB.v.data(), g.v.data(), b.v.data(), P, Q, l);
    Tensor gTA({Q, l});
    mm_atb(gTA.v.data(), g.v.data(), a.v.data(), P, Q, l);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k < l; ++k)
        ga.v[p * l + k] += 2.0 * (rs[p] * a.v[p * l + k] - gB.v[p * l + k]);
    for (std::size_t q = 0; q < Q; ++q)
      for (std::size_t k = 0; k < l; ++k)
        gb.v[q * l + k] += 2.0 * (cs[q] * b.v[q * l + k] - gTA.v[q * l + k]);
  };
  return t.push(std::move(d), "pairwise_sqdist", std::move(n));
}

// K = exp(log_gamma - exp(log_beta) * D); log-parameterized so gamma, beta > 0
inline Var rbf_from_sqdist(const Var& dv, const Var& lgv, const Var& lbv) {
  Tape& t = *dv.tape;
  const Tensor& d = t.val(dv);
  double lg = t.item(lgv), lb = t.item(lbv);
  double beta = std::exp(lb);
  Tensor k(d.shape);
  for (std::size_t i = 0; i < d.size(); ++i) k.v[i] = std::exp(lg - beta * d.v[i]);
  Tape::Node n;
  n.parent = {dv.id, lgv.id, lbv.id};
  n.np = 3;
  n.back = [beta](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tensor& k = tp.vals_[self];
    const Tape::Node& nd = tp.nodes_[self];
    const Tensor& d = tp.vals_[nd.parent[0]];
    Tensor& gd = tp.grad_ref(nd.parent[0]);
    Tensor& glg = tp.grad_ref(nd.parent[1]);
    Tensor& glb = tp.grad_ref(nd.parent[2]);
    double slg = 0.0, slb = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double gk = g.v[i] * k.v[i];
      gd.v[i] += -beta * gk;
      slg += gk;
      slb += -beta * d.v[i] * gk;
    }
    glg.v[0] += slg;
    glb.v[0] += slb;
  };
  return t.push(std::move(k), "rbf", std::move(n));
}

// out[p] = sum_q K[p,q] w[q] with w constant (quadrature weights)
inline Var weighted_rowsum(const Var& kv, const Tensor& w) {
  Tape& t = *kv.tape;
  const Tensor& k = t.val(kv);
  std::size_t P = k.rows(), Q = k.cols();
  if (w.size() != Q) throw ShapeError("weighted_rowsum: weight count mismatch");
  Tensor out({P});
  for (std::size_t p = 0; p < P; ++p) {
    double s = 0.0;
    const double* kp = k.v.data() + p * Q;
    for (std::size_t q = 0; q < Q; ++q) s += kp[q] * w.v[q];
    out.v[p] = s;
  }
  Tape::Node n;
  n.parent = {kv.id, -1, -1};
  n.np = 1;
  n.back = [w, P, Q](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    Tensor& gk = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t p = 0; p < P; ++p) {
      double gp = g.v[p];
      double* row = gk.v.data() + p * Q;
      for (std::size_t q = 0; q < Q; ++q) row[q] += gp * w.v[q];
    }
  };
  return t.push(std::move(out), "weighted_rowsum", std::move(n));
}

// y = 1/sqrt(max(x, floor)); zero derivative where the floor is active
inline Var rsqrt_floored(const Var& a, double floor) {
  Tape& t = *a.tape;
  const Tensor& x = t.val(a);
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = 1.0 / std::sqrt(std::max(x.v[i], floor));
  Tape::Node n;
  n.parent = {a.id, -1, -1};
  n.np = 1;
  n.back = [floor](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tensor& y = tp.vals_[self];
    const Tensor& x = tp.vals_[tp.nodes_[self].parent[0]];
    Tensor& ga = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x.v[i] > floor) ga.v[i] += g.v[i] * (-0.5) * y.v[i] * y.v[i] * y.v[i];
    }
  };
  return t.push(std::move(y), "rsqrt_floored", std::move(n));
}

// out[p,q] = K[p,q] * r[p] * c[q] (kernel normalization by both denominators)
inline Var scale_rows_cols(const Var& kv, const Var& rv, const Var& cv) {
  Tape& t = *kv.tape;
  const Tensor& k = t.val(kv);
  const Tensor& r = t.val(rv);
  const Tensor& c = t.val(cv);
  std::size_t P = k.rows(), Q = k.cols();
  if (r.size() != P || c.size() != Q) throw ShapeError("scale_rows_cols: vector length mismatch");
  Tensor out(k.shape);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t q = 0; q < Q; ++q) out.v[p * Q + q] = k.v[p * Q + q] * r.v[p] * c.v[q];
  Tape::Node n;
  n.parent = {kv.id, rv.id, cv.id};
  n.np = 3;
  n.back = [P, Q](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tape::Node& nd = tp.nodes_[self];
    const Tensor& k = tp.vals_[nd.parent[0]];
    const Tensor& r = tp.vals_[nd.parent[1]];
    const Tensor& c = tp.vals_[nd.parent[2]];
    Tensor& gk = tp.grad_ref(nd.parent[0]);
    Tensor& gr = tp.grad_ref(nd.parent[1]);
    Tensor& gc = tp.grad_ref(nd.parent[2]);
    for (std::size_t p = 0; p < P; ++p) {
      double srow = 0.0;
      for (std::size_t q = 0; q < Q; ++q) {
        double gv = g.v[p * Q + q];
        gk.v[p * Q + q] += gv * r.v[p] * c.v[q];
        srow += gv * k.v[p * Q + q] * c.v[q];
        gc.v[q] += gv * k.v[p * Q + q] * r.v[p];
      }
      gr.v[p] += srow;
    }
  };
  return t.push(std::move(out), "scale_rows_cols", std::move(n));
}

// out[p,q] = K[p,q] * w[q] with w constant
inline Var scale_cols_const(const Var& kv, const Tensor& w) {
  Tape& t = *kv.tape;
  const Tensor& k = t.val(kv);
  std::size_t P = k.rows(), Q = k.cols();
  if (w.size() != Q) throw ShapeError("scale_cols_const: weight count mismatch");
  Tensor out(k.shape);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t q = 0; q < Q; ++q) out.v[p * Q + q] = k.v[p * Q + q] * w.v[q];
  Tape::Node n;
  n.parent = {kv.id, -1, -1};
  n.np = 1;
  n.back = [w, P, Q](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    Tensor& gk = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t q = 0; q < Q; ++q) gk.v[p * Q + q] += g.v[p * Q + q] * w.v[q];
  };
  return t.push(std::move(out), "scale_cols_const", std::move(n));
}

inline Var matmul(const Var& av, const Var& bv) {
  Tape& t = same_tape(av, bv);
  const Tensor& a = t.val(av);
  const Tensor& b = t.val(bv);
  std::size_t M = a.rows(), K = a.cols(), N = b.cols();
  if (b.rows() != K) throw ShapeError("matmul: inner dimension mismatch");
  Tensor c({M, N});
  mm_ab(c.v.data(), a.v.data(), b.v.data(), M, K, N);
  Tape::Node n;
  n.parent = {av.id, bv.id, -1};
  n.np = 2;
  n.back = [M, K, N](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tape::Node& nd = tp.nodes_[self];
    const Tensor& a = tp.vals_[nd.parent[0]];
    const Tensor& b = tp.vals_[nd.parent[1]];
    Tensor& ga = tp.grad_ref(nd.parent[0]);
    Tensor& gb = tp.grad_ref(nd.parent[1]);
    mm_abt(ga.v.data(), g.v.data(), b.v.data(), M, N, K);
    mm_atb(gb.v.data(), a.v.data(), g.v.data(), M, K, N);
  };
  return t.push(std::move(c), "matmul", std::move(n));
}

// single-row view of a matrix as a [1 x C] tensor
inline Var row(const Var& av, std::size_t r) {
  Tape& t = *av.tape;
  const Tensor& x = t.val(av);
  std::size_t C = x.cols();
  if (r >= x.rows()) throw ShapeError("row: index out of range");
  Tensor out({1, C});
  std::copy(x.v.begin() + r * C, x.v.begin() + (r + 1) * C, out.v.begin());
  Tape::Node n;
  n.parent = {av.id, -1, -1};
  n.np = 1;
  n.back = [r, C](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    Tensor& ga = tp.grad_ref(tp.nodes_[self].parent[0]);
    for (std::size_t j = 0; j < C; ++j) ga.v[r * C + j] += g.v[j];
  };
  return t.push(std::move(out), "row", std::move(n));
}

// out[b,p,k] = sum_i V[b, i*ds+k] * Phi[p, i*ds+k]
// Phi rows are per-query attention blocks, V rows are per-sample features.
inline Var attention_combine(const Var& phiv, const Var& vv, std::size_t n, std::size_t ds) {
  Tape& t = same_tape(phiv, vv);
  const Tensor& phi = t.val(phiv);
  const Tensor& v = t.val(vv);
  std::size_t P = phi.rows(), B = v.rows();
  if (phi.cols() != n * ds || v.cols() != n * ds)
    throw ShapeError("attention_combine: row width != n*d_s");
  Tensor out({B, P, ds});
  if (ds == 1) {
    mm_abt(out.v.data(), v.v.data(), phi.v.data(), B, n, P);
  } else {
    for (std::size_t k = 0; k < ds; ++k)
      for (std::size_t b = 0; b < B; ++b) {
        const double* vb = v.v.data() + b * n * ds;
        for (std::size_t p = 0; p < P; ++p) {
          const double* fp = phi.v.data() + p * n * ds;
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += vb[i * ds + k] * fp[i * ds + k];
          out.v[(b * P + p) * ds + k] = s;
        }
      }
  }
  Tape::Node nd;
  nd.parent = {phiv.id, vv.id, -1};
  nd.np = 2;
  nd.back = [P, B, n, ds](Tape& tp, int self) {
    const Tensor& g = tp.grads_[self];
    const Tape::Node& node = tp.nodes_[self];
    const Tensor& phi = tp.vals_[node.parent[0]];
    const Tensor& v = tp.vals_[node.parent[1]];
    Tensor& gphi = tp.grad_ref(node.parent[0]);
    Tensor& gv = tp.grad_ref(node.parent[1]);
    if (ds == 1) {
      mm_ab(gv.v.data(), g.v.data(), phi.v.data(), B, P, n);
      mm_atb(gphi.v.data(), g.v.data(), v.v.data(), B, P, n);
    } else {
      for (std::size_t k = 0; k < ds; ++k)
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t p = 0; p < P; ++p) {
            double gv_bp = g.v[(b * P + p) * ds + k];
            const double* fp = phi.v.data() + p * n * ds;
            const double* vb = v.v.data() + b * n * ds;
            double* gvb = gv.v.data() + b * n * ds;
            double* gfp = gphi.v.data() + p * n * ds;
            for (std::size_t i = 0; i < n; ++i) {
              gvb[i * ds + k] += gv_bp * fp[i * ds + k];
              gfp[i * ds + k] += gv_bp * vb[i * ds + k];
            }
          }
    }
  };
  return t.push(std::move(out), "attention_combine", std::move(nd));
}

}  // namespace ops
}  // namespace loca

#include <cmath>

#include "doctest.h"
#include "loca/tape.hpp"
#include "loca/rng.hpp"
#include "test_util.hpp"

using namespace loca;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.v) x = scale * rng.normal();
  return t;
}

// independent normal CDF oracle: erf by Taylor series in long double
long double phi_series(long double x) {
  long double z = x / std::sqrt(2.0L);
  long double term = z, sum = z;
  for (int n = 1; n < 200; ++n) {
    term *= -z * z / n;
    sum += term / (2 * n + 1);
  }
  long double erf = 2.0L / std::sqrt(3.14159265358979323846264338328L) * sum;
  return 0.5L * (1.0L + erf);
}

}  // namespace

TEST_SUITE_BEGIN("tape");

TEST_CASE("gelu matches independent cdf oracle and pinned value") {
  Tape t;
  Var x = t.leaf(Tensor({3}, {0.0, 1.0, -10.0}));
  Var y = ops::gelu(x);
  CHECK(t.val(y).v[0] == 0.0);
  double expect1 = static_cast<double>(1.0L * phi_series(1.0L));
  CHECK(std::abs(t.val(y).v[1] - expect1) < 1e-15);
  CHECK(std::abs(t.val(y).v[1] - 0.8413447460685429) < 1e-15);
  CHECK(std::abs(t.val(y).v[2]) <= 1e-10 * (1.0 + 10.0));
}

TEST_CASE("gelu gradient vs finite differences") {
  Rng rng(7);
  Tensor x0 = random_tensor(rng, {2, 3});
  auto eval = [&] {
    Tape t;
    return t.item(ops::sum_squares(ops::gelu(t.leaf(x0))));
  };
  Tape t;
  Var x = t.leaf(x0);
  Var loss = ops::sum_squares(ops::gelu(x));
  t.backward(loss);
  CHECK(testutil::max_grad_rel_err(eval, {&x0}, {&t.grad(x)}) < 1e-7);
}

TEST_CASE("softmax columns: uniform, ratios, shift invariance") {
  Tape t;
  Var z = t.leaf(Tensor({3, 1}, {0.0, 0.0, 0.0}));
  Var s = ops::softmax_features(z, 3, 1);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(t.val(s).v[i] - 1.0 / 3.0) < 1e-15);

  Var z2 = t.leaf(Tensor({3, 1}, {std::log(1.0), std::log(2.0), std::log(3.0)}));
  Var s2 = ops::softmax_features(z2, 3, 1);
  CHECK(std::abs(t.val(s2).v[0] - 1.0 / 6.0) < 1e-14);
  CHECK(std::abs(t.val(s2).v[1] - 2.0 / 6.0) < 1e-14);
  CHECK(std::abs(t.val(s2).v[2] - 3.0 / 6.0) < 1e-14);

  Rng rng(3);
  Tensor raw = random_tensor(rng, {4, 2});
  Tensor shifted = raw;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 4; ++i) shifted.v[i * 2 + k] += 1000.0;
  Var a = ops::softmax_features(t.leaf(raw), 4, 2);
  Var b = ops::softmax_features(t.leaf(shifted), 4, 2);
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(t.val(a).v[i] - t.val(b).v[i]) <= 1e-12);

  // every column lands on the simplex
  for (std::size_t k = 0; k < 2; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(t.val(a).v[i * 2 + k] >= 0.0);
      sum += t.val(a).v[i * 2 + k];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax rejects an empty feature axis") {
  Tape t;
  Var z = t.leaf(Tensor({1, 1}, {0.0}));
  CHECK_THROWS_AS(ops::softmax_features(z, 0, 1), ConfigError);
}

TEST_CASE("softmax gradient vs finite differences") {
  Rng rng(11);
  Tensor x0 = random_tensor(rng, {2, 6});
  Tensor target = random_tensor(rng, {2, 6});
  auto eval = [&] {
    Tape t;
    Var s = ops::softmax_features(t.leaf(x0), 3, 2);
    return t.item(ops::sum_squares(ops::sub_const(s, target)));
  };
  Tape t;
  Var x = t.leaf(x0);
  Var s = ops::softmax_features(x, 3, 2);
  Var loss = ops::sum_squares(ops::sub_const(s, target));
  t.backward(loss);
  CHECK(testutil::max_grad_rel_err(eval, {&x0}, {&t.grad(x)}) < 1e-7);
}

TEST_CASE("gradient of <x,x> is exactly 2x") {
  Tensor x0({5}, {1.5, -2.0, 0.0, 3.25, -0.5});
  Tape t;
  Var x = t.leaf(x0);
  Var loss = ops::sum_squares(x);
  t.backward(loss);
  const Tensor& g = t.grad(x);
  for (std::size_t i = 0; i < 5; ++i) CHECK(g.v[i] == 2.0 * x0.v[i]);
}

TEST_CASE("shared subexpressions accumulate gradient contributions") {
  Tensor x0({3}, {0.5, -1.0, 2.0});
  Tape t;
  Var x = t.leaf(x0);
  Var loss = ops::add(ops::sum(ops::mul(x, x)), ops::sum(x));
  t.backward(loss);
  for (std::size_t i = 0; i < 3; ++i) CHECK(t.grad(x).v[i] == doctest::Approx(2.0 * x0.v[i] + 1.0).epsilon(1e-15));
}

TEST_CASE("backward without a recorded loss is a contract error") {
  Tape t;
  CHECK_THROWS_AS(t.backward(Var{}), InvariantError);
}

TEST_CASE("gradients before backward is a contract error") {
  Tape t;
  Var x = t.leaf(Tensor({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(t.grad(x), InvariantError);
}

TEST_CASE("non-finite values are rejected at op boundaries") {
  Tape t;
  CHECK_THROWS_AS(t.leaf(Tensor({1}, {std::nan("")})), NumericError);
  Var big = t.leaf(Tensor({1}, {1e308}));
  CHECK_THROWS_AS(ops::scale(big, 1e10), NumericError);
}

TEST_CASE("linear gradient vs finite differences") {
  Rng rng(21);
  Tensor x0 = random_tensor(rng, {3, 4});
  Tensor w0 = random_tensor(rng, {4, 5});
  Tensor b0 = random_tensor(rng, {5});
  Tensor target = random_tensor(rng, {3, 5});
  auto eval = [&] {
    Tape t;
    Var y = ops::linear(t.leaf(x0), t.leaf(w0), t.leaf(b0));
    return t.item(ops::sum_squares(ops::sub_const(y, target)));
  };
  Tape t;
  Var x = t.leaf(x0), w = t.leaf(w0), b = t.leaf(b0);
  Var loss = ops::sum_squares(ops::sub_const(ops::linear(x, w, b), target));
  t.backward(loss);
  CHECK(testutil::max_grad_rel_err(eval, {&x0, &w0, &b0},
                                   {&t.grad(x), &t.grad(w), &t.grad(b)}) < 1e-7);
}

TEST_CASE("pairwise_sqdist values and gradient") {
  Tensor a0({2, 2}, {0.0, 0.0, 1.0, 1.0});
  Tensor b0({2, 2}, {0.0, 1.0, 1.0, 1.0});
  Tape t;
  Var d = ops::pairwise_sqdist(t.leaf(a0), t.leaf(b0));
  CHECK(t.val(d).v[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(t.val(d).v[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(t.val(d).v[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(t.val(d).v[3]) < 1e-14);

  Rng rng(31);
  Tensor A = random_tensor(rng, {3, 2});
  Tensor B = random_tensor(rng, {4, 2});
  Tensor target = random_tensor(rng, {3, 4});
  auto eval = [&] {
    Tape tt;
    Var dd = ops::pairwise_sqdist(tt.leaf(A), tt.leaf(B));
    return tt.item(ops::sum_squares(ops::sub_const(dd, target)));
  };
  Tape tt;
  Var av = tt.leaf(A), bv = tt.leaf(B);
  Var loss = ops::sum_squares(ops::sub_const(ops::pairwise_sqdist(av, bv), target));
  tt.backward(loss);
  CHECK(testutil::max_grad_rel_err(eval, {&A, &B}, {&tt.grad(av), &tt.grad(bv)}) < 1e-6);
}

TEST_CASE("rbf gradient incl. log-parameters") {
  Rng rng(41);
  Tensor D = random_tensor(rng, {3, 3});
  for (double& x : D.v) x = std::abs(x);
  Tensor lg({1}, {0.2});
  Tensor lb({1}, {-0.3});
  Tensor target = random_tensor(rng, {3, 3});
  auto eval = [&] {
    Tape t;
    Var k = ops::rbf_from_sqdist(t.leaf(D), t.leaf(lg), t.leaf(lb));
    return t.item(ops::sum_squares(ops::sub_const(k, target)));
  };
  Tape t;
  Var dv = t.leaf(D), lgv = t.leaf(lg), lbv = t.leaf(lb);
  Var loss = ops::sum_squares(ops::sub_const(ops::rbf_from_sqdist(dv, lgv, lbv), target));
  t.backward(loss);
  CHECK(testutil::max_grad_rel_err(eval, {&D, &lg, &lb},
                                   {&t.grad(dv), &t.grad(lgv), &t.grad(lbv)}) < 1e-6);
}

TEST_CASE("rsqrt_floored: value, gradient, dead zone") {
  Tensor x0({3}, {4.0, 1.0, 1e-18});
  Tape t;
  Var x = t.leaf(x0);
  Var y = ops::rsqrt_floored(x, 1e-12);
  CHECK(t.val(y).v[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t.val(y).v[2] == doctest::Approx(1e6).epsilon(1e-12));
  Var loss = ops::sum(y);
  t.backward(loss);
  CHECK(t.grad(x).v[0] == doctest::Approx(-0.0625).epsilon(1e-12));
  CHECK(t.grad(x).v[2] == 0.0);  // floored entry contributes no gradient

  Rng rng(51);
  Tensor z0 = random_tensor(rng, {4});
  for (double& v : z0.v) v = 0.5 + std::abs(v);
  auto eval = [&] {
    Tape tt;
    return tt.item(ops::sum_squares(ops::rsqrt_floored(tt.leaf(z0), 1e-12)));
  };
  Tape tt;
  Var z = tt.leaf(z0);
  tt.backward(ops::sum_squares(ops::rsqrt_floored(z, 1e-12)));
  CHECK(testutil::max_grad_rel_err(eval, {&z0}, {&tt.grad(z)}) < 1e-7);
}

TEST_CASE("remaining structural ops vs finite differences") {
  Rng rng(61);
  Tensor K = random_tensor(rng, {3, 4});
  Tensor r = random_tensor(rng, {3});
  Tensor c = random_tensor(rng, {4});
  Tensor w({4}, {0.1, 0.2, 0.3, 0.4});
  Tensor B = random_tensor(rng, {4, 2});
  Tensor target = random_tensor(rng, {3, 2});
  auto eval = [&] {
    Tape t;
    Var kk = ops::scale_rows_cols(t.leaf(K), t.leaf(r), t.leaf(c));
    Var kw = ops::scale_cols_const(kk, w);
    Var m = ops::matmul(kw, t.leaf(B));
    return t.item(ops::sum_squares(ops::sub_const(m, target)));
  };
  Tape t;
  Var kv = t.leaf(K), rv = t.leaf(r), cv = t.leaf(c), bv = t.leaf(B);
  Var kk = ops::scale_rows_cols(kv, rv, cv);
  Var kw = ops::scale_cols_const(kk, w);
  Var loss = ops::sum_squares(ops::sub_const(ops::matmul(kw, bv), target));
  t.backward(loss);
  CHECK(testutil::max_grad_rel_err(eval, {&K, &r, &c, &B},
                                   {&t.grad(kv), &t.grad(rv), &t.grad(cv), &t.grad(bv)}) < 1e-6);
}

TEST_CASE("weighted_rowsum value and gradient") {
  Tensor K({2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  Tensor w({3}, {0.5, 0.25, 0.25});
  Tape t;
  Var kv = t.leaf(K);
  Var den = ops::weighted_rowsum(kv, w);
  CHECK(t.val(den).v[0] == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(t.val(den).v[1] == doctest::Approx(4.75).epsilon(1e-15));
  t.backward(ops::sum_squares(den));
  CHECK(t.grad(kv).v[0] == doctest::Approx(2 * 1.75 * 0.5).epsilon(1e-14));

  auto eval = [&] {
    Tape tt;
    return tt.item(ops::sum_squares(ops::weighted_rowsum(tt.leaf(K), w)));
  };
  Tape tt;
  Var kv2 = tt.leaf(K);
  tt.backward(ops::sum_squares(ops::weighted_rowsum(kv2, w)));
  CHECK(testutil::max_grad_rel_err(eval, {&K}, {&tt.grad(kv2)}) < 1e-7);
}

TEST_CASE("attention_combine values and gradient, one and many channels") {
  // d_s = 1: plain weighted sum of features per query
  Tensor phi({2, 3}, {0.2, 0.3, 0.5, 1.0, 0.0, 0.0});
  Tensor v({1, 3}, {1.0, 2.0, 3.0});
  Tape t;
  Var out = ops::attention_combine(t.leaf(phi), t.leaf(v), 3, 1);
  CHECK(t.val(out).shape == std::vector<std::size_t>{1, 2, 1});
  CHECK(t.val(out).v[0] == doctest::Approx(0.2 + 0.6 + 1.5).epsilon(1e-14));
  CHECK(t.val(out).v[1] == doctest::Approx(1.0).epsilon(1e-14));

  for (std::size_t ds : {std::size_t(1), std::size_t(2)}) {
    Rng rng(70 + ds);
    Tensor P = random_tensor(rng, {3, 4 * ds});
    Tensor V = random_tensor(rng, {2, 4 * ds});
    Tensor target = random_tensor(rng, {2, 3, ds});
    auto eval = [&] {
      Tape tt;
      Var o = ops::attention_combine(tt.leaf(P), tt.leaf(V), 4, ds);
      return tt.item(ops::sum_squares(ops::sub_const(o, target)));
    };
    Tape tt;
    Var pv = tt.leaf(P), vv = tt.leaf(V);
    Var loss = ops::sum_squares(ops::sub_const(ops::attention_combine(pv, vv, 4, ds), target));
    tt.backward(loss);
    CHECK(testutil::max_grad_rel_err(eval, {&P, &V}, {&tt.grad(pv), &tt.grad(vv)}) < 1e-6);
  }
}

TEST_CASE("seed derivation is deterministic and stream-separating") {
  CHECK(derive_seed(42, 1, 2) == derive_seed(42, 1, 2));
  CHECK(derive_seed(42, 1, 2) != derive_seed(42, 1, 3));
  CHECK(derive_seed(42, 1, 2) != derive_seed(42, 2, 2));
  CHECK(derive_seed(42, 1, 2) != derive_seed(43, 1, 2));
  Rng a(derive_seed(9, 0, 0)), b(derive_seed(9, 0, 0));
  for (int i = 0; i < 100; ++i) CHECK(a.raw() == b.raw());
}

TEST_SUITE_END();

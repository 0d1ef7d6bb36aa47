#include <doctest.h>

#include <cmath>

#include "cmsa/autograd.hpp"
#include "cmsa/oracles.hpp"
#include "cmsa/rng.hpp"

using namespace cmsa;

namespace {

Tensor randn(Rng& rng, std::vector<int> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, 1.0);
  return t;
}

// finite-difference check of a scalar-valued graph w.r.t. one leaf; the
// output is contracted with a fixed random weighting so that ops whose plain
// sum is constant (softmax rows, layer norm) still expose their jacobian
double grad_rel_err(const std::function<ag::Var(const ag::Var&)>& f, const Tensor& x0) {
  ag::Var x = ag::Var::param(x0);
  ag::Var y0 = f(x);
  Rng wrng(12345);
  Tensor w = randn(wrng, y0.value().shape);
  ag::Var y = ag::sum_all(ag::mul_const(y0, w));
  ag::backward(y);
  Tensor analytic = x.grad();
  auto scalar = [&](const std::vector<double>& p) {
    ag::NoGradGuard ng;
    ag::Var xx = ag::Var::constant(x0);
    xx.value().data = p;
    return ag::sum_all(ag::mul_const(f(xx), w)).value().item();
  };
  std::vector<double> fd = oracle::finite_diff_grad(scalar, x0.data, 1e-6);
  double num = 0.0, den = 1e-8;
  for (long i = 0; i < analytic.numel(); ++i) {
    num = std::max(num, std::abs(analytic.data[i] - fd[i]));
    den = std::max(den, std::abs(fd[i]));
  }
  return num / den;
}

}  // namespace

TEST_CASE("rng is deterministic and uniform stays in [0,1)") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng c(43);
  CHECK(a.uniform() != c.uniform());
}

TEST_CASE("elementwise op values") {
  Tensor x = Tensor::zeros({3});
  x.data = {-1.0, 0.0, 1.0};
  ag::Var v = ag::Var::constant(x);
  CHECK(ag::gelu(v).value().data[1] == 0.0);
  CHECK(ag::gelu(v).value().data[2] == doctest::Approx(0.8413447461).epsilon(1e-9));
  CHECK(ag::sigmoid(v).value().data[1] == doctest::Approx(0.5));

  // stable bce matches the definition at moderate logits
  Tensor t = Tensor::zeros({3});
  t.data = {1.0, 0.0, 1.0};
  Tensor bce = ag::bce_logits(v, t).value();
  for (int i = 0; i < 3; ++i) {
    double p = 1.0 / (1.0 + std::exp(-x.data[i]));
    double want = -(t.data[i] * std::log(p) + (1 - t.data[i]) * std::log(1 - p));
    CHECK(bce.data[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(7);
  ag::Var s = ag::softmax_rows(ag::Var::constant(randn(rng, {5, 9})));
  for (int r = 0; r < 5; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 9; ++c) sum += s.value().at2(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("token layout round trip") {
  Rng rng(8);
  Tensor x = randn(rng, {4, 3, 5});
  ag::Var tok = ag::tokens_from_chw(ag::Var::constant(x));
  CHECK(tok.value().shape == std::vector<int>{15, 4});
  ag::Var back = ag::chw_from_tokens(tok, 3, 5);
  for (long i = 0; i < x.numel(); ++i) CHECK(back.value().data[i] == x.data[i]);
}

TEST_CASE("gradients match finite differences per op") {
  Rng rng(9);
  CHECK(grad_rel_err([](const ag::Var& v) { return ag::gelu(v); }, randn(rng, {6})) < 1e-5);
  CHECK(grad_rel_err([](const ag::Var& v) { return ag::sigmoid(v); }, randn(rng, {6})) < 1e-5);
  CHECK(grad_rel_err([](const ag::Var& v) { return ag::softmax_rows(v); }, randn(rng, {3, 4})) < 1e-5);

  Tensor w = randn(rng, {4, 5});
  CHECK(grad_rel_err([&](const ag::Var& v) { return ag::matmul(v, ag::Var::constant(w)); },
                     randn(rng, {3, 4})) < 1e-5);

  Tensor cw = randn(rng, {2, 3, 3, 3});
  Tensor cb = randn(rng, {2});
  CHECK(grad_rel_err(
            [&](const ag::Var& v) {
              return ag::conv2d(v, ag::Var::constant(cw), ag::Var::constant(cb), 1, 1);
            },
            randn(rng, {3, 5, 5})) < 1e-5);

  CHECK(grad_rel_err([](const ag::Var& v) { return ag::bilinear_resize(v, 7, 3); }, randn(rng, {2, 4, 5})) <
        1e-5);

  Tensor gm = Tensor::full({3}, 1.3), bt = Tensor::full({3}, -0.2);
  CHECK(grad_rel_err(
            [&](const ag::Var& v) {
              return ag::layernorm_chw(v, ag::Var::constant(gm), ag::Var::constant(bt));
            },
            randn(rng, {3, 4, 4})) < 1e-4);
}

TEST_CASE("no-grad mode records no graph") {
  Tensor x = Tensor::full({2}, 1.5);
  ag::NoGradGuard ng;
  ag::Var v = ag::Var::param(x);
  ag::Var y = ag::mul(v, v);
  CHECK_FALSE(y.requires_grad());
}

#pragma once

#include <string>
#include <vector>

#include "cmsa/autograd.hpp"
#include "cmsa/rng.hpp"

namespace cmsa {

// Named parameter registry used by the optimizer, the checkpoint container
// and the gradient checks. Order of registration is the container order.
struct ParamStore {
  std::vector<std::pair<std::string, ag::Var>> items;

  void add(const std::string& name, const ag::Var& v) { items.emplace_back(name, v); }

  ag::Var find(const std::string& name) const {
    for (const auto& [n, v] : items)
      if (n == name) return v;
    throw std::out_of_range("ParamStore: no parameter " + name);
  }

  long total_count() const {
    long n = 0;
    for (const auto& [name, v] : items) n += v.value().numel();
    return n;
  }
};

// Fan-in-scaled initializers (He-style for convs/linears).
inline ag::Var init_conv(Rng& rng, int cout, int cin, int k) {
  Tensor w({cout, cin, k, k});
  double std = std::sqrt(2.0 / (cin * k * k));
  for (auto& v : w.data) v = rng.normal(0.0, std);
  return ag::Var::param(std::move(w));
}

inline ag::Var init_linear_w(Rng& rng, int in, int out) {
  Tensor w({in, out});
  double std = std::sqrt(2.0 / in);
  for (auto& v : w.data) v = rng.normal(0.0, std);
  return ag::Var::param(std::move(w));
}

inline ag::Var init_zeros(std::vector<int> shape) { return ag::Var::param(Tensor::zeros(std::move(shape))); }
inline ag::Var init_ones(std::vector<int> shape) { return ag::Var::param(Tensor::full(std::move(shape), 1.0)); }

struct Linear {
  ag::Var w;  // [in, out]
  ag::Var b;  // [out]
  ag::Var operator()(const ag::Var& x) const {  // x: [n, in]
    return ag::add_bias_rows(ag::matmul(x, w), b);
  }
  static Linear init(Rng& rng, int in, int out) {
    return Linear{init_linear_w(rng, in, out), init_zeros({out})};
  }
};

struct ConvLayer {
  ag::Var w;  // [cout, cin, k, k]
  ag::Var b;  // [cout]
  int stride = 1;
  int pad = 0;
  ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, w, b, stride, pad); }
  static ConvLayer init(Rng& rng, int cout, int cin, int k, int stride, int pad) {
    return ConvLayer{init_conv(rng, cout, cin, k), init_zeros({cout}), stride, pad};
  }
};

struct NormLayer {
  ag::Var gamma;
  ag::Var beta;
  ag::Var operator()(const ag::Var& x) const { return ag::layernorm_chw(x, gamma, beta); }
  static NormLayer init(int channels) { return NormLayer{init_ones({channels}), init_zeros({channels})}; }
};

}  // namespace cmsa

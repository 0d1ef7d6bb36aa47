#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmsa {

// Dense row-major double tensor. Rank 0 (shape {}) holds a single scalar.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::size_t>(numel_of(shape)) != data.size())
      throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t;
    t.data.assign(1, v);
    return t;
  }

  long numel() const { return static_cast<long>(data.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  double item() const {
    if (data.size() != 1) throw std::logic_error("Tensor::item on non-scalar");
    return data[0];
  }

  // 3-d [C,H,W] access
  double& at3(int c, int h, int w) { return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w]; }
  double at3(int c, int h, int w) const { return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w]; }
  // 2-d [H,W] access
  double& at2(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at2(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace cmsa

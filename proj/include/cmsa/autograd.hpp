#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cmsa/tensor.hpp"

namespace cmsa::ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_alloc = false;
  std::vector<NodePtr> parents;
  // Propagates this node's grad into its parents' grads.
  std::function<void(Node&)> backprop;

  Tensor& ensure_grad() {
    if (!grad_alloc) {
      grad = Tensor::zeros(value.shape);
      grad_alloc = true;
    }
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  static Var param(Tensor t);     // leaf with requires_grad
  static Var constant(Tensor t);  // leaf without grad

  const Tensor& value() const { return n_->value; }
  Tensor& value() { return n_->value; }
  const Tensor& grad() const { return n_->grad; }
  Tensor& grad() { return n_->ensure_grad(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  NodePtr node() const { return n_; }
  bool defined() const { return static_cast<bool>(n_); }

 private:
  NodePtr n_;
};

// When active, ops record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// Zeroes grads in the reachable subgraph, seeds loss grad with 1, runs
// reverse-topological backprop. Loss must be scalar (numel 1).
void backward(const Var& loss);

// ---- elementwise / scalar ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var scalar_sub(double s, const Var& a);  // s - a
Var mul_const(const Var& a, const Tensor& c);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
// Per-element binary cross-entropy on logits against a constant target.
Var bce_logits(const Var& logits, const Tensor& target);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);             // [n,k]x[k,m]
Var add_bias_rows(const Var& x, const Var& b);      // [n,m] + [m] per row
Var softmax_rows(const Var& a);                     // [n,m], rows sum to 1
Var slice_cols(const Var& a, int c0, int c1);       // [n,m] -> [n,c1-c0]
Var concat_cols(const std::vector<Var>& xs);        // along dim 1 of 2-d
Var concat0(const std::vector<Var>& xs);            // along dim 0, equal trailing dims

// ---- shape ----
Var tokens_from_chw(const Var& x);                  // [C,H,W] -> [H*W,C]
Var chw_from_tokens(const Var& x, int h, int w);    // [H*W,C] -> [C,H,W]
Var reshape(const Var& x, std::vector<int> shape);  // same numel

// ---- spatial ----
// Zero-padded 2-d convolution: x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout].
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// Bilinear interpolation, half-pixel centers (align_corners=false).
Var bilinear_resize(const Var& x, int out_h, int out_w);
// Layer normalization over the channel axis at each spatial position.
Var layernorm_chw(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// ---- reductions ----
Var sum_all(const Var& a);   // -> rank-0
Var mean_all(const Var& a);  // -> rank-0

}  // namespace cmsa::ag

#include "cmsa/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace cmsa::ag {

namespace {

thread_local int g_no_grad_depth = 0;

NodePtr make_node(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_no_grad_depth == 0) {
    bool need = false;
    for (const auto& p : parents)
      if (p && p->requires_grad) need = true;
    if (need) {
      n->requires_grad = true;
      n->parents = std::move(parents);
      n->backprop = std::move(backprop);
    }
  }
  return n;
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Var Var::param(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = true;
  return Var(n);
}

Var Var::constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return Var(n);
}

void backward(const Var& loss) {
  if (loss.value().numel() != 1) throw std::logic_error("backward: loss must be scalar");
  // Iterative DFS topological order over grad-requiring subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* root = loss.node().get();
  if (!root->requires_grad) return;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    auto& g = n->ensure_grad();
    std::fill(g.data.begin(), g.data.end(), 0.0);
  }
  root->ensure_grad().data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ---------- elementwise ----------

Var add(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (long i = 0; i < out.numel(); ++i) out.data[i] += b.value().data[i];
  return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      if (!self.parents[k]->requires_grad) continue;
      auto& g = self.parents[k]->ensure_grad();
      for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i];
    }
  }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (long i = 0; i < out.numel(); ++i) out.data[i] -= b.value().data[i];
  return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (long i = 0; i < self.grad.numel(); ++i) g.data[i] -= self.grad.data[i];
    }
  }));
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (long i = 0; i < out.numel(); ++i) out.data[i] *= b.value().data[i];
  return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i] * bv.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i] * av.data[i];
    }
  }));
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "div");
  Tensor out = a.value();
  for (long i = 0; i < out.numel(); ++i) out.data[i] /= b.value().data[i];
  return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i] / bv.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (long i = 0; i < self.grad.numel(); ++i)
        g.data[i] -= self.grad.data[i] * av.data[i] / (bv.data[i] * bv.data[i]);
    }
  }));
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data) v += s;
  return Var(make_node(std::move(out), {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i];
  }));
}

Var mul_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data) v *= s;
  return Var(make_node(std::move(out), {a.node()}, [s](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += s * self.grad.data[i];
  }));
}

Var scalar_sub(double s, const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data) v = s - v;
  return Var(make_node(std::move(out), {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < self.grad.numel(); ++i) g.data[i] -= self.grad.data[i];
  }));
}

Var mul_const(const Var& a, const Tensor& c) {
  check_same_shape(a.value(), c, "mul_const");
  Tensor out = a.value();
  for (long i = 0; i < out.numel(); ++i) out.data[i] *= c.data[i];
  Tensor cc = c;
  return Var(make_node(std::move(out), {a.node()}, [cc](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i] * cc.data[i];
  }));
}

Var gelu(const Var& a) {
  static const double inv_sqrt2 = 0.7071067811865475244;
  static const double inv_sqrt2pi = 0.3989422804014326779;
  Tensor out = a.value();
  for (auto& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  return Var(make_node(std::move(out), {a.node()}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    auto& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < self.grad.numel(); ++i) {
      double xi = x.data[i];
      double cdf = 0.5 * (1.0 + std::erf(xi * inv_sqrt2));
      double pdf = inv_sqrt2pi * std::exp(-0.5 * xi * xi);
      g.data[i] += self.grad.data[i] * (cdf + xi * pdf);
    }
  }));
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return Var(make_node(std::move(out), {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < self.grad.numel(); ++i) {
      double y = self.value.data[i];
      g.data[i] += self.grad.data[i] * y * (1.0 - y);
    }
  }));
}

Var bce_logits(const Var& logits, const Tensor& target) {
  check_same_shape(logits.value(), target, "bce_logits");
  Tensor out = logits.value();
  for (long i = 0; i < out.numel(); ++i) {
    double x = out.data[i];
    double t = target.data[i];
    // max(x,0) - x*t + log(1+exp(-|x|)) : stable BCE-with-logits
    out.data[i] = std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor tc = target;
  return Var(make_node(std::move(out), {logits.node()}, [tc](Node& self) {
    const Tensor& x = self.parents[0]->value;
    auto& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < self.grad.numel(); ++i) {
      double s = 1.0 / (1.0 + std::exp(-x.data[i]));
      g.data[i] += self.grad.data[i] * (s - tc.data[i]);
    }
  }));
}

// ---------- linear algebra ----------

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + A.shape_str() + " x " + B.shape_str());
  int n = A.dim(0), k = A.dim(1), m = B.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    const double* ai = &A.data[static_cast<std::size_t>(i) * k];
    double* oi = &out.data[static_cast<std::size_t>(i) * m];
    for (int p = 0; p < k; ++p) {
      double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = &B.data[static_cast<std::size_t>(p) * m];
      for (int j = 0; j < m; ++j) oi[j] += av * bp[j];
    }
  }
  return Var(make_node(std::move(out), {a.node(), b.node()}, [n, k, m](Node& self) {
    const Tensor& A = self.parents[0]->value;
    const Tensor& B = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      auto& gA = self.parents[0]->ensure_grad();  // dA = dC * B^T
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
          double s = 0.0;
          const double* gi = &self.grad.data[static_cast<std::size_t>(i) * m];
          const double* bp = &B.data[static_cast<std::size_t>(p) * m];
          for (int j = 0; j < m; ++j) s += gi[j] * bp[j];
          gA.data[static_cast<std::size_t>(i) * k + p] += s;
        }
    }
    if (self.parents[1]->requires_grad) {
      auto& gB = self.parents[1]->ensure_grad();  // dB = A^T * dC
      for (int i = 0; i < n; ++i) {
        const double* ai = &A.data[static_cast<std::size_t>(i) * k];
        const double* gi = &self.grad.data[static_cast<std::size_t>(i) * m];
        for (int p = 0; p < k; ++p) {
          double av = ai[p];
          if (av == 0.0) continue;
          double* gbp = &gB.data[static_cast<std::size_t>(p) * m];
          for (int j = 0; j < m; ++j) gbp[j] += av * gi[j];
        }
      }
    }
  }));
}

Var add_bias_rows(const Var& x, const Var& b) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || b.value().rank() != 1 || b.value().dim(0) != X.dim(1))
    throw std::invalid_argument("add_bias_rows: bad shapes");
  int n = X.dim(0), m = X.dim(1);
  Tensor out = X;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out.data[static_cast<std::size_t>(i) * m + j] += b.value().data[j];
  return Var(make_node(std::move(out), {x.node(), b.node()}, [n, m](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) g.data[j] += self.grad.data[static_cast<std::size_t>(i) * m + j];
    }
  }));
}

Var softmax_rows(const Var& a) {
  const Tensor& A = a.value();
  if (A.rank() != 2) throw std::invalid_argument("softmax_rows: expects 2-d");
  int n = A.dim(0), m = A.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    const double* xi = &A.data[static_cast<std::size_t>(i) * m];
    double* yi = &out.data[static_cast<std::size_t>(i) * m];
    double mx = xi[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, xi[j]);
    double z = 0.0;
    for (int j = 0; j < m; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      z += yi[j];
    }
    for (int j = 0; j < m; ++j) yi[j] /= z;
  }
  return Var(make_node(std::move(out), {a.node()}, [n, m](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < n; ++i) {
      const double* yi = &self.value.data[static_cast<std::size_t>(i) * m];
      const double* gi = &self.grad.data[static_cast<std::size_t>(i) * m];
      double dot = 0.0;
      for (int j = 0; j < m; ++j) dot += yi[j] * gi[j];
      double* go = &g.data[static_cast<std::size_t>(i) * m];
      for (int j = 0; j < m; ++j) go[j] += yi[j] * (gi[j] - dot);
    }
  }));
}

Var slice_cols(const Var& a, int c0, int c1) {
  const Tensor& A = a.value();
  if (A.rank() != 2 || c0 < 0 || c1 > A.dim(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  int n = A.dim(0), m = A.dim(1), w = c1 - c0;
  Tensor out({n, w});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < w; ++j)
      out.data[static_cast<std::size_t>(i) * w + j] = A.data[static_cast<std::size_t>(i) * m + c0 + j];
  return Var(make_node(std::move(out), {a.node()}, [n, m, w, c0](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j)
        g.data[static_cast<std::size_t>(i) * m + c0 + j] += self.grad.data[static_cast<std::size_t>(i) * w + j];
  }));
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty");
  int n = xs[0].value().dim(0);
  int m = 0;
  std::vector<NodePtr> parents;
  std::vector<int> widths;
  for (const auto& x : xs) {
    if (x.value().rank() != 2 || x.value().dim(0) != n) throw std::invalid_argument("concat_cols: shape mismatch");
    widths.push_back(x.value().dim(1));
    m += x.value().dim(1);
    parents.push_back(x.node());
  }
  Tensor out({n, m});
  int off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Tensor& X = xs[k].value();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < widths[k]; ++j)
        out.data[static_cast<std::size_t>(i) * m + off + j] = X.data[static_cast<std::size_t>(i) * widths[k] + j];
    off += widths[k];
  }
  return Var(make_node(std::move(out), std::move(parents), [n, m, widths](Node& self) {
    int off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      int w = widths[k];
      if (self.parents[k]->requires_grad) {
        auto& g = self.parents[k]->ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < w; ++j)
            g.data[static_cast<std::size_t>(i) * w + j] += self.grad.data[static_cast<std::size_t>(i) * m + off + j];
      }
      off += w;
    }
  }));
}

Var concat0(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat0: empty");
  std::vector<int> trailing(xs[0].value().shape.begin() + 1, xs[0].value().shape.end());
  int total0 = 0;
  std::vector<NodePtr> parents;
  std::vector<long> sizes;
  for (const auto& x : xs) {
    std::vector<int> tr(x.value().shape.begin() + 1, x.value().shape.end());
    if (tr != trailing) throw std::invalid_argument("concat0: trailing dims mismatch");
    total0 += x.value().dim(0);
    sizes.push_back(x.value().numel());
    parents.push_back(x.node());
  }
  std::vector<int> oshape = {total0};
  oshape.insert(oshape.end(), trailing.begin(), trailing.end());
  Tensor out(oshape);
  long off = 0;
  for (const auto& x : xs) {
    std::copy(x.value().data.begin(), x.value().data.end(), out.data.begin() + off);
    off += x.value().numel();
  }
  return Var(make_node(std::move(out), std::move(parents), [sizes](Node& self) {
    long off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      if (self.parents[k]->requires_grad) {
        auto& g = self.parents[k]->ensure_grad();
        for (long i = 0; i < sizes[k]; ++i) g.data[i] += self.grad.data[off + i];
      }
      off += sizes[k];
    }
  }));
}

// ---------- shape ----------

Var tokens_from_chw(const Var& x) {
  const Tensor& X = x.value();
  if (X.rank() != 3) throw std::invalid_argument("tokens_from_chw: expects 3-d");
  int c = X.dim(0), h = X.dim(1), w = X.dim(2);
  Tensor out({h * w, c});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h * w; ++i)
      out.data[static_cast<std::size_t>(i) * c + ch] = X.data[static_cast<std::size_t>(ch) * h * w + i];
  return Var(make_node(std::move(out), {x.node()}, [c, h, w](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h * w; ++i)
        g.data[static_cast<std::size_t>(ch) * h * w + i] += self.grad.data[static_cast<std::size_t>(i) * c + ch];
  }));
}

Var chw_from_tokens(const Var& x, int h, int w) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || X.dim(0) != h * w) throw std::invalid_argument("chw_from_tokens: bad shape");
  int c = X.dim(1);
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h * w; ++i)
      out.data[static_cast<std::size_t>(ch) * h * w + i] = X.data[static_cast<std::size_t>(i) * c + ch];
  return Var(make_node(std::move(out), {x.node()}, [c, h, w](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h * w; ++i)
        g.data[static_cast<std::size_t>(i) * c + ch] += self.grad.data[static_cast<std::size_t>(ch) * h * w + i];
  }));
}

Var reshape(const Var& x, std::vector<int> shape) {
  if (Tensor::numel_of(shape) != x.value().numel()) throw std::invalid_argument("reshape: numel mismatch");
  Tensor out(shape, x.value().data);
  return Var(make_node(std::move(out), {x.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (long i = 0; i < self.grad.numel(); ++i) g.data[i] += self.grad.data[i];
  }));
}

// ---------- spatial ----------

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  if (X.rank() != 3 || W.rank() != 4) throw std::invalid_argument("conv2d: bad ranks");
  int cin = X.dim(0), h = X.dim(1), wd = X.dim(2);
  int cout = W.dim(0), kh = W.dim(2), kw = W.dim(3);
  if (W.dim(1) != cin) throw std::invalid_argument("conv2d: channel mismatch");
  if (b.defined() && (b.value().rank() != 1 || b.value().dim(0) != cout))
    throw std::invalid_argument("conv2d: bad bias");
  int ho = (h + 2 * pad - kh) / stride + 1;
  int wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: output too small");
  Tensor out({cout, ho, wo});
  for (int oc = 0; oc < cout; ++oc) {
    double bias = b.defined() ? b.value().data[oc] : 0.0;
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double acc = bias;
        for (int ic = 0; ic < cin; ++ic)
          for (int ky = 0; ky < kh; ++ky) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            const double* xr = &X.data[(static_cast<std::size_t>(ic) * h + iy) * wd];
            const double* wr = &W.data[((static_cast<std::size_t>(oc) * cin + ic) * kh + ky) * kw];
            for (int kx = 0; kx < kw; ++kx) {
              int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= wd) continue;
              acc += xr[ix] * wr[kx];
            }
          }
        out.at3(oc, oy, ox) = acc;
      }
  }
  std::vector<NodePtr> parents = {x.node(), w.node()};
  if (b.defined()) parents.push_back(b.node());
  bool has_bias = b.defined();
  return Var(make_node(std::move(out), std::move(parents),
                       [cin, h, wd, cout, kh, kw, ho, wo, stride, pad, has_bias](Node& self) {
    const Tensor& X = self.parents[0]->value;
    const Tensor& W = self.parents[1]->value;
    bool need_x = self.parents[0]->requires_grad;
    bool need_w = self.parents[1]->requires_grad;
    Tensor* gX = need_x ? &self.parents[0]->ensure_grad() : nullptr;
    Tensor* gW = need_w ? &self.parents[1]->ensure_grad() : nullptr;
    for (int oc = 0; oc < cout; ++oc)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double go = self.grad.at3(oc, oy, ox);
          if (go == 0.0) continue;
          for (int ic = 0; ic < cin; ++ic)
            for (int ky = 0; ky < kh; ++ky) {
              int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                int ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= wd) continue;
                std::size_t xi = (static_cast<std::size_t>(ic) * h + iy) * wd + ix;
                std::size_t wi = ((static_cast<std::size_t>(oc) * cin + ic) * kh + ky) * kw + kx;
                if (need_x) gX->data[xi] += go * W.data[wi];
                if (need_w) gW->data[wi] += go * X.data[xi];
              }
            }
        }
    if (has_bias && self.parents[2]->requires_grad) {
      auto& gB = self.parents[2]->ensure_grad();
      for (int oc = 0; oc < cout; ++oc) {
        double s = 0.0;
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) s += self.grad.at3(oc, oy, ox);
        gB.data[oc] += s;
      }
    }
  }));
}

Var bilinear_resize(const Var& x, int out_h, int out_w) {
  const Tensor& X = x.value();
  if (X.rank() != 3) throw std::invalid_argument("bilinear_resize: expects 3-d");
  int c = X.dim(0), h = X.dim(1), w = X.dim(2);
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("bilinear_resize: bad size");
  // Precompute taps (half-pixel centers, clamped to edges).
  struct Tap { int i0, i1; double w0, w1; };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(out);
    double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      double fl = std::floor(src);
      int i0 = static_cast<int>(fl);
      double f = src - fl;
      int j0 = std::clamp(i0, 0, in - 1);
      int j1 = std::clamp(i0 + 1, 0, in - 1);
      t[o] = {j0, j1, 1.0 - f, f};
    }
    return t;
  };
  auto ty = taps(h, out_h);
  auto tx = taps(w, out_w);
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        const Tap& a = ty[oy];
        const Tap& b = tx[ox];
        out.at3(ch, oy, ox) = a.w0 * (b.w0 * X.at3(ch, a.i0, b.i0) + b.w1 * X.at3(ch, a.i0, b.i1)) +
                              a.w1 * (b.w0 * X.at3(ch, a.i1, b.i0) + b.w1 * X.at3(ch, a.i1, b.i1));
      }
  return Var(make_node(std::move(out), {x.node()}, [c, out_h, out_w, ty, tx](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          double go = self.grad.at3(ch, oy, ox);
          const auto& a = ty[oy];
          const auto& b = tx[ox];
          g.at3(ch, a.i0, b.i0) += go * a.w0 * b.w0;
          g.at3(ch, a.i0, b.i1) += go * a.w0 * b.w1;
          g.at3(ch, a.i1, b.i0) += go * a.w1 * b.w0;
          g.at3(ch, a.i1, b.i1) += go * a.w1 * b.w1;
        }
  }));
}

Var layernorm_chw(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& X = x.value();
  if (X.rank() != 3) throw std::invalid_argument("layernorm_chw: expects 3-d");
  int c = X.dim(0), h = X.dim(1), w = X.dim(2);
  if (gamma.value().numel() != c || beta.value().numel() != c)
    throw std::invalid_argument("layernorm_chw: bad affine params");
  int hw = h * w;
  Tensor out({c, h, w});
  Tensor mean({h, w}), rstd({h, w});
  for (int i = 0; i < hw; ++i) {
    double mu = 0.0;
    for (int ch = 0; ch < c; ++ch) mu += X.data[static_cast<std::size_t>(ch) * hw + i];
    mu /= c;
    double var = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      double d = X.data[static_cast<std::size_t>(ch) * hw + i] - mu;
      var += d * d;
    }
    var /= c;
    double rs = 1.0 / std::sqrt(var + eps);
    mean.data[i] = mu;
    rstd.data[i] = rs;
    for (int ch = 0; ch < c; ++ch)
      out.data[static_cast<std::size_t>(ch) * hw + i] =
          gamma.value().data[ch] * (X.data[static_cast<std::size_t>(ch) * hw + i] - mu) * rs +
          beta.value().data[ch];
  }
  return Var(make_node(std::move(out), {x.node(), gamma.node(), beta.node()},
                       [c, hw, mean, rstd](Node& self) {
    const Tensor& X = self.parents[0]->value;
    const Tensor& G = self.parents[1]->value;
    bool need_x = self.parents[0]->requires_grad;
    bool need_g = self.parents[1]->requires_grad;
    bool need_b = self.parents[2]->requires_grad;
    Tensor* gX = need_x ? &self.parents[0]->ensure_grad() : nullptr;
    Tensor* gG = need_g ? &self.parents[1]->ensure_grad() : nullptr;
    Tensor* gB = need_b ? &self.parents[2]->ensure_grad() : nullptr;
    for (int i = 0; i < hw; ++i) {
      double mu = mean.data[i];
      double rs = rstd.data[i];
      double sum_dg = 0.0, sum_dgx = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        std::size_t idx = static_cast<std::size_t>(ch) * hw + i;
        double xhat = (X.data[idx] - mu) * rs;
        double dy = self.grad.data[idx];
        if (need_g) gG->data[ch] += dy * xhat;
        if (need_b) gB->data[ch] += dy;
        double dg = dy * G.data[ch];
        sum_dg += dg;
        sum_dgx += dg * xhat;
      }
      if (need_x) {
        for (int ch = 0; ch < c; ++ch) {
          std::size_t idx = static_cast<std::size_t>(ch) * hw + i;
          double xhat = (X.data[idx] - mu) * rs;
          double dg = self.grad.data[idx] * G.data[ch];
          gX->data[idx] += rs * (dg - sum_dg / c - xhat * sum_dgx / c);
        }
      }
    }
  }));
}

// ---------- reductions ----------

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  return Var(make_node(Tensor::scalar(s), {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    double go = self.grad.data[0];
    for (long i = 0; i < g.numel(); ++i) g.data[i] += go;
  }));
}

Var mean_all(const Var& a) { return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.value().numel())); }

}  // namespace cmsa::ag

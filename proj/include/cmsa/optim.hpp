#pragma once

#include <cmath>
#include <vector>

#include "cmsa/params.hpp"

namespace cmsa {

// AdamW: adaptive moments with decoupled weight decay.
class AdamW {
 public:
  AdamW(ParamStore params, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto& [name, v] : params_.items) {
      m_.push_back(Tensor::zeros(v.value().shape));
      v_.push_back(Tensor::zeros(v.value().shape));
    }
  }

  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, t_);
    double bc2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t k = 0; k < params_.items.size(); ++k) {
      auto& p = params_.items[k].second;
      Tensor& w = p.value();
      const Tensor& g = p.grad();
      for (long i = 0; i < w.numel(); ++i) {
        double gi = g.data[i];
        m_[k].data[i] = b1_ * m_[k].data[i] + (1.0 - b1_) * gi;
        v_[k].data[i] = b2_ * v_[k].data[i] + (1.0 - b2_) * gi * gi;
        double mhat = m_[k].data[i] / bc1;
        double vhat = v_[k].data[i] / bc2;
        w.data[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * w.data[i]);
      }
    }
  }

  long step_count() const { return t_; }

 private:
  ParamStore params_;
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace cmsa

#pragma once

#include "cmsa/autograd.hpp"
#include "cmsa/decoder.hpp"

namespace cmsa {

// Composite segmentation loss: Dice + weighted IoU + weighted BCE per
// prediction head, summed over the three heads. Pixel weights follow the
// boundary-emphasis scheme w = 1 + 5*|meanpool31(g) - g| (zero-padded 31x31
// window, stride 1, constant divisor 961).
constexpr double kLossEps = 1e-6;

Tensor boundary_weights(const Tensor& gt);

ag::Var dice_loss(const ag::Var& probs, const Tensor& gt);                          // in [0,1]
ag::Var weighted_iou_loss(const ag::Var& probs, const Tensor& gt, const Tensor& w);
ag::Var weighted_bce_loss(const ag::Var& logits, const Tensor& gt, const Tensor& w);

struct LossReport {
  double dice[3] = {0, 0, 0};
  double wiou[3] = {0, 0, 0};
  double wbce[3] = {0, 0, 0};
  ag::Var total;  // scalar, differentiable

  double total_value() const { return total.value().item(); }
  std::string to_json() const;
};

// preds hold logits at ground-truth resolution.
LossReport total_loss(const PredictionTriple& preds, const Tensor& gt);

}  // namespace cmsa

#include "cmsa/losses.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace cmsa {

Tensor boundary_weights(const Tensor& gt) {
  if (gt.rank() != 2) throw std::invalid_argument("boundary_weights: expects [H,W]");
  int h = gt.dim(0), w = gt.dim(1);
  const int k = 31, r = 15;
  // separable zero-padded box sum, constant divisor k*k
  Tensor rowsum({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dx = -r; dx <= r; ++dx) {
        int xx = x + dx;
        if (xx >= 0 && xx < w) s += gt.at2(y, xx);
      }
      rowsum.at2(y, x) = s;
    }
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        int yy = y + dy;
        if (yy >= 0 && yy < h) s += rowsum.at2(yy, x);
      }
      double pooled = s / (k * k);
      out.at2(y, x) = 1.0 + 5.0 * std::abs(pooled - gt.at2(y, x));
    }
  return out;
}

ag::Var dice_loss(const ag::Var& probs, const Tensor& gt) {
  check_same_shape(probs.value(), gt, "dice_loss");
  ag::Var inter = ag::sum_all(ag::mul_const(probs, gt));
  double gsum = 0.0;
  for (double v : gt.data) gsum += v;
  ag::Var num = ag::add_scalar(ag::mul_scalar(inter, 2.0), kLossEps);
  ag::Var den = ag::add_scalar(ag::sum_all(probs), gsum + kLossEps);
  return ag::scalar_sub(1.0, ag::div(num, den));
}

ag::Var weighted_iou_loss(const ag::Var& probs, const Tensor& gt, const Tensor& w) {
  check_same_shape(probs.value(), gt, "weighted_iou_loss");
  check_same_shape(probs.value(), w, "weighted_iou_loss");
  Tensor wg = w;
  for (long i = 0; i < wg.numel(); ++i) wg.data[i] *= gt.data[i];
  ag::Var inter = ag::sum_all(ag::mul_const(probs, wg));         // sum w*m*g
  ag::Var msum = ag::sum_all(ag::mul_const(probs, w));           // sum w*m
  double gsum = 0.0;
  for (long i = 0; i < wg.numel(); ++i) gsum += wg.data[i];      // sum w*g
  ag::Var uni = ag::add_scalar(msum, gsum);                      // sum w*(m+g)
  ag::Var num = ag::add_scalar(inter, kLossEps);
  ag::Var den = ag::add_scalar(ag::sub(uni, inter), kLossEps);
  return ag::scalar_sub(1.0, ag::div(num, den));
}

ag::Var weighted_bce_loss(const ag::Var& logits, const Tensor& gt, const Tensor& w) {
  check_same_shape(logits.value(), gt, "weighted_bce_loss");
  check_same_shape(logits.value(), w, "weighted_bce_loss");
  ag::Var per_pixel = ag::bce_logits(logits, gt);
  double wsum = 0.0;
  for (double v : w.data) wsum += v;
  return ag::mul_scalar(ag::sum_all(ag::mul_const(per_pixel, w)), 1.0 / (wsum + kLossEps));
}

LossReport total_loss(const PredictionTriple& preds, const Tensor& gt) {
  if (gt.rank() != 2) throw std::invalid_argument("total_loss: gt must be [H,W]");
  Tensor w = boundary_weights(gt);
  const ag::Var* heads[3] = {&preds.pred1, &preds.pred2, &preds.pred3};
  LossReport rep;
  ag::Var total;
  for (int i = 0; i < 3; ++i) {
    const ag::Var& logits = *heads[i];
    check_same_shape(logits.value(), gt, "total_loss");
    ag::Var probs = ag::sigmoid(logits);
    ag::Var d = dice_loss(probs, gt);
    ag::Var wi = weighted_iou_loss(probs, gt, w);
    ag::Var wb = weighted_bce_loss(logits, gt, w);
    rep.dice[i] = d.value().item();
    rep.wiou[i] = wi.value().item();
    rep.wbce[i] = wb.value().item();
    ag::Var seg = ag::add(ag::add(d, wi), wb);
    total = total.defined() ? ag::add(total, seg) : seg;
  }
  rep.total = total;
  return rep;
}

std::string LossReport::to_json() const {
  nlohmann::json j;
  for (int i = 0; i < 3; ++i) {
    j["pred" + std::to_string(i + 1)] = {{"dice", dice[i]}, {"wiou", wiou[i]}, {"wbce", wbce[i]}};
  }
  j["total"] = total.defined() ? total.value().item() : 0.0;
  return j.dump();
}

}  // namespace cmsa

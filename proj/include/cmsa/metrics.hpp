#pragma once

#include <string>
#include <vector>

#include "cmsa/tensor.hpp"

namespace cmsa {

// The six evaluation measures: Dice, IoU, MAE, structure-measure S_alpha
// (alpha = 0.5), mean enhanced-alignment measure E_phi (256 midpoint
// thresholds), and weighted F-measure F^w_beta (beta^2 = 1).
struct MetricReport {
  double s_measure = 0.0;
  double e_measure = 0.0;
  double weighted_f = 0.0;
  double dice = 0.0;
  double iou = 0.0;
  double mae = 0.0;

  std::string to_json() const;
};

// pred: probabilities in [0,1]; gt: binary. Dice/IoU binarize pred at 0.5.
MetricReport frame_metrics(const Tensor& pred, const Tensor& gt);

// Per-frame metrics averaged within each clip, then clip scores averaged
// (clip-balanced aggregation).
MetricReport evaluate_dataset(const std::vector<std::vector<MetricReport>>& per_clip_frames);

// Aligned-column text table in the order S_alpha, E_phi, F_w, Dice, IoU, MAE.
std::string metrics_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace cmsa

#include "cmsa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace cmsa {

namespace {

constexpr double kEps = 1e-12;

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data) s += v;
  return s / static_cast<double>(t.numel());
}

// ---- structure measure (alpha = 0.5) ----

double ssim_region(const Tensor& pred, const Tensor& gt, int y0, int y1, int x0, int x1) {
  int n = (y1 - y0) * (x1 - x0);
  if (n == 0) return 1.0;
  double mx = 0.0, my = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      mx += pred.at2(y, x);
      my += gt.at2(y, x);
    }
  mx /= n;
  my /= n;
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      double dx = pred.at2(y, x) - mx;
      double dy = gt.at2(y, x) - my;
      sx += dx * dx;
      sy += dy * dy;
      sxy += dx * dy;
    }
  int denom_n = std::max(n - 1, 1);
  sx /= denom_n;
  sy /= denom_n;
  sxy /= denom_n;
  double alpha = 4.0 * mx * my * sxy;
  double beta = (mx * mx + my * my) * (sx + sy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return (alpha == 0.0 && beta == 0.0) ? 1.0 : 0.0;
}

double s_object_term(const Tensor& pred, const Tensor& gt, bool foreground) {
  // similarity of pred (or its complement) with the constant 1 map over the
  // region, per the structure-measure object score
  double sum = 0.0, sumsq = 0.0;
  long n = 0;
  for (long i = 0; i < gt.numel(); ++i) {
    bool in = gt.data[i] > 0.5;
    if (in != foreground) continue;
    double v = foreground ? pred.data[i] : 1.0 - pred.data[i];
    sum += v;
    sumsq += v * v;
    ++n;
  }
  if (n == 0) return 0.0;
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  double sigma = std::sqrt(std::max(var, 0.0));
  return 2.0 * mean / (mean * mean + 1.0 + sigma + kEps);
}

double s_object(const Tensor& pred, const Tensor& gt) {
  double mu = mean_of(gt);
  return mu * s_object_term(pred, gt, true) + (1.0 - mu) * s_object_term(pred, gt, false);
}

double s_region(const Tensor& pred, const Tensor& gt) {
  int h = gt.dim(0), w = gt.dim(1);
  // GT centroid (1-based rounding convention of the reference formulation)
  double total = 0.0, cx = 0.0, cy = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double g = gt.at2(y, x);
      total += g;
      cx += g * (x + 1);
      cy += g * (y + 1);
    }
  int x0, y0;
  if (total < 0.5) {
    x0 = (w + 1) / 2;
    y0 = (h + 1) / 2;
  } else {
    x0 = static_cast<int>(std::round(cx / total));
    y0 = static_cast<int>(std::round(cy / total));
  }
  x0 = std::clamp(x0, 1, w);
  y0 = std::clamp(y0, 1, h);
  double area = static_cast<double>(h) * w;
  double w1 = (static_cast<double>(x0) * y0) / area;
  double w2 = (static_cast<double>(w - x0) * y0) / area;
  double w3 = (static_cast<double>(x0) * (h - y0)) / area;
  double w4 = 1.0 - w1 - w2 - w3;
  double q1 = ssim_region(pred, gt, 0, y0, 0, x0);
  double q2 = ssim_region(pred, gt, 0, y0, x0, w);
  double q3 = ssim_region(pred, gt, y0, h, 0, x0);
  double q4 = ssim_region(pred, gt, y0, h, x0, w);
  return w1 * q1 + w2 * q2 + w3 * q3 + w4 * q4;
}

double s_measure(const Tensor& pred, const Tensor& gt) {
  double y = mean_of(gt);
  if (y == 0.0) return 1.0 - mean_of(pred);  // all-background convention
  if (y == 1.0) return mean_of(pred);
  constexpr double alpha = 0.5;
  double s = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
  return std::max(s, 0.0);
}

// ---- enhanced-alignment measure ----

double e_measure_single(const Tensor& bin_pred, const Tensor& gt) {
  long n = gt.numel();
  double gt_sum = 0.0, fm_sum = 0.0;
  for (long i = 0; i < n; ++i) {
    gt_sum += gt.data[i];
    fm_sum += bin_pred.data[i];
  }
  double score = 0.0;
  if (gt_sum == 0.0) {
    for (long i = 0; i < n; ++i) score += 1.0 - bin_pred.data[i];
  } else if (gt_sum == static_cast<double>(n)) {
    for (long i = 0; i < n; ++i) score += bin_pred.data[i];
  } else {
    double mg = gt_sum / n, mf = fm_sum / n;
    for (long i = 0; i < n; ++i) {
      double dg = gt.data[i] - mg;
      double df = bin_pred.data[i] - mf;
      double align = 2.0 * dg * df / (dg * dg + df * df + kEps);
      double enhanced = (align + 1.0) * (align + 1.0) / 4.0;
      score += enhanced;
    }
  }
  // normalized by N so a perfect prediction scores exactly 1
  return std::clamp(score / n, 0.0, 1.0);
}

double e_measure_mean(const Tensor& pred, const Tensor& gt) {
  constexpr int kThresholds = 256;
  double acc = 0.0;
  Tensor bin(gt.shape);
  for (int k = 0; k < kThresholds; ++k) {
    double t = (k + 0.5) / kThresholds;  // midpoint thresholds in (0,1)
    for (long i = 0; i < pred.numel(); ++i) bin.data[i] = pred.data[i] >= t ? 1.0 : 0.0;
    acc += e_measure_single(bin, gt);
  }
  return acc / kThresholds;
}

// ---- weighted F-measure ----

// Exact Euclidean distance transform with nearest-seed tracking.
// O(H*W*max(H,W)); fine at evaluation sizes.
void distance_transform(const Tensor& gt, Tensor& dist, std::vector<int>& nearest) {
  int h = gt.dim(0), w = gt.dim(1);
  const double inf = std::numeric_limits<double>::infinity();
  // column pass: nearest seed within each column
  std::vector<double> cd(static_cast<std::size_t>(h) * w, inf);
  std::vector<int> cidx(static_cast<std::size_t>(h) * w, -1);
  for (int x = 0; x < w; ++x) {
    int last = -1;
    for (int y = 0; y < h; ++y) {
      if (gt.at2(y, x) > 0.5) last = y;
      if (last >= 0) {
        cd[static_cast<std::size_t>(y) * w + x] = y - last;
        cidx[static_cast<std::size_t>(y) * w + x] = last;
      }
    }
    last = -1;
    for (int y = h - 1; y >= 0; --y) {
      if (gt.at2(y, x) > 0.5) last = y;
      if (last >= 0 && last - y < cd[static_cast<std::size_t>(y) * w + x]) {
        cd[static_cast<std::size_t>(y) * w + x] = last - y;
        cidx[static_cast<std::size_t>(y) * w + x] = last;
      }
    }
  }
  // row pass: combine squared column distance with horizontal offset
  nearest.assign(static_cast<std::size_t>(h) * w, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double best = inf;
      int best_idx = -1;
      for (int c = 0; c < w; ++c) {
        double dc = cd[static_cast<std::size_t>(y) * w + c];
        if (std::isinf(dc)) continue;
        double d2 = dc * dc + static_cast<double>(x - c) * (x - c);
        if (d2 < best) {
          best = d2;
          best_idx = cidx[static_cast<std::size_t>(y) * w + c] * w + c;
        }
      }
      dist.at2(y, x) = std::isinf(best) ? inf : std::sqrt(best);
      nearest[static_cast<std::size_t>(y) * w + x] = best_idx;
    }
}

double weighted_f_measure(const Tensor& pred, const Tensor& gt) {
  int h = gt.dim(0), w = gt.dim(1);
  long n = gt.numel();
  double gt_sum = 0.0;
  for (double v : gt.data) gt_sum += v;
  if (gt_sum == 0.0) {
    // degenerate all-background frame: perfect iff prediction is empty at 0.5
    for (double v : pred.data)
      if (v >= 0.5) return 0.0;
    return 1.0;
  }

  Tensor dist({h, w});
  std::vector<int> nearest;
  distance_transform(gt, dist, nearest);

  // absolute error, with non-GT pixels taking the error of their nearest GT pixel
  Tensor err({h, w}), et({h, w});
  for (long i = 0; i < n; ++i) err.data[i] = std::abs(pred.data[i] - gt.data[i]);
  for (long i = 0; i < n; ++i)
    et.data[i] = gt.data[i] > 0.5 ? err.data[i] : err.data[nearest[static_cast<std::size_t>(i)]];

  // 7x7 gaussian (sigma 5), zero padding
  double kern[7][7];
  double ksum = 0.0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      double dy = i - 3, dx = j - 3;
      kern[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 25.0));
      ksum += kern[i][j];
    }
  for (auto& row : kern)
    for (auto& v : row) v /= ksum;
  Tensor ea({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) {
          int yy = y + i - 3, xx = x + j - 3;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          s += kern[i][j] * et.at2(yy, xx);
        }
      ea.at2(y, x) = s;
    }

  double tp_loss = 0.0, fp_weighted = 0.0;
  for (long i = 0; i < n; ++i) {
    if (gt.data[i] > 0.5) {
      tp_loss += std::min(err.data[i], ea.data[i]);
    } else {
      double b = 2.0 - std::exp(std::log(0.5) / 5.0 * dist.data[i]);
      fp_weighted += b * err.data[i];
    }
  }
  double tpw = gt_sum - tp_loss;
  double fpw = fp_weighted;
  double recall = 1.0 - tp_loss / gt_sum;
  double precision = tpw / (kEps + tpw + fpw);
  if (recall <= 0.0 && precision <= 0.0) return 0.0;
  return std::clamp(2.0 * recall * precision / (kEps + recall + precision), 0.0, 1.0);
}

}  // namespace

MetricReport frame_metrics(const Tensor& pred, const Tensor& gt) {
  check_same_shape(pred, gt, "frame_metrics");
  if (pred.rank() != 2) throw std::invalid_argument("frame_metrics: expects [H,W]");
  for (double v : pred.data)
    if (v < 0.0 || v > 1.0 || !std::isfinite(v))
      throw std::invalid_argument("frame_metrics: pred outside [0,1]");

  MetricReport r;
  long tp = 0, fp = 0, fn = 0;
  double abs_err = 0.0;
  for (long i = 0; i < pred.numel(); ++i) {
    bool p = pred.data[i] >= 0.5;
    bool g = gt.data[i] > 0.5;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
    abs_err += std::abs(pred.data[i] - gt.data[i]);
  }
  r.dice = (2.0 * tp + kEps) / (2.0 * tp + fp + fn + kEps);
  r.iou = (tp + kEps) / (tp + fp + fn + kEps);
  r.mae = abs_err / static_cast<double>(pred.numel());
  r.s_measure = s_measure(pred, gt);
  r.e_measure = e_measure_mean(pred, gt);
  r.weighted_f = weighted_f_measure(pred, gt);
  return r;
}

MetricReport evaluate_dataset(const std::vector<std::vector<MetricReport>>& per_clip_frames) {
  if (per_clip_frames.empty()) throw std::invalid_argument("evaluate_dataset: no clips");
  MetricReport total;
  int n_clips = 0;
  for (const auto& clip : per_clip_frames) {
    if (clip.empty()) throw std::invalid_argument("evaluate_dataset: empty clip");
    MetricReport c;
    for (const auto& f : clip) {
      c.s_measure += f.s_measure;
      c.e_measure += f.e_measure;
      c.weighted_f += f.weighted_f;
      c.dice += f.dice;
      c.iou += f.iou;
      c.mae += f.mae;
    }
    double inv = 1.0 / static_cast<double>(clip.size());
    total.s_measure += c.s_measure * inv;
    total.e_measure += c.e_measure * inv;
    total.weighted_f += c.weighted_f * inv;
    total.dice += c.dice * inv;
    total.iou += c.iou * inv;
    total.mae += c.mae * inv;
    ++n_clips;
  }
  double inv = 1.0 / n_clips;
  total.s_measure *= inv;
  total.e_measure *= inv;
  total.weighted_f *= inv;
  total.dice *= inv;
  total.iou *= inv;
  total.mae *= inv;
  return total;
}

std::string MetricReport::to_json() const {
  nlohmann::json j = {{"s_measure", s_measure}, {"e_measure", e_measure}, {"weighted_f", weighted_f},
                      {"dice", dice},           {"iou", iou},             {"mae", mae}};
  return j.dump();
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-24s %8s %8s %8s %8s %8s %8s\n", "name", "S_a", "E_phi", "F_w", "Dice",
                "IoU", "MAE");
  out += buf;
  for (const auto& [name, m] : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n", name.c_str(), m.s_measure,
                  m.e_measure, m.weighted_f, m.dice, m.iou, m.mae);
    out += buf;
  }
  return out;
}

}  // namespace cmsa

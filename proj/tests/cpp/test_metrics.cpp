#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cmsa/checks.hpp"
#include "cmsa/metrics.hpp"
#include "cmsa/rng.hpp"

using namespace cmsa;

TEST_CASE("perfect and inverted predictions") {
  Tensor g = Tensor::zeros({16, 16});
  for (int y = 4; y < 12; ++y)
    for (int x = 5; x < 13; ++x) g.at2(y, x) = 1.0;
  MetricReport perfect = frame_metrics(g, g);
  CHECK(perfect.dice == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(perfect.iou == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(perfect.mae == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(perfect.s_measure == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(perfect.e_measure == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(perfect.weighted_f == doctest::Approx(1.0).epsilon(1e-6));

  MetricReport miss = frame_metrics(Tensor::zeros({4, 4}), Tensor::full({4, 4}, 1.0));
  CHECK(miss.dice == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(miss.mae == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("overlap metrics match explicit set counts") {
  Rng rng(3);
  Tensor pred = Tensor::zeros({16, 16}), g = Tensor::zeros({16, 16});
  for (auto& v : pred.data) v = rng.uniform();
  for (auto& v : g.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  MetricReport m = frame_metrics(pred, g);
  double tp = 0, fp = 0, fn = 0, mae = 0;
  for (long i = 0; i < pred.numel(); ++i) {
    bool p = pred.data[i] >= 0.5, t = g.data[i] > 0.5;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
    mae += std::abs(pred.data[i] - g.data[i]);
  }
  CHECK(m.dice == doctest::Approx(2 * tp / (2 * tp + fp + fn)).epsilon(1e-9));
  CHECK(m.iou == doctest::Approx(tp / (tp + fp + fn)).epsilon(1e-9));
  CHECK(m.mae == doctest::Approx(mae / pred.numel()).epsilon(1e-9));
}

TEST_CASE("metric values stay in range on random inputs") {
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    Tensor pred = Tensor::zeros({12, 12}), g = Tensor::zeros({12, 12});
    for (auto& v : pred.data) v = rng.uniform();
    for (auto& v : g.data) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
    MetricReport m = frame_metrics(pred, g);
    for (double v : {m.s_measure, m.e_measure, m.weighted_f, m.dice, m.iou, m.mae}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("flipping foreground pixels strictly decreases dice") {
  Tensor g = Tensor::zeros({16, 16});
  for (int y = 4; y < 12; ++y)
    for (int x = 4; x < 12; ++x) g.at2(y, x) = 1.0;
  Tensor pred = g;
  double last = frame_metrics(pred, g).dice;
  for (int k = 0; k < 3; ++k) {
    pred.at2(4 + k, 4) = 0.0;
    double d = frame_metrics(pred, g).dice;
    CHECK(d < last);
    last = d;
  }
}

TEST_CASE("dataset aggregation is clip-balanced and order-independent") {
  MetricReport a, b;
  a.dice = 0.8;
  b.dice = 0.6;
  MetricReport agg = evaluate_dataset({{a}, {b}});
  CHECK(agg.dice == doctest::Approx(0.7).epsilon(1e-12));

  // a clip with more frames must not outweigh a short clip
  MetricReport agg2 = evaluate_dataset({{a, a, a}, {b}});
  CHECK(agg2.dice == doctest::Approx(0.7).epsilon(1e-12));

  MetricReport fw = evaluate_dataset({{a}, {b}});
  MetricReport rev = evaluate_dataset({{b}, {a}});
  CHECK(fw.dice == rev.dice);

  CHECK_THROWS(evaluate_dataset({}));
}

TEST_CASE("single frame dataset equals the frame report") {
  Rng rng(5);
  Tensor pred = Tensor::zeros({8, 8}), g = Tensor::zeros({8, 8});
  for (auto& v : pred.data) v = rng.uniform();
  for (auto& v : g.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  MetricReport frame = frame_metrics(pred, g);
  MetricReport agg = evaluate_dataset({{frame}});
  CHECK(agg.dice == frame.dice);
  CHECK(agg.s_measure == frame.s_measure);
  CHECK(agg.e_measure == frame.e_measure);
}

TEST_CASE("MAE complement symmetry and sanity suite") {
  auto r = checks::check_metric_sanity(6);
  CHECK_MESSAGE(r.pass, r.detail);
}

TEST_CASE("empty ground truth conventions") {
  Tensor empty = Tensor::zeros({8, 8});
  // s-measure degenerates to 1 - mean(pred)
  Tensor pred = Tensor::full({8, 8}, 0.25);
  CHECK(frame_metrics(pred, empty).s_measure == doctest::Approx(0.75).epsilon(1e-9));
  // weighted F: empty prediction on empty ground truth is perfect
  CHECK(frame_metrics(Tensor::zeros({8, 8}), empty).weighted_f == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("table formatting lists all six columns") {
  MetricReport m;
  std::string table = metrics_table({{"row", m}});
  for (const char* col : {"S_a", "E_phi", "F_w", "Dice", "IoU", "MAE"})
    CHECK(table.find(col) != std::string::npos);
}

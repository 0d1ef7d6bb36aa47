// Acceptance gate: one pass/fail line per criterion, exit 0 iff all pass.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "cmsa/checks.hpp"
#include "cmsa/metrics.hpp"
#include "cmsa/pipeline.hpp"

using namespace cmsa;

namespace {

int failures = 0;

double now_s() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

void report(int criterion, const std::string& name, bool pass, const std::string& detail, double seconds,
            double budget_s) {
  bool ok = pass && (budget_s <= 0.0 || seconds < budget_s);
  if (!ok) ++failures;
  std::printf("CRITERION %2d %s %-24s %s [%.1fs%s]\n", criterion, ok ? "PASS" : "FAIL", name.c_str(),
              detail.c_str(), seconds, budget_s > 0.0 ? ("/" + std::to_string((int)budget_s) + "s").c_str() : "");
}

void run_check(int criterion, const checks::CheckResult& r, double t0, double budget_s) {
  report(criterion, r.name, r.pass, r.detail, now_s() - t0, budget_s);
}

// binarized overlap of the final head on the training clip's current frame
double training_dice(const Model& model, const VideoClip& clip) {
  ag::NoGradGuard ng;
  ClipForward fwd = forward_clip(model, clip.frames, clip.roles);
  Tensor prob = ag::sigmoid(fwd.preds.pred3).value();
  return frame_metrics(prob, clip.masks.back()).dice;
}

double stream_mean_dice(const Model& model, const std::vector<VideoClip>& clips) {
  double sum = 0.0;
  int n = 0;
  for (const auto& clip : clips) {
    StreamingSegmenter seg(model);
    for (int t = 0; t < clip.length(); ++t) {
      auto step = seg.push(clip.frames[t]);
      sum += frame_metrics(step.prob, clip.masks[t]).dice;
      ++n;
    }
  }
  return sum / n;
}

}  // namespace

int main() {
  const std::uint64_t seed = 1;
  double t0;

  t0 = now_s();
  run_check(1, checks::check_causality(seed, 64, 8, 6, 2), t0, 10);
  t0 = now_s();
  run_check(2, checks::check_masked_dense(seed, 10, 1e-6), t0, 30);
  t0 = now_s();
  run_check(3, checks::check_gradients(seed, 1e-5, 1e-4), t0, 60);
  t0 = now_s();
  run_check(4, checks::check_dmr_replay(seed, 20, 50, 5, 1), t0, 30);
  t0 = now_s();
  run_check(5, checks::check_determinacy_values(), t0, 0);
  t0 = now_s();
  run_check(6, checks::check_score_bounds(seed, 10000), t0, 0);
  t0 = now_s();
  run_check(7, checks::check_loss_sanity(seed), t0, 0);
  t0 = now_s();
  run_check(8, checks::check_metric_sanity(seed), t0, 0);
  t0 = now_s();
  run_check(9, checks::check_shape_law(), t0, 0);

  // 10: memorize one synthetic clip in 200 optimizer steps
  {
    t0 = now_s();
    RunConfig cfg;
    cfg.image_size = 64;
    cfg.channels = 8;
    cfg.heads = 4;
    cfg.clip_len = 6;
    cfg.num_refs = 2;
    cfg.lr = 5e-3;
    cfg.seed = 5;
    auto clips = make_synth_dataset(cfg, 1, cfg.seed + 1000);
    Model model = init_model(cfg);
    TrainResult res = train_model(model, clips, 200, 1, cfg.lr, cfg.weight_decay);
    double dice = training_dice(model, clips[0]);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "dice %.4f after %ld steps (need > 0.95)", dice, res.steps);
    report(10, "overfit", dice > 0.95, buf, now_s() - t0, 300);
  }

  // 11: every single-ablation variant scores at or below the full model
  {
    t0 = now_s();
    RunConfig cfg;
    cfg.image_size = 64;
    cfg.channels = 8;
    cfg.heads = 4;
    cfg.clip_len = 6;
    cfg.num_refs = 2;
    cfg.lr = 1e-3;
    cfg.seed = 9;
    cfg.synth_motion = 8.0;  // high motion stresses the reference selection
    auto train_clips = make_synth_dataset(cfg, 8, 2000);
    auto test_clips = make_synth_dataset(cfg, 20, 3000);

    Model full = init_model(cfg);
    train_model(full, train_clips, 100, 4, cfg.lr, cfg.weight_decay);

    RunConfig cfg_ss = cfg;
    cfg_ss.no_multiscale = true;
    Model single_scale = init_model(cfg_ss);
    train_model(single_scale, train_clips, 100, 4, cfg_ss.lr, cfg_ss.weight_decay);

    double base = stream_mean_dice(full, test_clips);
    std::vector<std::pair<std::string, double>> variants;
    for (const char* flag : {"no_cma", "no_dmr", "no_causal", "single_source"}) {
      Model m = full;
      if (std::string(flag) == "no_cma") m.cfg.no_cma = true;
      if (std::string(flag) == "no_dmr") m.cfg.no_dmr = true;
      if (std::string(flag) == "no_causal") m.cfg.no_causal = true;
      if (std::string(flag) == "single_source") m.cfg.single_source = true;
      variants.emplace_back(flag, stream_mean_dice(m, test_clips));
    }
    variants.emplace_back("no_multiscale", stream_mean_dice(single_scale, test_clips));

    bool pass = true;
    std::string detail = "full " + std::to_string(base).substr(0, 6);
    for (const auto& [name, dice] : variants) {
      pass = pass && base >= dice;
      detail += ", " + name + " " + std::to_string(dice).substr(0, 6);
    }
    report(11, "ablation_direction", pass, detail, now_s() - t0, 0);
  }

  if (failures == 0) std::printf("ALL CRITERIA PASS\n");
  return failures == 0 ? 0 : 1;
}

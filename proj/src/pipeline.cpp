#include "cmsa/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <stdexcept>

#include "cmsa/checkpoint.hpp"
#include "cmsa/checks.hpp"
#include "cmsa/imageio.hpp"
#include "cmsa/losses.hpp"
#include "cmsa/metrics.hpp"
#include "cmsa/optim.hpp"

namespace cmsa {

namespace fs = std::filesystem;

std::vector<VideoClip> make_synth_dataset(const RunConfig& cfg, int num_clips, std::uint64_t seed0) {
  SynthConfig scfg;
  scfg.height = cfg.image_size;
  scfg.width = cfg.image_size;
  scfg.num_frames = cfg.clip_len;
  scfg.contrast = cfg.synth_contrast;
  scfg.motion_amplitude = cfg.synth_motion;
  scfg.scale_jitter = cfg.synth_scale_jitter;
  scfg.noise_sigma = cfg.synth_noise;
  std::vector<VideoClip> out;
  for (int i = 0; i < num_clips; ++i) {
    scfg.seed = seed0 + static_cast<std::uint64_t>(i);
    out.push_back(gen_clip(scfg, cfg.num_refs));
  }
  return out;
}

TrainResult train_model(Model& model, const std::vector<VideoClip>& clips, int epochs, int batch_size,
                        double lr, double weight_decay, std::ostream* log) {
  if (clips.empty()) throw std::invalid_argument("train_model: no clips");
  ParamStore store = model.params();
  AdamW opt(store, lr, weight_decay);
  TrainResult res;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t b0 = 0; b0 < clips.size(); b0 += static_cast<std::size_t>(batch_size)) {
      std::size_t b1 = std::min(clips.size(), b0 + static_cast<std::size_t>(batch_size));
      ag::Var batch_loss;
      LossReport last_report;
      for (std::size_t i = b0; i < b1; ++i) {
        ClipForward fwd = forward_clip(model, clips[i].frames, clips[i].roles);
        last_report = total_loss(fwd.preds, clips[i].masks.back());
        batch_loss = batch_loss.defined() ? ag::add(batch_loss, last_report.total) : last_report.total;
      }
      batch_loss = ag::mul_scalar(batch_loss, 1.0 / static_cast<double>(b1 - b0));
      double loss_value = batch_loss.value().item();
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error("train_model: non-finite loss at step " +
                                 std::to_string(opt.step_count() + 1) +
                                 "; last clip report: " + last_report.to_json());
      }
      ag::backward(batch_loss);
      opt.step();
      res.steps = opt.step_count();
      res.final_loss = loss_value;
      res.final_dice_loss = last_report.dice[2];
      if (log) {
        nlohmann::json j = {{"epoch", epoch},
                            {"step", res.steps},
                            {"loss", loss_value},
                            {"clips", b1 - b0},
                            {"last_clip", nlohmann::json::parse(last_report.to_json())}};
        (*log) << j.dump() << "\n";
      }
    }
  }
  return res;
}

StreamingSegmenter::StreamingSegmenter(Model model) : model_(std::move(model)) {
  model_.cfg.validate();
}

StreamingSegmenter::Step StreamingSegmenter::push(const Tensor& frame) {
  auto t0 = std::chrono::steady_clock::now();
  ag::NoGradGuard inference;
  ++t_;

  FeaturePyramid pyr = encode_frame(model_.encoder, ag::Var::constant(frame));
  FrameTokens cur_ft = build_token_set(pyr, model_.cma, Role::Current);
  FrameRecord cur;
  cur.tokens = cur_ft.tokens.value();
  cur.aligned = cur_ft.aligned.value();

  Step step;
  step.t = t_;
  std::vector<FrameTokens> clip;
  if (t_ == 0) {
    // Both slots are the current frame itself during warm-up of frame 0.
    DMRState boot;
    boot.sem_slot.record = cur;
    boot.conf_slot.record = cur;
    boot.initialized = true;
    clip = assemble_clip(boot, recent_, cur, model_.cfg.clip_len);
    step.sem_frame = step.conf_frame = 0;
  } else {
    DMRState view = state_;
    if (model_.cfg.single_source) view.conf_slot = view.sem_slot;
    clip = assemble_clip(view, recent_, cur, model_.cfg.clip_len);
    step.sem_frame = sem_frame_;
    step.conf_frame = model_.cfg.single_source ? sem_frame_ : conf_frame_;
  }

  ClipForward fwd = forward_tokens(model_, clip, pyr, frame.dim(1), frame.dim(2));
  step.prob = ag::sigmoid(fwd.preds.pred3).value();
  step.coarse_prob = ag::sigmoid(fwd.coarse_cur).value();

  // Complete the record and run slot maintenance.
  cur.feature = fwd.agg.back().value();
  cur.protos = compute_prototypes(cur.feature, step.coarse_prob);
  cur.s_sep = 1.0 - cosine(cur.protos.mu_fg, cur.protos.mu_bg);
  cur.c = determinacy(step.coarse_prob);
  if (t_ == 0) {
    state_ = DMRState::init(cur, model_.cfg.cooldown_sem, model_.cfg.cooldown_conf);
    sem_frame_ = conf_frame_ = 0;
  } else if (!model_.cfg.no_dmr) {
    step.audit = dmr_step(state_, cur, t_);
    if (step.audit.sem_updated) sem_frame_ = t_ - 1;
    if (step.audit.conf_updated) conf_frame_ = t_ - 1;
  }

  recent_.push_back(std::move(cur));
  std::size_t cap = static_cast<std::size_t>(std::max(1, model_.cfg.clip_len - 3));
  while (recent_.size() > cap) recent_.pop_front();

  step.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return step;
}

std::string step_audit_jsonl(const StreamingSegmenter::Step& step) {
  nlohmann::json j = {{"t", step.t},
                      {"sem_frame", step.sem_frame},
                      {"conf_frame", step.conf_frame},
                      {"latency_ms", step.latency_ms},
                      {"dmr", nlohmann::json::parse(audit_to_jsonl(step.audit))}};
  return j.dump();
}

// ---- directory-backed data ----

VideoClip load_clip_dir(const std::string& dir, int num_refs) {
  auto frame_paths = list_pngs(dir, "frame_");
  auto mask_paths = list_pngs(dir, "mask_");
  if (frame_paths.empty()) throw std::runtime_error("no frame_*.png in " + dir);
  if (!mask_paths.empty() && mask_paths.size() != frame_paths.size())
    throw std::runtime_error("frame/mask count mismatch in " + dir);
  VideoClip clip;
  for (std::size_t i = 0; i < frame_paths.size(); ++i) {
    clip.frames.push_back(read_frame_png(frame_paths[i]));
    if (!mask_paths.empty()) clip.masks.push_back(read_mask_png(mask_paths[i]));
    clip.timestamps.push_back(static_cast<int>(i));
  }
  int t = clip.length();
  int r = std::min(std::max(num_refs, 1), t - 1);
  for (int i = 0; i < t; ++i)
    clip.roles.push_back(i < r ? Role::Reference : (i + 1 == t ? Role::Current : Role::Adjacent));
  return clip;
}

std::vector<VideoClip> load_dataset_dir(const std::string& dir, int num_refs) {
  std::vector<std::string> clip_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) clip_dirs.push_back(e.path().string());
  std::sort(clip_dirs.begin(), clip_dirs.end());
  std::vector<VideoClip> out;
  if (clip_dirs.empty()) {
    out.push_back(load_clip_dir(dir, num_refs));
  } else {
    for (const auto& d : clip_dirs) out.push_back(load_clip_dir(d, num_refs));
  }
  return out;
}

// ---- commands ----

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  std::vector<VideoClip> clips = data_dir.empty()
                                     ? make_synth_dataset(cfg, cfg.num_train_clips, cfg.seed + 1000)
                                     : load_dataset_dir(data_dir, cfg.num_refs);
  for (const auto& c : clips)
    if (c.masks.size() != c.frames.size())
      throw std::runtime_error("training clips need ground-truth masks");

  Model model = init_model(cfg);
  {
    std::ofstream cf(fs::path(out_dir) / "config.json");
    cf << cfg.to_json() << "\n";
  }
  std::ofstream log(fs::path(out_dir) / "train.jsonl");
  TrainResult res = train_model(model, clips, cfg.epochs, cfg.batch_size, cfg.lr, cfg.weight_decay, &log);
  save_model(model, (fs::path(out_dir) / "model.ckpt").string());
  std::cout << "trained " << res.steps << " steps, final loss " << res.final_loss << ", checkpoint "
            << (fs::path(out_dir) / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& stream_dir, const std::string& out_dir,
              const RunConfig& overrides) {
  Model model = load_model(checkpoint);
  if (overrides.no_multiscale != model.cfg.no_multiscale)
    throw std::runtime_error("no_multiscale changes parameter shapes; retrain instead of toggling it");
  model.cfg.no_cma = overrides.no_cma;
  model.cfg.no_dmr = overrides.no_dmr;
  model.cfg.no_causal = overrides.no_causal;
  model.cfg.single_source = overrides.single_source;

  VideoClip clip = load_clip_dir(stream_dir, model.cfg.num_refs);
  fs::create_directories(out_dir);
  std::ofstream audit(fs::path(out_dir) / "audit.jsonl");
  StreamingSegmenter seg(model);
  double total_ms = 0.0;
  char name[32];
  for (int t = 0; t < clip.length(); ++t) {
    auto step = seg.push(clip.frames[t]);
    std::snprintf(name, sizeof(name), "pred_%03d.png", t);
    write_mask_png((fs::path(out_dir) / name).string(), step.prob);
    audit << step_audit_jsonl(step) << "\n";
    total_ms += step.latency_ms;
  }
  nlohmann::json summary = {{"frames", clip.length()},
                            {"mean_latency_ms", total_ms / std::max(1, clip.length())}};
  std::ofstream sf(fs::path(out_dir) / "summary.json");
  sf << summary.dump(2) << "\n";
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir) {
  // Each subdirectory is a clip; a flat directory is a single clip.
  std::vector<std::string> pred_clips, gt_clips;
  for (const auto& e : fs::directory_iterator(pred_dir))
    if (e.is_directory()) pred_clips.push_back(e.path().filename().string());
  std::sort(pred_clips.begin(), pred_clips.end());
  if (pred_clips.empty()) pred_clips.push_back("");
  std::vector<std::vector<MetricReport>> per_clip;
  for (const auto& sub : pred_clips) {
    auto preds = list_pngs((fs::path(pred_dir) / sub).string(), "pred_");
    auto gts = list_pngs((fs::path(gt_dir) / sub).string(), "mask_");
    if (preds.size() != gts.size())
      throw std::runtime_error("prediction/ground-truth count mismatch in clip '" + sub + "'");
    std::vector<MetricReport> frames;
    for (std::size_t i = 0; i < preds.size(); ++i)
      frames.push_back(frame_metrics(read_mask_png(preds[i]), read_mask_png(gts[i])));
    per_clip.push_back(std::move(frames));
  }
  MetricReport agg = evaluate_dataset(per_clip);
  std::cout << metrics_table({{"dataset", agg}}) << agg.to_json() << "\n";
  return 0;
}

int cmd_check(const std::string& report_path, std::uint64_t seed) {
  auto results = checks::run_all(seed);
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : "  (" + r.detail + ")")
              << "\n";
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << checks::to_json(results) << "\n";
  }
  return all ? 0 : 1;
}

int cmd_overlay(const std::string& pred_dir, const std::string& frames_dir, const std::string& out_dir) {
  auto preds = list_pngs(pred_dir, "pred_");
  auto frames = list_pngs(frames_dir, "frame_");
  if (preds.size() != frames.size()) throw std::runtime_error("prediction/frame count mismatch");
  fs::create_directories(out_dir);
  char name[32];
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::snprintf(name, sizeof(name), "overlay_%03zu.png", i);
    write_overlay_png((fs::path(out_dir) / name).string(), read_frame_png(frames[i]),
                      read_mask_png(preds[i]));
  }
  std::cout << "wrote " << preds.size() << " overlays to " << out_dir << "\n";
  return 0;
}

int cmd_gen_data(const SynthConfig& scfg, int num_clips, int num_refs, const std::string& out_dir) {
  scfg.validate();
  SynthConfig c = scfg;
  char name[32];
  for (int i = 0; i < num_clips; ++i) {
    c.seed = scfg.seed + static_cast<std::uint64_t>(i);
    VideoClip clip = gen_clip(c, num_refs);
    std::snprintf(name, sizeof(name), "clip_%03d", i);
    export_clip(clip, c, (fs::path(out_dir) / name).string());
  }
  std::cout << "wrote " << num_clips << " clips to " << out_dir << "\n";
  return 0;
}

}  // namespace cmsa

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cmsa/pipeline.hpp"

namespace {

cmsa::RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return cmsa::RunConfig::from_json(buf.str());
}

// Config file first, individual flags override.
void add_config_options(CLI::App* cmd, std::string& config_path, cmsa::RunConfig& cfg) {
  cmd->add_option("--config", config_path, "JSON config file; flags override its values");
  cmd->add_option("--image-size", cfg.image_size, "square frame size, multiple of 32");
  cmd->add_option("--channels", cfg.channels, "unified channel dimension C");
  cmd->add_option("--heads", cfg.heads, "attention heads");
  cmd->add_option("--clip-len", cfg.clip_len, "frames per clip T");
  cmd->add_option("--refs", cfg.num_refs, "reference frames R");
  cmd->add_option("--target-stage", cfg.target_stage, "aggregation stage s");
  cmd->add_option("--cooldown-sem", cfg.cooldown_sem, "semantic slot cooldown");
  cmd->add_option("--cooldown-conf", cfg.cooldown_conf, "confidence slot cooldown");
  cmd->add_option("--lr", cfg.lr, "learning rate");
  cmd->add_option("--weight-decay", cfg.weight_decay, "AdamW weight decay");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--batch", cfg.batch_size, "clips per optimizer step");
  cmd->add_option("--seed", cfg.seed, "global seed");
  cmd->add_option("--train-clips", cfg.num_train_clips, "synthetic training clips");
  cmd->add_option("--contrast", cfg.synth_contrast, "synthetic fg/bg contrast");
  cmd->add_option("--motion", cfg.synth_motion, "synthetic motion amplitude, px");
  cmd->add_option("--scale-jitter", cfg.synth_scale_jitter, "synthetic area jitter");
  cmd->add_option("--noise", cfg.synth_noise, "synthetic noise sigma");
  cmd->add_flag("--no-cma", cfg.no_cma, "bypass causal multi-scale aggregation");
  cmd->add_flag("--no-dmr", cfg.no_dmr, "freeze reference slots to frame 0");
  cmd->add_flag("--no-multiscale", cfg.no_multiscale, "tokens from the target stage only");
  cmd->add_flag("--no-causal", cfg.no_causal, "full attention visibility");
  cmd->add_flag("--single-source", cfg.single_source, "use the semantic slot for both references");
}

}  // namespace

int main(int argc, char** argv) {
  // Pre-scan for --config so file values become the defaults that explicit
  // flags then override.
  std::string pre_config;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") pre_config = argv[i + 1];

  CLI::App app{"CMSA-Net reference implementation: causal multi-scale aggregation with dynamic "
               "multi-source reference selection"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "runs/train";
  cmsa::RunConfig cfg;
  try {
    cfg = load_config(pre_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  auto* train = app.add_subcommand("train", "train on synthetic or exported clips");
  add_config_options(train, config_path, cfg);
  train->add_option("--data", data_dir, "clip directory (default: generate synthetic clips)");
  train->add_option("--out", out_dir, "output directory for checkpoint and logs");

  std::string checkpoint, stream_dir, infer_out = "runs/infer";
  auto* infer = app.add_subcommand("infer", "streaming inference with reference-slot maintenance");
  add_config_options(infer, config_path, cfg);
  infer->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  infer->add_option("--stream", stream_dir, "directory of frame_###.png")->required();
  infer->add_option("--out", infer_out, "output directory");

  std::string pred_dir, gt_dir;
  auto* eval = app.add_subcommand("eval", "segmentation metrics for predictions vs ground truth");
  eval->add_option("--pred", pred_dir, "prediction directory (pred_###.png)")->required();
  eval->add_option("--gt", gt_dir, "ground-truth directory (mask_###.png)")->required();

  std::string report_path;
  std::uint64_t check_seed = 1;
  auto* check = app.add_subcommand("check", "run all verification suites against the oracles");
  check->add_option("--report", report_path, "write JSON report here");
  check->add_option("--seed", check_seed, "seed for randomized suites");

  std::string ov_pred, ov_frames, ov_out = "runs/overlay";
  auto* overlay = app.add_subcommand("overlay", "draw prediction contours onto frames");
  overlay->add_option("--pred", ov_pred, "prediction directory")->required();
  overlay->add_option("--frames", ov_frames, "frame directory")->required();
  overlay->add_option("--out", ov_out, "output directory");

  cmsa::SynthConfig scfg;
  int gen_clips = 1, gen_refs = 2;
  std::string gen_out = "runs/data";
  auto* gen = app.add_subcommand("gen-data", "export synthetic clips as PNG directories");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--clips", gen_clips, "number of clips");
  gen->add_option("--height", scfg.height, "frame height, multiple of 32");
  gen->add_option("--width", scfg.width, "frame width, multiple of 32");
  gen->add_option("--frames", scfg.num_frames, "frames per clip");
  gen->add_option("--refs", gen_refs, "reference frames recorded in meta");
  gen->add_option("--contrast", scfg.contrast, "fg/bg contrast");
  gen->add_option("--motion", scfg.motion_amplitude, "motion amplitude, px");
  gen->add_option("--scale-jitter", scfg.scale_jitter, "area jitter");
  gen->add_option("--noise", scfg.noise_sigma, "noise sigma");
  gen->add_option("--seed", scfg.seed, "base seed (clip i uses seed+i)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmsa::cmd_train(cfg, data_dir, out_dir);
    if (infer->parsed()) return cmsa::cmd_infer(checkpoint, stream_dir, infer_out, cfg);
    if (eval->parsed()) return cmsa::cmd_eval(pred_dir, gt_dir);
    if (check->parsed()) return cmsa::cmd_check(report_path, check_seed);
    if (overlay->parsed()) return cmsa::cmd_overlay(ov_pred, ov_frames, ov_out);
    if (gen->parsed()) return cmsa::cmd_gen_data(scfg, gen_clips, gen_refs, gen_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <string>

#include "cmsa/cma.hpp"
#include "cmsa/decoder.hpp"
#include "cmsa/encoder.hpp"
#include "cmsa/losses.hpp"

namespace cmsa {

struct RunConfig {
  int image_size = 352;
  int channels = 32;      // unified channel dimension C (= attention dim d)
  int heads = 4;
  int clip_len = 6;       // T
  int num_refs = 2;       // R
  int target_stage = 3;   // s
  int cooldown_sem = 5;
  int cooldown_conf = 1;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int epochs = 30;
  int batch_size = 4;
  std::uint64_t seed = 1;

  // ablation flags (Table-4-style rows)
  bool no_cma = false;
  bool no_dmr = false;
  bool no_multiscale = false;
  bool no_causal = false;
  bool single_source = false;

  // synthetic data knobs for train/infer without an explicit data directory
  int num_train_clips = 16;
  double synth_contrast = 0.5;
  double synth_motion = 4.0;
  double synth_scale_jitter = 0.2;
  double synth_noise = 0.02;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& json);
};

struct Model {
  RunConfig cfg;
  EncoderParams encoder;
  CMAParams cma;
  DecoderParams decoder;

  ParamStore params() const;
};

Model init_model(const RunConfig& cfg);

struct ClipForward {
  std::vector<FrameTokens> tokens;  // per-frame CMA inputs
  std::vector<ag::Var> agg;         // per-frame fused features [C,Hs,Ws]
  ag::Var coarse_cur;               // current-frame coarse logits [Hs,Ws]
  PredictionTriple preds;           // current-frame logits at [H,W]
  FeaturePyramid cur_pyramid;
};

// Training-time forward: encode all frames, run CMA under the clip's literal
// role layout, decode the current frame.
ClipForward forward_clip(const Model& model, const std::vector<Tensor>& frames,
                         const std::vector<Role>& roles);

// Forward over pre-built token sets (streaming inference path, where the
// reference frames come from DMR slots). needs cur_pyramid of the current
// frame for decoding.
ClipForward forward_tokens(const Model& model, const std::vector<FrameTokens>& tokens,
                           const FeaturePyramid& cur_pyramid, int out_h, int out_w);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace cmsa

#include "cmsa/model.hpp"

#include <json.hpp>
#include <stdexcept>

#include "cmsa/checkpoint.hpp"

namespace cmsa {

void RunConfig::validate() const {
  if (image_size < 32 || image_size % 32 != 0)
    throw std::invalid_argument("image_size must be a positive multiple of 32");
  if (channels < heads || channels % heads != 0)
    throw std::invalid_argument("channels must be divisible by heads");
  if (target_stage < 0 || target_stage > 3) throw std::invalid_argument("target_stage must be in [0,3]");
  if (num_refs < 1) throw std::invalid_argument("num_refs must be >= 1");
  if (clip_len <= num_refs + 1)
    throw std::invalid_argument("clip_len must exceed num_refs + 1");
  if (cooldown_sem < 1 || cooldown_conf < 1) throw std::invalid_argument("cooldowns must be >= 1");
  if (lr <= 0 || weight_decay < 0) throw std::invalid_argument("bad optimizer settings");
  if (epochs < 0 || batch_size < 1 || num_train_clips < 1)
    throw std::invalid_argument("bad training settings");
}

std::string RunConfig::to_json() const {
  nlohmann::json j;
  j["image_size"] = image_size;
  j["channels"] = channels;
  j["heads"] = heads;
  j["clip_len"] = clip_len;
  j["num_refs"] = num_refs;
  j["target_stage"] = target_stage;
  j["cooldown_sem"] = cooldown_sem;
  j["cooldown_conf"] = cooldown_conf;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["no_cma"] = no_cma;
  j["no_dmr"] = no_dmr;
  j["no_multiscale"] = no_multiscale;
  j["no_causal"] = no_causal;
  j["single_source"] = single_source;
  j["num_train_clips"] = num_train_clips;
  j["synth_contrast"] = synth_contrast;
  j["synth_motion"] = synth_motion;
  j["synth_scale_jitter"] = synth_scale_jitter;
  j["synth_noise"] = synth_noise;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& json) {
  nlohmann::json j = nlohmann::json::parse(json);
  RunConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("image_size", c.image_size);
  get("channels", c.channels);
  get("heads", c.heads);
  get("clip_len", c.clip_len);
  get("num_refs", c.num_refs);
  get("target_stage", c.target_stage);
  get("cooldown_sem", c.cooldown_sem);
  get("cooldown_conf", c.cooldown_conf);
  get("lr", c.lr);
  get("weight_decay", c.weight_decay);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("seed", c.seed);
  get("no_cma", c.no_cma);
  get("no_dmr", c.no_dmr);
  get("no_multiscale", c.no_multiscale);
  get("no_causal", c.no_causal);
  get("single_source", c.single_source);
  get("num_train_clips", c.num_train_clips);
  get("synth_contrast", c.synth_contrast);
  get("synth_motion", c.synth_motion);
  get("synth_scale_jitter", c.synth_scale_jitter);
  get("synth_noise", c.synth_noise);
  c.validate();
  return c;
}

ParamStore Model::params() const {
  ParamStore store;
  encoder.collect(store);
  cma.collect(store);
  decoder.collect(store);
  return store;
}

Model init_model(const RunConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  m.encoder = init_encoder(cfg.seed, cfg.channels);
  m.cma = init_cma(cfg.seed + 1, cfg.channels, cfg.channels, cfg.heads, cfg.target_stage,
                   !cfg.no_multiscale);
  m.decoder = init_decoder(cfg.seed + 2, cfg.channels, cfg.channels);
  return m;
}

ClipForward forward_tokens(const Model& model, const std::vector<FrameTokens>& tokens,
                           const FeaturePyramid& cur_pyramid, int out_h, int out_w) {
  ClipForward fwd;
  fwd.tokens = tokens;
  fwd.cur_pyramid = cur_pyramid;
  if (model.cfg.no_cma) {
    // Aggregation disabled: the current frame's aligned feature passes through.
    for (const auto& f : tokens) fwd.agg.push_back(f.aligned);
  } else {
    fwd.agg = cma_forward_tokens(tokens, model.cma, model.cfg.no_causal);
  }
  const ag::Var& cur_agg = fwd.agg.back();
  fwd.coarse_cur = coarse_head(model.decoder, cur_agg);
  fwd.preds = decode(model.decoder, cur_agg, cur_pyramid, out_h, out_w);
  return fwd;
}

ClipForward forward_clip(const Model& model, const std::vector<Tensor>& frames,
                         const std::vector<Role>& roles) {
  if (frames.empty() || frames.size() != roles.size())
    throw std::invalid_argument("forward_clip: frames/roles size mismatch");
  validate_roles(roles);
  std::vector<FrameTokens> tokens;
  FeaturePyramid cur_pyramid;
  for (size_t t = 0; t < frames.size(); ++t) {
    FeaturePyramid pyr = encode_frame(model.encoder, ag::Var::constant(frames[t]));
    tokens.push_back(build_token_set(pyr, model.cma, roles[t]));
    if (t + 1 == frames.size()) cur_pyramid = pyr;
  }
  const int h = frames.back().shape[1], w = frames.back().shape[2];
  return forward_tokens(model, tokens, cur_pyramid, h, w);
}

void save_model(const Model& model, const std::string& path) {
  ParamStore store = model.params();
  save_params(path, store, model.cfg.to_json());
}

Model load_model(const std::string& path) {
  // Read the config first so the parameter layout matches before loading.
  std::string meta;
  load_container(path, &meta);
  RunConfig cfg = RunConfig::from_json(meta);
  Model m = init_model(cfg);
  ParamStore store = m.params();
  load_params(path, store);
  return m;
}

}  // namespace cmsa

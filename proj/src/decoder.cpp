#include "cmsa/decoder.hpp"

#include <stdexcept>

namespace cmsa {

void DecoderParams::collect(ParamStore& store, const std::string& prefix) const {
  store.add(prefix + ".coarse.w", coarse.w);
  store.add(prefix + ".coarse.b", coarse.b);
  auto stage = [&](const std::string& name, const Stage& s) {
    store.add(prefix + "." + name + ".fuse1.w", s.fuse1.w);
    store.add(prefix + "." + name + ".fuse1.b", s.fuse1.b);
    store.add(prefix + "." + name + ".norm.gamma", s.norm.gamma);
    store.add(prefix + "." + name + ".norm.beta", s.norm.beta);
    store.add(prefix + "." + name + ".fuse2.w", s.fuse2.w);
    store.add(prefix + "." + name + ".fuse2.b", s.fuse2.b);
    store.add(prefix + "." + name + ".head.w", s.head.w);
    store.add(prefix + "." + name + ".head.b", s.head.b);
  };
  stage("dec1", dec1);
  stage("dec2", dec2);
}

DecoderParams init_decoder(std::uint64_t seed, int base_channels, int channels) {
  Rng rng(seed);
  DecoderParams p;
  p.channels = channels;
  p.coarse = ConvLayer::init(rng, 1, channels, 1, 1, 0);
  auto stage = [&](int skip_channels) {
    DecoderParams::Stage s;
    s.fuse1 = ConvLayer::init(rng, channels, channels + skip_channels, 3, 1, 1);
    s.norm = NormLayer::init(channels);
    s.fuse2 = ConvLayer::init(rng, channels, channels, 3, 1, 1);
    s.head = ConvLayer::init(rng, 1, channels, 1, 1, 0);
    return s;
  };
  p.dec1 = stage(stage_channels(base_channels, 2));
  p.dec2 = stage(stage_channels(base_channels, 1));
  return p;
}

ag::Var coarse_head(const DecoderParams& params, const ag::Var& agg) {
  if (agg.value().rank() != 3) throw std::invalid_argument("coarse_head: expects [C,Hs,Ws]");
  ag::Var logits = params.coarse(agg);  // [1,Hs,Ws]
  return ag::reshape(logits, {logits.value().dim(1), logits.value().dim(2)});
}

namespace {

ag::Var run_stage(const DecoderParams::Stage& s, const ag::Var& x, const ag::Var& skip) {
  // upsample to the skip's spatial size, channel-concat, two 3x3 convs
  ag::Var up = ag::bilinear_resize(x, skip.value().dim(1), skip.value().dim(2));
  ag::Var fused = ag::concat0({up, skip});
  return s.fuse2(ag::gelu(s.norm(s.fuse1(fused))));
}

ag::Var to_fullres(const ag::Var& logits_chw, int out_h, int out_w) {
  ag::Var r = ag::bilinear_resize(logits_chw, out_h, out_w);
  return ag::reshape(r, {out_h, out_w});
}

}  // namespace

PredictionTriple decode(const DecoderParams& params, const ag::Var& agg, const FeaturePyramid& pyramid,
                        int out_h, int out_w) {
  if (agg.value().rank() != 3 || agg.value().dim(0) != params.channels)
    throw std::invalid_argument("decode: aggregated feature has wrong channel count");
  PredictionTriple out;
  ag::Var p1 = params.coarse(agg);
  out.pred1 = to_fullres(p1, out_h, out_w);

  ag::Var f1 = run_stage(params.dec1, agg, pyramid[2]);
  out.pred2 = to_fullres(params.dec1.head(f1), out_h, out_w);

  ag::Var f2 = run_stage(params.dec2, f1, pyramid[1]);
  out.pred3 = to_fullres(params.dec2.head(f2), out_h, out_w);
  return out;
}

}  // namespace cmsa

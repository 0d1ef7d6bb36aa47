#pragma once

#include "cmsa/encoder.hpp"

namespace cmsa {

// Multi-stage prediction heads. pred1 comes from a 1x1 conv on the aggregated
// feature; Decoder1 fuses it with the stage-2 feature, Decoder2 with stage-1.
// All logits are bilinearly resized to the ground-truth resolution.
struct PredictionTriple {
  ag::Var pred1;
  ag::Var pred2;
  ag::Var pred3;  // final output at inference
};

struct DecoderParams {
  int channels = 32;

  ConvLayer coarse;  // 1x1, C -> 1
  struct Stage {
    ConvLayer fuse1;  // concat channels -> C, 3x3
    NormLayer norm;
    ConvLayer fuse2;  // C -> C, 3x3
    ConvLayer head;   // 1x1, C -> 1
  };
  Stage dec1;  // consumes agg ++ stage2
  Stage dec2;  // consumes dec1 features ++ stage1

  void collect(ParamStore& store, const std::string& prefix = "decoder") const;
};

DecoderParams init_decoder(std::uint64_t seed, int base_channels, int channels);

// 1x1 convolution producing single-channel logits at stage resolution.
ag::Var coarse_head(const DecoderParams& params, const ag::Var& agg);

// agg: fused CMA feature of the current frame; pyramid: that frame's feature
// pyramid; (out_h, out_w): ground-truth resolution.
PredictionTriple decode(const DecoderParams& params, const ag::Var& agg, const FeaturePyramid& pyramid,
                        int out_h, int out_w);

}  // namespace cmsa

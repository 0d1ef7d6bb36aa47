#pragma once

#include <array>
#include <cstdint>

#include "cmsa/params.hpp"
#include "cmsa/synth.hpp"

namespace cmsa {

// Per-frame 4-stage feature pyramid with the fixed shape law
//   stage0 [2C, H/4, W/4], stage1 [4C, H/8, W/8],
//   stage2 [8C, H/16, W/16], stage3 [16C, H/32, W/32].
using FeaturePyramid = std::array<ag::Var, 4>;

inline int stage_channels(int base_channels, int stage) { return base_channels * (2 << stage); }
inline int stage_divisor(int stage) { return 4 << stage; }

// Tiny randomly initialized pyramid encoder: a stride-2 stem followed by four
// downsampling blocks (stride-2 conv, channel layer norm, GELU, one residual
// conv block each). Weights are shared across frames.
struct EncoderParams {
  int base_channels = 32;

  ConvLayer stem;         // 3 -> C, stride 2
  NormLayer stem_norm;
  struct Block {
    ConvLayer down;       // in -> out, stride 2
    NormLayer down_norm;
    ConvLayer res1;       // out -> out
    NormLayer res_norm;
    ConvLayer res2;       // out -> out
  };
  std::array<Block, 4> blocks;

  void collect(ParamStore& store, const std::string& prefix = "encoder") const;
  // Closed-form parameter count for base channels C (documented in README).
  static long expected_param_count(int base_channels);
};

EncoderParams init_encoder(std::uint64_t seed, int base_channels);

// Encodes one [3,H,W] frame; H and W must be divisible by 32.
FeaturePyramid encode_frame(const EncoderParams& params, const ag::Var& frame);

// Per-frame application of the shared encoder (no temporal mixing).
std::vector<FeaturePyramid> encode_clip(const EncoderParams& params, const VideoClip& clip);

}  // namespace cmsa

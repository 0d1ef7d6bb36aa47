#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cmsa/encoder.hpp"

namespace cmsa {

// Causal Multi-scale Aggregation: cross-scale alignment, per-frame token
// sets, role-dependent causal attention and residual/FFN fusion.
struct CMAParams {
  int target_stage = 3;
  int num_heads = 4;
  int model_dim = 32;   // d; divisible by num_heads
  int channels = 32;    // C, unified channel dimension
  bool multiscale = true;

  struct AlignPair {
    ConvLayer conv3;  // stage_u channels -> C, 3x3
    ConvLayer conv1;  // C -> C, 1x1
  };
  std::array<AlignPair, 4> align;

  // The paper's W_Q has two input arities (token sets for reference frames,
  // single-scale features for adjacent/current); two projections keep the
  // equations well-typed.
  Linear q_feat;  // C -> d
  Linear q_tok;   // token channels -> d
  Linear k;       // token channels -> d
  Linear v;       // token channels -> d
  Linear out;     // d -> C
  NormLayer ln;   // pre-FFN layer norm on C channels
  Linear ffn1;    // C -> 4C
  Linear ffn2;    // 4C -> C

  int token_channels() const { return multiscale ? 4 * channels : channels; }
  void collect(ParamStore& store, const std::string& prefix = "cma") const;
};

CMAParams init_cma(std::uint64_t seed, int base_channels, int channels, int num_heads,
                   int target_stage = 3, bool multiscale = true);

// Resize to the target stage's spatial size, then 3x3 conv, then 1x1 conv.
ag::Var align_feature(const ag::Var& feature, int source_stage, int target_h, int target_w,
                      const CMAParams& params);

// Per-frame multi-scale token grid plus the aligned target-stage feature.
struct FrameTokens {
  ag::Var tokens;   // [(S*C) or C, Hs, Ws]
  ag::Var aligned;  // [C, Hs, Ws] — residual base / adjacent & current query source
  Role role = Role::Current;
};

FrameTokens build_token_set(const FeaturePyramid& pyramid, const CMAParams& params, Role role);

// Indices of frames whose tokens frame t may attend to. Reference frames see
// only themselves; adjacent frame t sees references plus adjacents <= t; the
// current frame sees everything. full_visibility lifts the causal constraint.
std::vector<int> causal_frames(const std::vector<Role>& roles, int t, bool full_visibility = false);

// Single-head scaled dot-product attention; scale is 1/sqrt(Q column count).
ag::Var attention(const ag::Var& q, const ag::Var& k, const ag::Var& v);

struct CmaFrameAudit {
  int frame = 0;
  std::string role;
  std::vector<int> kv_frames;
  double row_sum_min = 0.0;
  double row_sum_max = 0.0;
};

// Full module over one role-ordered clip of token sets. Returns the fused
// per-frame features [C,Hs,Ws].
std::vector<ag::Var> cma_forward_tokens(const std::vector<FrameTokens>& frames, const CMAParams& params,
                                        bool full_visibility = false,
                                        std::vector<CmaFrameAudit>* audit = nullptr);

std::vector<ag::Var> cma_forward(const std::vector<FeaturePyramid>& pyramids,
                                 const std::vector<Role>& roles, const CMAParams& params,
                                 bool full_visibility = false,
                                 std::vector<CmaFrameAudit>* audit = nullptr);

std::string audit_to_json(const std::vector<CmaFrameAudit>& audit);

}  // namespace cmsa

#pragma once

#include <functional>
#include <vector>

#include "cmsa/cma.hpp"
#include "cmsa/synth.hpp"

namespace cmsa::oracle {

// Brute-force references used by tests and the `check` subcommand. They share
// parameter values with the implementation but none of its code paths; all
// math here is explicit double-precision loops.

// Boolean may-attend matrix over the full clip token sequence, one row/column
// per token, block-derived from frame roles.
struct VisibilityMask {
  int tokens_per_frame = 0;
  std::vector<std::vector<bool>> may_attend;  // [T*N][T*N]
};

VisibilityMask visibility_mask(const std::vector<Role>& roles, int tokens_per_frame,
                               bool full_visibility = false);

struct OracleFrame {
  Tensor tokens;   // [(S*C) or C, Hs, Ws]
  Tensor aligned;  // [C, Hs, Ws]
  Role role = Role::Current;
};

// Independent recomputation of the alignment + token-set stage of CMA from a
// frame's raw pyramid values.
OracleFrame oracle_token_set(const std::array<Tensor, 4>& pyramid, Role role, const CMAParams& params);

// Monolithic realization of CMA: one dense attention over the whole clip with
// -inf on masked entries, then the residual/FFN fusion per frame. The mask
// must be consistent with the frame roles.
std::vector<Tensor> masked_dense_attention(const std::vector<OracleFrame>& frames,
                                           const VisibilityMask& mask, const CMAParams& params);

// Plain dense softmax-attention reference for the attention() primitive.
Tensor dense_attention_ref(const Tensor& q, const Tensor& k, const Tensor& v);

// ---- DMR replay oracle ----

struct DmrStreamFrame {
  Tensor feature;  // [C,Hs,Ws]
  Tensor prob;     // [Hs,Ws]
};

struct DmrSlotTrace {
  std::vector<int> sem_frame;   // source frame index of the semantic slot after each step
  std::vector<int> conf_frame;  // same for the confidence slot
};

// Replays the documented update rules over the full history by exhaustive
// re-evaluation at every step.
DmrSlotTrace dmr_oracle(const std::vector<DmrStreamFrame>& stream, int cooldown_sem, int cooldown_conf);

// ---- finite differences ----

// Central finite differences per coordinate; throws on non-finite values.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> point, double eps);

}  // namespace cmsa::oracle

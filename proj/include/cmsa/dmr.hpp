#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "cmsa/cma.hpp"
#include "cmsa/tensor.hpp"

namespace cmsa {

// Dynamic Multi-source Reference: two reference slots (semantic separability
// and prediction confidence), updated during streaming inference by strict
// score improvement under per-slot cooldowns.
constexpr double kDmrEps = 1e-8;

struct Prototypes {
  std::vector<double> mu_fg;
  std::vector<double> mu_bg;
};

// Probability-weighted masked pooling of feat [C,Hs,Ws] under prob [Hs,Ws].
Prototypes compute_prototypes(const Tensor& feat, const Tensor& prob);

// cos with epsilon-guarded norms; a zero vector has cosine 0.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct SemanticScore {
  double s_sep;      // 1 - cos(mu_fg, mu_bg) of the candidate, in [0,2]
  double s_cons;     // cos(cand.mu_fg, cur.mu_fg), in [-1,1]
  double score_sem;  // s_sep + s_cons, in [-1,3]
};
SemanticScore semantic_score(const Prototypes& cand, const Prototypes& cur);

struct ConfidenceScore {
  double c;           // 1 - mean base-2 binary entropy, in [0,1]
  double s_cons;      // cos(cand.mu_fg, cur.mu_fg)
  double score_conf;  // c + s_cons, in [-1,2]
};
ConfidenceScore confidence_score(const Tensor& prob, const Prototypes& cand, const Prototypes& cur);

// mean base-2 binary entropy of a probability map (0*log0 = 0)
double determinacy(const Tensor& prob);

// Everything a frame contributes when later reused as a reference: its fused
// CMA feature, prototypes and frame-static score parts, plus the cached CMA
// inputs (token set / aligned feature) needed to rebuild a clip around it.
struct FrameRecord {
  Tensor feature;       // fused CMA-stage feature [C,Hs,Ws]
  Prototypes protos;
  double s_sep = 0.0;   // static part of the semantic score
  double c = 0.0;       // static part of the confidence score
  Tensor tokens;        // cached token set [(S*C),Hs,Ws]
  Tensor aligned;       // cached aligned target-stage feature [C,Hs,Ws]
};

struct ReferenceSlot {
  FrameRecord record;
  double static_score = 0.0;  // s_sep for the semantic slot, c for the confidence slot
  int last_update_t = 0;
  int cooldown = 1;
};

struct DmrStepAudit {
  int t = 0;
  double sem_slot_score = 0.0, sem_cand_score = 0.0;
  double conf_slot_score = 0.0, conf_cand_score = 0.0;
  bool sem_updated = false, conf_updated = false;
  bool sem_cooldown_blocked = false, conf_cooldown_blocked = false;
};

struct DMRState {
  ReferenceSlot sem_slot;   // cooldown 5 by default
  ReferenceSlot conf_slot;  // cooldown 1 by default
  std::optional<FrameRecord> candidate;  // frame completed at the previous step
  int last_t = -1;
  bool initialized = false;

  static DMRState init(const FrameRecord& first, int cooldown_sem = 5, int cooldown_conf = 1);
};

// One maintenance step after segmenting frame t. The current frame becomes
// the next candidate; each slot is replaced only when the cooldown has
// elapsed and the candidate's full score strictly exceeds the slot's.
DmrStepAudit dmr_step(DMRState& state, const FrameRecord& current, int t);

std::string audit_to_jsonl(const DmrStepAudit& a);

// Role-ordered CMA input for streaming inference: [sem_ref, conf_ref,
// adjacent..., current]. The adjacent buffer is repeat-padded with its oldest
// entry during warm-up.
std::vector<FrameTokens> assemble_clip(const DMRState& state, const std::deque<FrameRecord>& recent,
                                       const FrameRecord& current, int clip_len);

}  // namespace cmsa

#include "cmsa/dmr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace cmsa {

Prototypes compute_prototypes(const Tensor& feat, const Tensor& prob) {
  if (feat.rank() != 3 || prob.rank() != 2 || feat.dim(1) != prob.dim(0) || feat.dim(2) != prob.dim(1))
    throw std::invalid_argument("compute_prototypes: shape mismatch " + feat.shape_str() + " vs " +
                                prob.shape_str());
  int c = feat.dim(0), hw = feat.dim(1) * feat.dim(2);
  Prototypes p;
  p.mu_fg.assign(c, 0.0);
  p.mu_bg.assign(c, 0.0);
  double wfg = 0.0, wbg = 0.0;
  for (int i = 0; i < hw; ++i) {
    double pi = prob.data[i];
    wfg += pi;
    wbg += 1.0 - pi;
  }
  for (int ch = 0; ch < c; ++ch) {
    double sfg = 0.0, sbg = 0.0;
    const double* f = &feat.data[static_cast<std::size_t>(ch) * hw];
    for (int i = 0; i < hw; ++i) {
      sfg += prob.data[i] * f[i];
      sbg += (1.0 - prob.data[i]) * f[i];
    }
    p.mu_fg[ch] = sfg / (wfg + kDmrEps);
    p.mu_bg[ch] = sbg / (wbg + kDmrEps);
  }
  return p;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: size mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < kDmrEps || nb < kDmrEps) return 0.0;
  // rounding must not push the value outside [-1,1] (score bounds rely on it)
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

SemanticScore semantic_score(const Prototypes& cand, const Prototypes& cur) {
  SemanticScore s;
  s.s_sep = 1.0 - cosine(cand.mu_fg, cand.mu_bg);
  s.s_cons = cosine(cand.mu_fg, cur.mu_fg);
  s.score_sem = s.s_sep + s.s_cons;
  return s;
}

double determinacy(const Tensor& prob) {
  double h = 0.0;
  for (double p : prob.data) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("determinacy: prob outside [0,1]");
    double e = 0.0;
    if (p > 0.0 && p < 1.0) e = -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
    h += e;
  }
  return 1.0 - h / static_cast<double>(prob.numel());
}

ConfidenceScore confidence_score(const Tensor& prob, const Prototypes& cand, const Prototypes& cur) {
  ConfidenceScore s;
  s.c = determinacy(prob);
  s.s_cons = cosine(cand.mu_fg, cur.mu_fg);
  s.score_conf = s.c + s.s_cons;
  return s;
}

DMRState DMRState::init(const FrameRecord& first, int cooldown_sem, int cooldown_conf) {
  if (cooldown_sem < 1 || cooldown_conf < 1) throw std::invalid_argument("DMRState: cooldown must be >= 1");
  DMRState st;
  st.sem_slot = {first, first.s_sep, 0, cooldown_sem};
  st.conf_slot = {first, first.c, 0, cooldown_conf};
  st.candidate = first;
  st.last_t = 0;
  st.initialized = true;
  return st;
}

DmrStepAudit dmr_step(DMRState& state, const FrameRecord& current, int t) {
  if (!state.initialized) throw std::logic_error("dmr_step: state not initialized");
  if (t <= state.last_t) throw std::invalid_argument("dmr_step: timestep must be strictly increasing");
  DmrStepAudit audit;
  audit.t = t;

  auto consider = [&](ReferenceSlot& slot, bool is_sem) {
    const FrameRecord& cand = *state.candidate;
    double cand_static = is_sem ? cand.s_sep : cand.c;
    double cand_full = cand_static + cosine(cand.protos.mu_fg, current.protos.mu_fg);
    double slot_full = slot.static_score + cosine(slot.record.protos.mu_fg, current.protos.mu_fg);
    bool cooled = t - slot.last_update_t >= slot.cooldown;
    bool updated = false;
    if (cooled && cand_full > slot_full) {
      slot.record = cand;
      slot.static_score = cand_static;
      slot.last_update_t = t;
      updated = true;
    }
    if (is_sem) {
      audit.sem_slot_score = slot_full;
      audit.sem_cand_score = cand_full;
      audit.sem_updated = updated;
      audit.sem_cooldown_blocked = !cooled;
    } else {
      audit.conf_slot_score = slot_full;
      audit.conf_cand_score = cand_full;
      audit.conf_updated = updated;
      audit.conf_cooldown_blocked = !cooled;
    }
  };
  if (state.candidate) {
    consider(state.sem_slot, true);
    consider(state.conf_slot, false);
  }
  state.candidate = current;
  state.last_t = t;
  return audit;
}

std::string audit_to_jsonl(const DmrStepAudit& a) {
  nlohmann::json j = {{"t", a.t},
                      {"sem", {{"slot_score", a.sem_slot_score},
                               {"cand_score", a.sem_cand_score},
                               {"updated", a.sem_updated},
                               {"cooldown_blocked", a.sem_cooldown_blocked}}},
                      {"conf", {{"slot_score", a.conf_slot_score},
                                {"cand_score", a.conf_cand_score},
                                {"updated", a.conf_updated},
                                {"cooldown_blocked", a.conf_cooldown_blocked}}}};
  return j.dump();
}

namespace {

FrameTokens to_tokens(const FrameRecord& rec, Role role) {
  FrameTokens ft;
  ft.tokens = ag::Var::constant(rec.tokens);
  ft.aligned = ag::Var::constant(rec.aligned);
  ft.role = role;
  return ft;
}

}  // namespace

std::vector<FrameTokens> assemble_clip(const DMRState& state, const std::deque<FrameRecord>& recent,
                                       const FrameRecord& current, int clip_len) {
  constexpr int kRefs = 2;
  if (!state.initialized) throw std::invalid_argument("assemble_clip: empty stream");
  if (clip_len < kRefs + 2) throw std::invalid_argument("assemble_clip: clip_len must be > R+1");
  int n_adj = clip_len - kRefs - 1;
  std::vector<FrameTokens> clip;
  clip.push_back(to_tokens(state.sem_slot.record, Role::Reference));
  clip.push_back(to_tokens(state.conf_slot.record, Role::Reference));
  // last n_adj completed frames, repeat-padded from the oldest available
  // (or the current frame during step-0 warm-up)
  for (int i = 0; i < n_adj; ++i) {
    int idx = static_cast<int>(recent.size()) - n_adj + i;
    const FrameRecord* rec;
    if (recent.empty())
      rec = &current;
    else
      rec = &recent[static_cast<std::size_t>(std::max(idx, 0))];
    clip.push_back(to_tokens(*rec, Role::Adjacent));
  }
  clip.push_back(to_tokens(current, Role::Current));
  return clip;
}

}  // namespace cmsa

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cmsa::checks {

// Verification suites backing the `check` subcommand and the acceptance
// tests. Every suite compares the implementation against the brute-force
// oracles or closed-form expectations; none of them share code paths with the
// modules under test beyond parameter values.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // measured statistic, e.g. max deviation
};

// Pyramid shape law over (H, W) in {64, 128, 352} and C in {8, 32}.
CheckResult check_shape_law();

// Bit-identical invariance of per-frame CMA outputs to perturbations of
// frames they may not attend to (real encoder, every perturbed frame index).
CheckResult check_causality(std::uint64_t seed, int image_size, int base_channels, int clip_len,
                            int num_refs);

// attention() primitive vs an independent dense softmax-attention loop.
CheckResult check_attention_primitive(std::uint64_t seed, double tol);

// Token-set construction vs the oracle recomputation from raw pyramids.
CheckResult check_token_set(std::uint64_t seed, double tol);

// cma_forward_tokens vs one monolithic masked dense attention over the whole
// clip; alternates causal and full-visibility clips.
CheckResult check_masked_dense(std::uint64_t seed, int num_clips, double tol);

// Analytic gradients of total_loss through decoder + CMA vs central finite
// differences, per parameter tensor, on a small token-level instance.
CheckResult check_gradients(std::uint64_t seed, double eps, double tol);

// Incremental dmr_step slot decisions vs from-scratch replay.
CheckResult check_dmr_replay(std::uint64_t seed, int num_streams, int steps, int cooldown_sem,
                             int cooldown_conf);

// Determinacy spot values: 1 on binary maps, 0 at p=0.5, 1-H2(0.9) at 0.9.
CheckResult check_determinacy_values();

// s_sep in [0,2], s_cons in [-1,1], Score_sem in [-1,3], Score_conf in [-1,2]
// over random draws.
CheckResult check_score_bounds(std::uint64_t seed, int draws);

// dice(g,g) ~ 0, dice(1-g,g) ~ 1; total loss equals the sum of its parts.
CheckResult check_loss_sanity(std::uint64_t seed);

// Perfect prediction puts all six metrics at their optimum; MAE complement
// symmetry on random pairs.
CheckResult check_metric_sanity(std::uint64_t seed);

// Save/load through the tensor container is bit-exact.
CheckResult check_checkpoint_roundtrip(std::uint64_t seed);

std::vector<CheckResult> run_all(std::uint64_t seed);
std::string to_json(const std::vector<CheckResult>& results);

}  // namespace cmsa::checks

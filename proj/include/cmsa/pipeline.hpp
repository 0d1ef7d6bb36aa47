#pragma once

#include <deque>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmsa/dmr.hpp"
#include "cmsa/model.hpp"
#include "cmsa/synth.hpp"

namespace cmsa {

// Independent clips drawn from per-clip seeds seed0, seed0+1, ...
std::vector<VideoClip> make_synth_dataset(const RunConfig& cfg, int num_clips, std::uint64_t seed0);

struct TrainResult {
  long steps = 0;
  double final_loss = 0.0;
  double final_dice_loss = 0.0;  // dice loss of the final head on the last batch
};

// AdamW over the summed per-head losses; one optimizer step per batch of
// clips (loss averaged over the batch). References are the clip's literal
// first R frames. Throws on a non-finite loss. log, when given, receives one
// JSONL line per step.
TrainResult train_model(Model& model, const std::vector<VideoClip>& clips, int epochs, int batch_size,
                        double lr, double weight_decay, std::ostream* log = nullptr);

// Strictly sequential stateful inference: encode the incoming frame, assemble
// [sem_ref, conf_ref, adjacent..., current] from the DMR slots and the recent
// buffer, segment, then run the slot-maintenance step.
class StreamingSegmenter {
 public:
  explicit StreamingSegmenter(Model model);

  struct Step {
    Tensor prob;         // [H,W], final head
    Tensor coarse_prob;  // [Hs,Ws], used for prototypes / confidence
    int t = 0;
    int sem_frame = 0;   // source frame index of each slot as used for this frame
    int conf_frame = 0;
    DmrStepAudit audit;  // all-zero for frame 0 (slots are initialized, not stepped)
    double latency_ms = 0.0;
  };

  Step push(const Tensor& frame);
  int frames_seen() const { return t_ + 1; }
  const DMRState& state() const { return state_; }

 private:
  Model model_;
  DMRState state_;
  std::deque<FrameRecord> recent_;
  int t_ = -1;
  int sem_frame_ = 0, conf_frame_ = 0;
};

std::string step_audit_jsonl(const StreamingSegmenter::Step& step);

// CLI entry points; each returns a process exit code.
int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir);
int cmd_infer(const std::string& checkpoint, const std::string& stream_dir, const std::string& out_dir,
              const RunConfig& overrides);
int cmd_eval(const std::string& pred_dir, const std::string& gt_dir);
int cmd_check(const std::string& report_path, std::uint64_t seed);
int cmd_overlay(const std::string& pred_dir, const std::string& frames_dir, const std::string& out_dir);
int cmd_gen_data(const SynthConfig& scfg, int num_clips, int num_refs, const std::string& out_dir);

// Directory-backed clip loading (gen-data layout: clip_### subdirectories or
// a single directory of frame_###.png / mask_###.png).
VideoClip load_clip_dir(const std::string& dir, int num_refs);
std::vector<VideoClip> load_dataset_dir(const std::string& dir, int num_refs);

}  // namespace cmsa

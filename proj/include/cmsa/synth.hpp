#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmsa/rng.hpp"
#include "cmsa/tensor.hpp"

namespace cmsa {

enum class Role { Reference, Adjacent, Current };

std::string role_name(Role r);

struct SynthConfig {
  int height = 64;
  int width = 64;
  int num_frames = 6;
  double contrast = 0.6;        // foreground-background intensity gap, [0,1]
  double motion_amplitude = 4;  // max centroid displacement per frame, px
  double scale_jitter = 0.2;    // relative area change per frame, [0,1]
  double noise_sigma = 0.02;    // additive gaussian noise std
  std::uint64_t seed = 1;

  void validate() const;
};

struct VideoClip {
  // frames[t]: [3,H,W] intensities in [0,1]; masks[t]: [H,W] in {0,1}
  std::vector<Tensor> frames;
  std::vector<Tensor> masks;
  std::vector<Role> roles;
  std::vector<int> timestamps;

  int length() const { return static_cast<int>(frames.size()); }
};

void validate_roles(const std::vector<Role>& roles);

// Streaming generator: frame t of a stream equals frame t of gen_clip with
// num_frames = stream length. One soft-edged ellipse, random-walk centroid,
// multiplicative area jitter.
class ClipGenerator {
 public:
  explicit ClipGenerator(const SynthConfig& cfg);
  // Produces the next (frame, mask) pair.
  std::pair<Tensor, Tensor> next();
  int position() const { return t_; }

 private:
  SynthConfig cfg_;
  Rng rng_;
  int t_ = 0;
  double cx_, cy_;      // ellipse center
  double area_;         // target ellipse area, px^2
  double aspect_;       // a/b axis ratio
  double angle_;        // orientation
  double bg_, fg_;      // intensities
};

// Deterministic clip; roles = reference^R, adjacent*, current (R clamped to
// num_frames-1, default 2).
VideoClip gen_clip(const SynthConfig& cfg, int num_reference = 2);

// Export: directory of frame_###.png / mask_###.png plus meta.json.
void export_clip(const VideoClip& clip, const SynthConfig& cfg, const std::string& dir);

}  // namespace cmsa

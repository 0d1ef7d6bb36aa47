#include "cmsa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmsa {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string role_name(Role r) {
  switch (r) {
    case Role::Reference: return "reference";
    case Role::Adjacent: return "adjacent";
    case Role::Current: return "current";
  }
  return "?";
}

void SynthConfig::validate() const {
  if (height < 32 || width < 32 || height % 32 != 0 || width % 32 != 0)
    throw std::invalid_argument("SynthConfig: height/width must be >= 32 and divisible by 32");
  if (num_frames < 2) throw std::invalid_argument("SynthConfig: num_frames must be >= 2");
  if (contrast < 0.0 || contrast > 1.0) throw std::invalid_argument("SynthConfig: contrast must be in [0,1]");
  if (scale_jitter < 0.0 || scale_jitter > 1.0)
    throw std::invalid_argument("SynthConfig: scale_jitter must be in [0,1]");
  if (motion_amplitude < 0.0 || noise_sigma < 0.0)
    throw std::invalid_argument("SynthConfig: negative motion_amplitude or noise_sigma");
}

void validate_roles(const std::vector<Role>& roles) {
  if (roles.empty()) throw std::invalid_argument("roles: empty");
  // reference*, adjacent*, current — exactly one current and it is last
  int phase = 0;
  int n_cur = 0;
  for (Role r : roles) {
    int p = r == Role::Reference ? 0 : (r == Role::Adjacent ? 1 : 2);
    if (p < phase) throw std::invalid_argument("roles: order must be reference*, adjacent*, current");
    phase = p;
    if (r == Role::Current) ++n_cur;
  }
  if (n_cur != 1 || roles.back() != Role::Current)
    throw std::invalid_argument("roles: exactly one current frame, at the end");
}

ClipGenerator::ClipGenerator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  double m = std::min(cfg_.height, cfg_.width);
  double r0 = rng_.uniform(0.12, 0.20) * m;
  area_ = kPi * r0 * r0;
  aspect_ = rng_.uniform(0.7, 1.4);
  angle_ = rng_.uniform(0.0, 2.0 * kPi);
  double margin = r0 * std::sqrt(std::max(aspect_, 1.0 / aspect_)) + 2.0;
  cx_ = rng_.uniform(margin, cfg_.width - margin);
  cy_ = rng_.uniform(margin, cfg_.height - margin);
  bg_ = 0.5 - cfg_.contrast / 2.0;
  fg_ = 0.5 + cfg_.contrast / 2.0;
}

std::pair<Tensor, Tensor> ClipGenerator::next() {
  int h = cfg_.height, w = cfg_.width;
  double a = std::sqrt(area_ * aspect_ / kPi);
  double b = std::sqrt(area_ / (kPi * aspect_));
  double ca = std::cos(angle_), sa = std::sin(angle_);
  double edge = 1.5 / std::min(a, b);  // soft edge, ~1.5 px outside the mask

  Tensor mask({h, w});
  Tensor frame({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double dx = x - cx_, dy = y - cy_;
      double u = (dx * ca + dy * sa) / a;
      double v = (-dx * sa + dy * ca) / b;
      double r = std::sqrt(u * u + v * v);
      double alpha = r <= 1.0 ? 1.0 : std::clamp((1.0 + edge - r) / edge, 0.0, 1.0);
      mask.at2(y, x) = r <= 1.0 ? 1.0 : 0.0;
      double val = bg_ + (fg_ - bg_) * alpha;
      if (cfg_.noise_sigma > 0.0) val += cfg_.noise_sigma * rng_.normal();
      val = std::clamp(val, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) frame.at3(c, y, x) = val;
    }

  // Advance state for the next frame: bounded random-walk centroid and
  // multiplicative area jitter.
  double phi = rng_.uniform(0.0, 2.0 * kPi);
  double rho = rng_.uniform(0.0, cfg_.motion_amplitude);
  double margin = std::max(a, b) + 2.0;
  cx_ = std::clamp(cx_ + rho * std::cos(phi), margin, w - margin);
  cy_ = std::clamp(cy_ + rho * std::sin(phi), margin, h - margin);
  double jitter = rng_.uniform(-cfg_.scale_jitter, cfg_.scale_jitter);
  double min_area = kPi * 6.0 * 6.0;
  double max_axis = 0.35 * std::min(h, w);
  double max_area = kPi * max_axis * max_axis / std::max(aspect_, 1.0 / aspect_);
  area_ = std::clamp(area_ * (1.0 + jitter), min_area, max_area);
  ++t_;
  return {std::move(frame), std::move(mask)};
}

VideoClip gen_clip(const SynthConfig& cfg, int num_reference) {
  cfg.validate();
  int t = cfg.num_frames;
  int r = std::clamp(num_reference, 1, t - 1);
  ClipGenerator gen(cfg);
  VideoClip clip;
  for (int i = 0; i < t; ++i) {
    auto [frame, mask] = gen.next();
    clip.frames.push_back(std::move(frame));
    clip.masks.push_back(std::move(mask));
    clip.timestamps.push_back(i);
    clip.roles.push_back(i < r ? Role::Reference : (i == t - 1 ? Role::Current : Role::Adjacent));
  }
  validate_roles(clip.roles);
  return clip;
}

}  // namespace cmsa

#include <doctest.h>

#include <cmath>

#include "cmsa/synth.hpp"

using namespace cmsa;

TEST_CASE("same config and seed reproduce the clip byte for byte") {
  SynthConfig cfg;
  cfg.seed = 21;
  VideoClip a = gen_clip(cfg), b = gen_clip(cfg);
  REQUIRE(a.length() == b.length());
  for (int t = 0; t < a.length(); ++t) {
    CHECK(a.frames[t].data == b.frames[t].data);
    CHECK(a.masks[t].data == b.masks[t].data);
  }
}

TEST_CASE("zero contrast leaves only noise between fg and bg") {
  SynthConfig cfg;
  cfg.contrast = 0.0;
  cfg.noise_sigma = 0.0;
  cfg.seed = 4;
  VideoClip clip = gen_clip(cfg);
  const Tensor& f = clip.frames[0];
  const Tensor& m = clip.masks[0];
  double fg = 0, bg = 0;
  int nfg = 0, nbg = 0;
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      // stay off the soft 1.5 px rim around the shape
      bool near = false;
      for (int dy = -2; dy <= 2 && !near; ++dy)
        for (int dx = -2; dx <= 2 && !near; ++dx) {
          int yy = std::clamp(y + dy, 0, cfg.height - 1), xx = std::clamp(x + dx, 0, cfg.width - 1);
          if (m.at2(yy, xx) != m.at2(y, x)) near = true;
        }
      if (near) continue;
      if (m.at2(y, x) > 0.5) {
        fg += f.at3(0, y, x);
        ++nfg;
      } else {
        bg += f.at3(0, y, x);
        ++nbg;
      }
    }
  REQUIRE(nfg > 0);
  REQUIRE(nbg > 0);
  CHECK(std::abs(fg / nfg - bg / nbg) < 1e-9);
}

TEST_CASE("per-frame blob area stays within the scale-jitter band") {
  SynthConfig cfg;
  cfg.height = cfg.width = 64;
  cfg.num_frames = 6;
  cfg.seed = 7;
  VideoClip clip = gen_clip(cfg);
  double prev = -1.0;
  for (int t = 0; t < clip.length(); ++t) {
    double area = 0.0;
    for (double v : clip.masks[t].data) area += v;
    REQUIRE(area > 0.0);
    if (prev > 0.0) {
      double ratio = area / prev;
      // rasterization adds a few percent on top of the jitter itself
      CHECK(ratio > 1.0 - cfg.scale_jitter - 0.08);
      CHECK(ratio < 1.0 + cfg.scale_jitter + 0.08);
    }
    prev = area;
  }
}

TEST_CASE("streaming generation is a prefix of the clip") {
  SynthConfig cfg;
  cfg.num_frames = 6;
  cfg.seed = 11;
  VideoClip clip = gen_clip(cfg);
  ClipGenerator gen(cfg);
  for (int t = 0; t < 6; ++t) {
    auto [frame, mask] = gen.next();
    CHECK(frame.data == clip.frames[t].data);
    CHECK(mask.data == clip.masks[t].data);
  }
}

TEST_CASE("masks are binary and frames stay in range") {
  SynthConfig cfg;
  cfg.seed = 13;
  VideoClip clip = gen_clip(cfg);
  for (const auto& m : clip.masks)
    for (double v : m.data) CHECK((v == 0.0 || v == 1.0));
  for (const auto& f : clip.frames)
    for (double v : f.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("role layout and validation") {
  SynthConfig cfg;
  cfg.num_frames = 6;
  VideoClip clip = gen_clip(cfg, 2);
  REQUIRE(clip.roles.size() == 6);
  CHECK(clip.roles[0] == Role::Reference);
  CHECK(clip.roles[1] == Role::Reference);
  CHECK(clip.roles[2] == Role::Adjacent);
  CHECK(clip.roles[5] == Role::Current);
  CHECK_NOTHROW(validate_roles(clip.roles));
  CHECK_THROWS(validate_roles({Role::Current, Role::Reference}));
  CHECK_THROWS(validate_roles({Role::Reference, Role::Adjacent}));
}

TEST_CASE("config validation rejects bad sizes") {
  SynthConfig cfg;
  cfg.height = 60;
  CHECK_THROWS(cfg.validate());
  cfg.height = 64;
  cfg.num_frames = 1;
  CHECK_THROWS(cfg.validate());
}

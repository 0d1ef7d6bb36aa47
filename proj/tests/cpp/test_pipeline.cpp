#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "cmsa/imageio.hpp"
#include "cmsa/pipeline.hpp"

using namespace cmsa;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.image_size = 64;
  cfg.channels = 8;
  cfg.heads = 4;
  cfg.clip_len = 4;
  cfg.num_refs = 2;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("config validation and json round trip") {
  RunConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  RunConfig back = RunConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());

  cfg.clip_len = 3;  // violates T > R + 1
  CHECK_THROWS(cfg.validate());
  cfg = tiny_config();
  cfg.image_size = 60;
  CHECK_THROWS(cfg.validate());
  cfg = tiny_config();
  cfg.channels = 6;  // not divisible by 4 heads
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("paper-default configuration") {
  RunConfig cfg;
  CHECK(cfg.image_size == 352);
  CHECK(cfg.channels == 32);
  CHECK(cfg.heads == 4);
  CHECK(cfg.clip_len == 6);
  CHECK(cfg.num_refs == 2);
  CHECK(cfg.lr == 1e-4);
  CHECK(cfg.weight_decay == 1e-4);
  CHECK(cfg.epochs == 30);
  CHECK(cfg.batch_size == 4);
  CHECK(cfg.cooldown_sem == 5);
  CHECK(cfg.cooldown_conf == 1);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("zero epochs leaves the initialization untouched") {
  RunConfig cfg = tiny_config();
  Model model = init_model(cfg);
  Model fresh = init_model(cfg);
  auto clips = make_synth_dataset(cfg, 1, 99);
  TrainResult res = train_model(model, clips, 0, 1, cfg.lr, cfg.weight_decay);
  CHECK(res.steps == 0);
  ParamStore a = model.params(), b = fresh.params();
  for (std::size_t i = 0; i < a.items.size(); ++i)
    CHECK(a.items[i].second.value().data == b.items[i].second.value().data);
}

TEST_CASE("one training step on synthetic clips runs and logs") {
  RunConfig cfg = tiny_config();
  Model model = init_model(cfg);
  auto clips = make_synth_dataset(cfg, 2, 50);
  std::ostringstream log;
  TrainResult res = train_model(model, clips, 1, 2, 1e-3, 1e-4, &log);
  CHECK(res.steps == 1);
  CHECK(res.final_loss > 0.0);
  CHECK(log.str().find("\"loss\"") != std::string::npos);
}

TEST_CASE("single-frame stream yields one prediction with both slots on frame 0") {
  RunConfig cfg = tiny_config();
  Model model = init_model(cfg);
  auto clips = make_synth_dataset(cfg, 1, 60);
  StreamingSegmenter seg(model);
  auto step = seg.push(clips[0].frames[0]);
  CHECK(step.prob.shape == std::vector<int>{64, 64});
  CHECK(step.sem_frame == 0);
  CHECK(step.conf_frame == 0);
  CHECK(seg.state().initialized);
  CHECK(seg.state().last_t == 0);
  for (double v : step.prob.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("disabled reference maintenance keeps frame 0 in both slots") {
  RunConfig cfg = tiny_config();
  cfg.no_dmr = true;
  Model model = init_model(cfg);
  auto clips = make_synth_dataset(cfg, 1, 61);
  StreamingSegmenter seg(model);
  for (int t = 0; t < 4; ++t) {
    auto step = seg.push(clips[0].frames[t]);
    CHECK(step.sem_frame == 0);
    CHECK(step.conf_frame == 0);
  }
  CHECK(seg.state().sem_slot.last_update_t == 0);
  CHECK(seg.state().conf_slot.last_update_t == 0);
}

TEST_CASE("streaming inference is deterministic") {
  RunConfig cfg = tiny_config();
  Model model = init_model(cfg);
  auto clips = make_synth_dataset(cfg, 1, 62);
  StreamingSegmenter a(model), b(model);
  for (int t = 0; t < cfg.clip_len; ++t) {
    auto sa = a.push(clips[0].frames[t]);
    auto sb = b.push(clips[0].frames[t]);
    CHECK(sa.prob.data == sb.prob.data);
  }
}

TEST_CASE("clip export and reload round trip within 8-bit quantization") {
  SynthConfig scfg;
  scfg.seed = 77;
  VideoClip clip = gen_clip(scfg);
  auto dir = (std::filesystem::temp_directory_path() / "cmsa_clip_rt").string();
  export_clip(clip, scfg, dir);
  VideoClip back = load_clip_dir(dir, 2);
  std::filesystem::remove_all(dir);
  REQUIRE(back.length() == clip.length());
  double dev = 0.0;
  for (int t = 0; t < clip.length(); ++t) {
    for (long i = 0; i < clip.frames[t].numel(); ++i)
      dev = std::max(dev, std::abs(clip.frames[t].data[i] - back.frames[t].data[i]));
    CHECK(back.masks[t].data == clip.masks[t].data);  // masks are exactly {0,1}
  }
  CHECK(dev <= 0.5 / 255.0 + 1e-12);
  CHECK(back.roles == clip.roles);
}

TEST_CASE("inference-time ablation flags compose") {
  RunConfig cfg = tiny_config();
  cfg.no_cma = true;
  cfg.no_dmr = true;  // the "w/o CMA+DMR" row configuration
  Model model = init_model(cfg);
  auto clips = make_synth_dataset(cfg, 1, 63);
  StreamingSegmenter seg(model);
  for (int t = 0; t < cfg.clip_len; ++t) CHECK_NOTHROW(seg.push(clips[0].frames[t]));
}

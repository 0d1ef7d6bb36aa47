#include "cmsa/encoder.hpp"

#include <stdexcept>

namespace cmsa {

namespace {

int block_in_channels(int c, int i) { return i == 0 ? c : stage_channels(c, i - 1); }

}  // namespace

void EncoderParams::collect(ParamStore& store, const std::string& prefix) const {
  store.add(prefix + ".stem.w", stem.w);
  store.add(prefix + ".stem.b", stem.b);
  store.add(prefix + ".stem_norm.gamma", stem_norm.gamma);
  store.add(prefix + ".stem_norm.beta", stem_norm.beta);
  for (int i = 0; i < 4; ++i) {
    std::string p = prefix + ".block" + std::to_string(i);
    store.add(p + ".down.w", blocks[i].down.w);
    store.add(p + ".down.b", blocks[i].down.b);
    store.add(p + ".down_norm.gamma", blocks[i].down_norm.gamma);
    store.add(p + ".down_norm.beta", blocks[i].down_norm.beta);
    store.add(p + ".res1.w", blocks[i].res1.w);
    store.add(p + ".res1.b", blocks[i].res1.b);
    store.add(p + ".res_norm.gamma", blocks[i].res_norm.gamma);
    store.add(p + ".res_norm.beta", blocks[i].res_norm.beta);
    store.add(p + ".res2.w", blocks[i].res2.w);
    store.add(p + ".res2.b", blocks[i].res2.b);
  }
}

long EncoderParams::expected_param_count(int c) {
  // stem: 3x3 conv 3->C + bias + norm affine
  long n = 9L * 3 * c + c + 2L * c;
  for (int i = 0; i < 4; ++i) {
    long in = block_in_channels(c, i);
    long out = stage_channels(c, i);
    n += 9 * in * out + out + 2 * out;   // down conv + norm
    n += 9 * out * out + out + 2 * out;  // res1 + norm
    n += 9 * out * out + out;            // res2
  }
  return n;
}

EncoderParams init_encoder(std::uint64_t seed, int base_channels) {
  if (base_channels < 1) throw std::invalid_argument("init_encoder: base_channels must be >= 1");
  Rng rng(seed);
  EncoderParams p;
  p.base_channels = base_channels;
  p.stem = ConvLayer::init(rng, base_channels, 3, 3, 2, 1);
  p.stem_norm = NormLayer::init(base_channels);
  for (int i = 0; i < 4; ++i) {
    int in = block_in_channels(base_channels, i);
    int out = stage_channels(base_channels, i);
    p.blocks[i].down = ConvLayer::init(rng, out, in, 3, 2, 1);
    p.blocks[i].down_norm = NormLayer::init(out);
    p.blocks[i].res1 = ConvLayer::init(rng, out, out, 3, 1, 1);
    p.blocks[i].res_norm = NormLayer::init(out);
    p.blocks[i].res2 = ConvLayer::init(rng, out, out, 3, 1, 1);
  }
  return p;
}

FeaturePyramid encode_frame(const EncoderParams& params, const ag::Var& frame) {
  const Tensor& f = frame.value();
  if (f.rank() != 3 || f.dim(0) != 3) throw std::invalid_argument("encode_frame: expects [3,H,W]");
  if (f.dim(1) % 32 != 0 || f.dim(2) % 32 != 0)
    throw std::invalid_argument("encode_frame: H and W must be divisible by 32");
  ag::Var x = ag::gelu(params.stem_norm(params.stem(frame)));
  FeaturePyramid pyr;
  for (int i = 0; i < 4; ++i) {
    const auto& b = params.blocks[i];
    ag::Var y = ag::gelu(b.down_norm(b.down(x)));
    ag::Var r = b.res2(ag::gelu(b.res_norm(b.res1(y))));
    x = ag::add(y, r);
    pyr[i] = x;
  }
  return pyr;
}

std::vector<FeaturePyramid> encode_clip(const EncoderParams& params, const VideoClip& clip) {
  validate_roles(clip.roles);
  std::vector<FeaturePyramid> out;
  out.reserve(clip.frames.size());
  for (const auto& f : clip.frames) out.push_back(encode_frame(params, ag::Var::constant(f)));
  return out;
}

}  // namespace cmsa

#include <doctest.h>

#include "cmsa/encoder.hpp"

using namespace cmsa;

TEST_CASE("pyramid shape law at the minimum size") {
  ag::NoGradGuard ng;
  EncoderParams enc = init_encoder(3, 4);
  FeaturePyramid pyr = encode_frame(enc, ag::Var::constant(Tensor::full({3, 32, 32}, 0.5)));
  CHECK(pyr[0].value().shape == std::vector<int>{8, 8, 8});
  CHECK(pyr[1].value().shape == std::vector<int>{16, 4, 4});
  CHECK(pyr[2].value().shape == std::vector<int>{32, 2, 2});
  CHECK(pyr[3].value().shape == std::vector<int>{64, 1, 1});
}

TEST_CASE("initialization is seed-deterministic") {
  ParamStore a, b, c;
  init_encoder(5, 8).collect(a);
  init_encoder(5, 8).collect(b);
  init_encoder(6, 8).collect(c);
  REQUIRE(a.items.size() == b.items.size());
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].second.value().data != b.items[i].second.value().data) all_equal = false;
    if (a.items[i].second.value().data != c.items[i].second.value().data) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("parameter count matches the closed form") {
  for (int c : {4, 8, 32}) {
    ParamStore store;
    init_encoder(1, c).collect(store);
    CHECK(store.total_count() == EncoderParams::expected_param_count(c));
  }
}

TEST_CASE("identical frames produce identical pyramids (weight sharing)") {
  ag::NoGradGuard ng;
  EncoderParams enc = init_encoder(9, 4);
  Tensor frame = Tensor::zeros({3, 32, 32});
  for (long i = 0; i < frame.numel(); ++i) frame.data[i] = (i % 7) / 7.0;
  FeaturePyramid a = encode_frame(enc, ag::Var::constant(frame));
  FeaturePyramid b = encode_frame(enc, ag::Var::constant(frame));
  for (int s = 0; s < 4; ++s) CHECK(a[s].value().data == b[s].value().data);
}

TEST_CASE("non-multiple-of-32 input is rejected") {
  EncoderParams enc = init_encoder(2, 4);
  CHECK_THROWS(encode_frame(enc, ag::Var::constant(Tensor::zeros({3, 48, 64}))));
}

#include <doctest.h>

#include <algorithm>

#include "cmsa/checks.hpp"
#include "cmsa/cma.hpp"
#include "cmsa/oracles.hpp"
#include "cmsa/rng.hpp"

using namespace cmsa;

namespace {

Tensor randn(Rng& rng, std::vector<int> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, 1.0);
  return t;
}

FeaturePyramid random_pyramid(Rng& rng, int base_c) {
  const int sizes[4] = {8, 4, 2, 2};
  FeaturePyramid p;
  for (int s = 0; s < 4; ++s)
    p[s] = ag::Var::constant(randn(rng, {stage_channels(base_c, s), sizes[s], sizes[s]}));
  return p;
}

}  // namespace

TEST_CASE("token set concatenates four aligned scales channel-wise") {
  ag::NoGradGuard ng;
  Rng rng(2);
  CMAParams cma = init_cma(3, 2, 4, 2);
  CHECK(cma.token_channels() == 16);
  FrameTokens ft = build_token_set(random_pyramid(rng, 2), cma, Role::Current);
  CHECK(ft.tokens.value().shape == std::vector<int>{16, 2, 2});
  CHECK(ft.aligned.value().shape == std::vector<int>{4, 2, 2});

  CMAParams single = init_cma(3, 2, 4, 2, 3, /*multiscale=*/false);
  CHECK(single.token_channels() == 4);
  FrameTokens fs = build_token_set(random_pyramid(rng, 2), single, Role::Current);
  // single-scale degenerate case: the token set is the aligned feature itself
  CHECK(fs.tokens.value().data == fs.aligned.value().data);
}

TEST_CASE("causal visibility per role") {
  std::vector<Role> roles = {Role::Reference, Role::Reference, Role::Adjacent,
                             Role::Adjacent,  Role::Adjacent,  Role::Current};
  CHECK(causal_frames(roles, 0) == std::vector<int>{0});
  CHECK(causal_frames(roles, 1) == std::vector<int>{1});
  CHECK(causal_frames(roles, 3) == std::vector<int>{0, 1, 2, 3});
  CHECK(causal_frames(roles, 5) == std::vector<int>{0, 1, 2, 3, 4, 5});
  auto full = causal_frames(roles, 1, /*full_visibility=*/true);
  CHECK(full.size() == 6);
}

TEST_CASE("attention degenerates correctly") {
  ag::NoGradGuard ng;
  Rng rng(4);
  // one key: output is that value row, whatever the query
  Tensor q = randn(rng, {3, 4}), k = randn(rng, {1, 4}), v = randn(rng, {1, 4});
  Tensor out = attention(ag::Var::constant(q), ag::Var::constant(k), ag::Var::constant(v)).value();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) CHECK(out.at2(r, c) == doctest::Approx(v.at2(0, c)).epsilon(1e-12));

  // identical value rows: any softmax mixture returns that row
  Tensor k2 = randn(rng, {5, 4});
  Tensor v2 = Tensor::zeros({5, 4});
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c) v2.at2(r, c) = 0.3 * c;
  Tensor out2 = attention(ag::Var::constant(q), ag::Var::constant(k2), ag::Var::constant(v2)).value();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) CHECK(out2.at2(r, c) == doctest::Approx(0.3 * c).epsilon(1e-12));

  // random case against the independent dense loop
  Tensor q3 = randn(rng, {4, 8}), k3 = randn(rng, {4, 8}), v3 = randn(rng, {4, 8});
  Tensor got = attention(ag::Var::constant(q3), ag::Var::constant(k3), ag::Var::constant(v3)).value();
  Tensor want = oracle::dense_attention_ref(q3, k3, v3);
  for (long i = 0; i < got.numel(); ++i) CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-9));
}

TEST_CASE("attention rows are normalized") {
  ag::NoGradGuard ng;
  Rng rng(5);
  CMAParams cma = init_cma(6, 2, 4, 2);
  std::vector<Role> roles = {Role::Reference, Role::Reference, Role::Adjacent, Role::Current};
  std::vector<FrameTokens> tokens;
  for (Role r : roles) tokens.push_back(build_token_set(random_pyramid(rng, 2), cma, r));
  std::vector<CmaFrameAudit> audit;
  cma_forward_tokens(tokens, cma, false, &audit);
  REQUIRE(audit.size() == 4);
  for (const auto& fa : audit) {
    CHECK(fa.row_sum_min > 1.0 - 1e-6);
    CHECK(fa.row_sum_max < 1.0 + 1e-6);
  }
  CHECK(audit[2].kv_frames == std::vector<int>{0, 1, 2});
}

TEST_CASE("residual identity with zeroed projections") {
  ag::NoGradGuard ng;
  Rng rng(6);
  CMAParams cma = init_cma(7, 2, 4, 2);
  std::fill(cma.out.w.value().data.begin(), cma.out.w.value().data.end(), 0.0);
  std::fill(cma.out.b.value().data.begin(), cma.out.b.value().data.end(), 0.0);
  std::fill(cma.ffn2.w.value().data.begin(), cma.ffn2.w.value().data.end(), 0.0);
  std::fill(cma.ffn2.b.value().data.begin(), cma.ffn2.b.value().data.end(), 0.0);
  std::vector<Role> roles = {Role::Reference, Role::Adjacent, Role::Current};
  std::vector<FrameTokens> tokens;
  for (Role r : roles) tokens.push_back(build_token_set(random_pyramid(rng, 2), cma, r));
  std::vector<ag::Var> out = cma_forward_tokens(tokens, cma);
  for (int t = 0; t < 3; ++t) {
    const Tensor& got = out[t].value();
    const Tensor& want = tokens[t].aligned.value();
    for (long i = 0; i < got.numel(); ++i) CHECK(got.data[i] == want.data[i]);
  }
}

TEST_CASE("matches the masked dense oracle") {
  auto r = checks::check_masked_dense(31, 4, 1e-9);
  CHECK_MESSAGE(r.pass, r.detail);
}

TEST_CASE("token set matches the oracle recomputation") {
  auto r = checks::check_token_set(32, 1e-9);
  CHECK_MESSAGE(r.pass, r.detail);
}

TEST_CASE("perturbing an invisible frame leaves outputs bit-identical") {
  auto r = checks::check_causality(33, 64, 8, 5, 2);
  CHECK_MESSAGE(r.pass, r.detail);
}

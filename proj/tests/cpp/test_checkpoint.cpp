#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cmsa/checkpoint.hpp"
#include "cmsa/checks.hpp"
#include "cmsa/rng.hpp"

using namespace cmsa;

namespace {
std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("container round trip preserves names, shapes and metadata") {
  Rng rng(2);
  std::vector<NamedTensor> tensors;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  for (auto& v : a.data) v = rng.normal(0.0, 1.0);
  for (auto& v : b.data) v = rng.normal(0.0, 1.0);
  tensors.push_back({"alpha", a});
  tensors.push_back({"beta", b});
  std::string path = temp_path("cmsa_container_test.bin");
  save_container(path, tensors, R"({"kind":"test"})");

  std::string meta;
  auto loaded = load_container(path, &meta);
  std::filesystem::remove(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].name == "alpha");
  CHECK(loaded[1].name == "beta");
  CHECK(loaded[0].tensor.shape == a.shape);
  CHECK(meta.find("\"kind\"") != std::string::npos);
  // float32 payload resolution
  for (long i = 0; i < a.numel(); ++i)
    CHECK(loaded[0].tensor.data[i] == doctest::Approx(a.data[i]).epsilon(1e-6));
}

TEST_CASE("corrupt magic is rejected") {
  std::string path = temp_path("cmsa_bad_magic.bin");
  std::ofstream out(path, std::ios::binary);
  out << "NOTMAGIC" << std::string(64, '\0');
  out.close();
  CHECK_THROWS(load_container(path));
  std::filesystem::remove(path);
}

TEST_CASE("loading into a mismatched parameter store fails") {
  Rng rng(3);
  ParamStore save_store;
  save_store.add("w", ag::Var::param(Tensor::zeros({2, 2})));
  std::string path = temp_path("cmsa_mismatch.bin");
  save_params(path, save_store, "{}");

  ParamStore wrong_shape;
  wrong_shape.add("w", ag::Var::param(Tensor::zeros({3, 2})));
  CHECK_THROWS(load_params(path, wrong_shape));

  ParamStore wrong_name;
  wrong_name.add("v", ag::Var::param(Tensor::zeros({2, 2})));
  CHECK_THROWS(load_params(path, wrong_name));
  std::filesystem::remove(path);
}

TEST_CASE("full model checkpoint round trip") {
  auto r = checks::check_checkpoint_roundtrip(7);
  CHECK_MESSAGE(r.pass, r.detail);
}

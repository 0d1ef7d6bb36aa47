#pragma once

#include <string>
#include <vector>

#include "cmsa/params.hpp"
#include "cmsa/tensor.hpp"

namespace cmsa {

// Single-file tensor container shared by all modules:
//   bytes 0..7   magic "CMSATNSR"
//   bytes 8..15  little-endian u64 header length N
//   bytes 16..   JSON header (N bytes): {"tensors":[{name,shape,dtype,offset}...],"meta":{...}}
//   then         contiguous float32 little-endian payloads in header order
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void save_container(const std::string& path, const std::vector<NamedTensor>& tensors,
                    const std::string& meta_json);
std::vector<NamedTensor> load_container(const std::string& path, std::string* meta_json = nullptr);

void save_params(const std::string& path, const ParamStore& params, const std::string& meta_json);
// Loads into an existing store; every stored name must match a registered
// parameter of the same shape.
std::string load_params(const std::string& path, ParamStore& params);

}  // namespace cmsa

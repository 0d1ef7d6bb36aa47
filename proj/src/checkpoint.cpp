#include "cmsa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cmsa {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'S', 'A', 'T', 'N', 'S', 'R'};

static_assert(std::endian::native == std::endian::little,
              "container writer assumes a little-endian host");

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void save_container(const std::string& path, const std::vector<NamedTensor>& tensors,
                    const std::string& meta_json) {
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& nt : tensors) {
    nlohmann::json e;
    e["name"] = nt.name;
    e["shape"] = nt.tensor.shape;
    e["dtype"] = "f32";
    e["offset"] = offset;
    header["tensors"].push_back(e);
    offset += static_cast<std::uint64_t>(nt.tensor.numel()) * 4;
  }
  header["meta"] = meta_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta_json);
  std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(kMagic, 8);
  write_u64(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& nt : tensors) {
    std::vector<float> buf(nt.tensor.data.begin(), nt.tensor.data.end());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<NamedTensor> load_container(const std::string& path, std::string* meta_json) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("bad container magic: " + path);
  std::uint64_t hlen = read_u64(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw std::runtime_error("truncated container header: " + path);
  nlohmann::json header = nlohmann::json::parse(hs);
  if (meta_json) *meta_json = header.value("meta", nlohmann::json::object()).dump();

  std::vector<NamedTensor> out;
  for (const auto& e : header.at("tensors")) {
    NamedTensor nt;
    nt.name = e.at("name").get<std::string>();
    std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    std::vector<float> buf(static_cast<std::size_t>(t.numel()));
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!is) throw std::runtime_error("truncated container payload: " + path);
    for (long i = 0; i < t.numel(); ++i) t.data[i] = buf[i];
    nt.tensor = std::move(t);
    out.push_back(std::move(nt));
  }
  return out;
}

void save_params(const std::string& path, const ParamStore& params, const std::string& meta_json) {
  std::vector<NamedTensor> tensors;
  for (const auto& [name, v] : params.items) tensors.push_back({name, v.value()});
  save_container(path, tensors, meta_json);
}

std::string load_params(const std::string& path, ParamStore& params) {
  std::string meta;
  auto tensors = load_container(path, &meta);
  for (auto& nt : tensors) {
    ag::Var v = params.find(nt.name);
    if (v.value().shape != nt.tensor.shape)
      throw std::runtime_error("checkpoint shape mismatch for " + nt.name + ": " + v.value().shape_str() +
                               " vs " + nt.tensor.shape_str());
    v.value() = std::move(nt.tensor);
  }
  return meta;
}

}  // namespace cmsa

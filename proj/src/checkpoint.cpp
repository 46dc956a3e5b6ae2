#include "volskin/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace volskin {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& in) {
  const uint32_t n = read_u32(in);
  if (n > (1u << 20)) throw std::runtime_error("tensor file: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

std::string TensorFile::meta_value(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return fallback;
}

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  if (file.magic.size() != 8) throw std::invalid_argument("tensor file: magic must be 8 bytes");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("tensor file: cannot open " + path.string());
  out.write(file.magic.data(), 8);
  write_u32(out, file.version);
  write_u32(out, static_cast<uint32_t>(file.meta.size()));
  for (const auto& [k, v] : file.meta) {
    write_str(out, k);
    write_str(out, v);
  }
  write_u32(out, static_cast<uint32_t>(file.tensors.size()));
  for (const auto& [name, t] : file.tensors) {
    write_str(out, name);
    write_u32(out, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(out, static_cast<uint32_t>(d));
    std::vector<float> payload(t.numel());
    for (int i = 0; i < t.numel(); ++i) payload[i] = static_cast<float>(t.at(i));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("tensor file: short write to " + path.string());
}

TensorFile load_tensor_file(const std::filesystem::path& path, const std::string& expect_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tensor file: cannot open " + path.string());
  TensorFile file;
  file.magic.resize(8);
  in.read(file.magic.data(), 8);
  if (file.magic != expect_magic)
    throw std::runtime_error("tensor file: bad magic in " + path.string());
  file.version = read_u32(in);
  const uint32_t nmeta = read_u32(in);
  for (uint32_t i = 0; i < nmeta; ++i) {
    std::string k = read_str(in);
    std::string v = read_str(in);
    file.meta.emplace_back(std::move(k), std::move(v));
  }
  const uint32_t ntensors = read_u32(in);
  for (uint32_t i = 0; i < ntensors; ++i) {
    std::string name = read_str(in);
    const uint32_t rank = read_u32(in);
    if (rank > 8) throw std::runtime_error("tensor file: implausible rank in " + path.string());
    std::vector<int> shape(rank);
    size_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int>(read_u32(in));
      numel *= static_cast<size_t>(shape[d]);
    }
    std::vector<float> payload(numel);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    std::vector<double> values(numel);
    for (size_t j = 0; j < numel; ++j) values[j] = payload[j];
    file.tensors.emplace_back(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
  }
  if (!in) throw std::runtime_error("tensor file: truncated " + path.string());
  return file;
}

TensorFile checkpoint_from(const ParamStore& store,
                           std::vector<std::pair<std::string, std::string>> meta) {
  TensorFile file;
  file.magic = kCheckpointMagic;
  file.meta = std::move(meta);
  for (int i = 0; i < store.size(); ++i) file.tensors.emplace_back(store.name(i), store.value(i));
  return file;
}

void restore_into(ParamStore& store, const TensorFile& file) {
  for (const auto& [name, t] : file.tensors) {
    const int idx = store.index_of(name);
    if (idx < 0) throw std::runtime_error("checkpoint: unknown parameter " + name);
    if (store.value(idx).shape() != t.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    store.value(idx) = t;
  }
}

}  // namespace volskin

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "volskin/mlp.hpp"

namespace volskin {

// Flat binary container: 8-byte magic, u32 version, ordered metadata string
// pairs, then named tensors (u32 name length, name, u32 rank, u32 dims,
// little-endian float32 payload). Round-trips bit-exactly as long as tensor
// values are float32-representable, which training guarantees by quantizing
// parameters after every optimizer step.
struct TensorFile {
  std::string magic;  // 8 bytes
  uint32_t version = 1;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, ad::Tensor>> tensors;

  std::string meta_value(const std::string& key, const std::string& fallback = "") const;
};

inline constexpr char kCheckpointMagic[] = "VSKCKPT1";
inline constexpr char kOptimizerMagic[] = "VSKADAM1";

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile load_tensor_file(const std::filesystem::path& path, const std::string& expect_magic);

// Snapshots every parameter in store order.
TensorFile checkpoint_from(const ParamStore& store,
                           std::vector<std::pair<std::string, std::string>> meta);
// Replaces matching parameters; throws on missing or shape-mismatched names.
void restore_into(ParamStore& store, const TensorFile& file);

}  // namespace volskin

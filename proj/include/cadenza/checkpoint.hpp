#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cadenza/neuralcore.hpp"

namespace cadenza {

struct NamedMlp {
  std::string name;
  Mlp mlp;
};

// Little-endian container: "MVCK" | u32 version | u32 n_mlps | u32 config_len |
// config JSON bytes | per mlp: u32 name_len, name, u32 n_layers, per layer:
// u32 in, u32 out, u8 activation, f32 dropout, out*in f64 weights (row-major),
// out f64 bias. Weights stay float64 so a reloaded model is bit-identical.
struct Checkpoint {
  std::string config_json;
  std::vector<NamedMlp> mlps;

  const Mlp* find(std::string_view name) const;
};

inline constexpr char kCheckpointMagic[4] = {'M', 'V', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace cadenza

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "van/parameters.hpp"

namespace van {

enum class StoredType : std::uint8_t { Float32 = 0, Float64 = 1 };

struct Checkpoint {
  std::vector<std::pair<std::string, nn::Tensor>> tensors;
  std::string config_echo;
  std::uint64_t seed = 0;

  const nn::Tensor* find(const std::string& name) const;
};

inline constexpr char kCheckpointMagic[] = "VANCKPT";
inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Little-endian records: name, dtype, rank, dims, values; then the config
/// echo and the seed. Float64 round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const std::string& config_echo,
                     std::uint64_t seed, StoredType type = StoredType::Float64);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every store parameter from the checkpoint. Throws listing names
/// that are missing or have a different shape.
void apply_checkpoint(const Checkpoint& checkpoint, ParameterStore& store);

}  // namespace van

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "catn/trainer.hpp"

namespace catn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: 8-byte magic "CATNCKPT", u32 version, u64 header length, UTF-8
// JSON header, then every parameter as little-endian float64 in
// collect_params order.
struct Checkpoint {
  ModelSuite suite;
  TrainConfig config;
  std::size_t step = 0;
};

void save_checkpoint(const ModelSuite& suite, const TrainConfig& cfg, std::size_t step,
                     const std::filesystem::path& path);

// Throws FormatError on a bad magic, version, truncation, or header that
// does not describe the stored networks.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// As above, and also throws FormatError when the stored architecture differs
// from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected);

}  // namespace catn

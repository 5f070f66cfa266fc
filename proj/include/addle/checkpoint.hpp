#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "addle/model.hpp"

namespace addle {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Checkpoint {
  RaterModel model;
  Provenance provenance;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Layout: "ADDLECKP", u32 version, u32 header length, key=value header text,
// u32 tensor count, per tensor (u32 name length, name, u32 rank, u64 extents),
// the float64 payload of every tensor in table order, and a trailing FNV-1a
// 64 checksum of all preceding bytes. Integers and floats are little-endian.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws std::runtime_error naming the path on a bad magic, unknown version,
// truncation, checksum mismatch or inconsistent shapes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);

// jlsl models are stored one file per rater: "<stem>_<index>.ckpt" in `dir`.
std::vector<std::filesystem::path> save_model(const RaterModel& model, const Provenance& provenance,
                                              const std::filesystem::path& dir, const std::string& stem);
RaterModel load_model(const std::filesystem::path& dir, const std::string& stem, Provenance* provenance = nullptr);

}  // namespace addle

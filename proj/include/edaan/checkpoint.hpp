#ifndef EDAAN_CHECKPOINT_HPP_
#define EDAAN_CHECKPOINT_HPP_

// Versioned binary container: magic, version, JSON header, raw float32
// arrays, CRC-32 trailer. Files are written to a temporary name and renamed.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "edaan/tensor.hpp"

namespace edaan {

inline constexpr char kCheckpointMagic[9] = "EDAANCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointData {
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<float>>> arrays;

  const Tensor<float>& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data);
// Throws CheckpointError on bad magic, version mismatch, truncation or
// checksum failure; nothing is returned unless the whole file validates.
CheckpointData decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

}  // namespace edaan

#endif  // EDAAN_CHECKPOINT_HPP_

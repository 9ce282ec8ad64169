#include "edaan/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

namespace edaan {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

const Tensor<float>& CheckpointData::array(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return t;
  throw CheckpointError("checkpoint has no array '" + name + "'");
}

bool CheckpointData::has_array(const std::string& name) const {
  for (const auto& entry : arrays)
    if (entry.first == name) return true;
  return false;
}

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data) {
  nlohmann::json header = data.header;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [name, t] : data.arrays) index.push_back({{"name", name}, {"shape", t.shape()}});
  header["arrays"] = index;
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& entry : data.arrays) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(entry.second.data());
    out.insert(out.end(), p, p + entry.second.count() * sizeof(float));
  }
  put<std::uint32_t>(out, crc_of(out.data(), out.size()));
  return out;
}

CheckpointData decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 + 4 + 8 + 4 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw CheckpointError("not a checkpoint file (bad magic or truncated)");
  std::size_t pos = 8;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version mismatch: expected " + std::to_string(kCheckpointVersion) +
                          ", found " + std::to_string(version));
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (crc_of(bytes.data(), bytes.size() - 4) != stored_crc)
    throw CheckpointError("checkpoint corrupted or truncated (checksum mismatch)");
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (header_len > bytes.size() - pos - 4) throw CheckpointError("checkpoint truncated (header)");
  CheckpointData data;
  try {
    data.header = nlohmann::json::parse(bytes.begin() + pos, bytes.begin() + pos + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header unreadable: ") + e.what());
  }
  pos += header_len;
  try {
    for (const auto& entry : data.header.at("arrays")) {
      Tensor<float> t(entry.at("shape").get<Shape>());
      const std::size_t n = t.count() * sizeof(float);
      if (pos + n > bytes.size() - 4) throw CheckpointError("checkpoint truncated (array data)");
      std::memcpy(t.data(), bytes.data() + pos, n);
      pos += n;
      data.arrays.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint array index invalid: ") + e.what());
  }
  if (pos != bytes.size() - 4) throw CheckpointError("checkpoint has trailing bytes");
  data.header.erase("arrays");
  return data;
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(data);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw CheckpointError("failed writing checkpoint '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place at '" + path + "': " + ec.message());
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace edaan

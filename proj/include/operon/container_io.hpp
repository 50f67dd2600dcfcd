#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "operon/types.hpp"

namespace operon {

// Binary array container: magic, u32 version, u64 manifest length, UTF-8
// JSON manifest {"arrays": [{name, shape, dtype, byte_offset}], "metadata":
// {...}}, then packed little-endian float64 payloads in row-major order.
// Round trips are byte-exact.
struct ArrayContainer {
  std::vector<std::pair<std::string, Matrix>> arrays;
  nlohmann::json metadata;

  void add(const std::string& name, const Matrix& value) { arrays.emplace_back(name, value); }
  const Matrix& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr char kDatasetMagic[5] = "OPDS";
inline constexpr char kModelMagic[5] = "OPGM";

void write_container(const std::string& path, const char magic[5], const ArrayContainer& data);
ArrayContainer read_container(const std::string& path, const char expected_magic[5]);

// Headerless comma-separated values, row-major.
Matrix read_csv_matrix(const std::string& path);
void write_csv_matrix(const std::string& path, const Eigen::Ref<const Matrix>& value);

// FNV-1a over the file bytes; used for provenance records.
std::string file_hash_hex(const std::string& path);

}  // namespace operon

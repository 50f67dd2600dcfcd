#include "operon/container_io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace operon {

namespace {

void write_u32(std::ostream& out, std::uint32_t value) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void write_u64(std::ostream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return value;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return value;
}

static_assert(sizeof(double) == 8, "container format requires 64-bit doubles");

// All supported hosts are little-endian; the format is defined as LE.
void write_f64_row_major(std::ostream& out, const Matrix& value) {
  for (Index i = 0; i < value.rows(); ++i)
    for (Index j = 0; j < value.cols(); ++j) {
      const double x = value(i, j);
      out.write(reinterpret_cast<const char*>(&x), 8);
    }
}

}  // namespace

const Matrix& ArrayContainer::get(const std::string& name) const {
  for (const auto& [key, value] : arrays)
    if (key == name) return value;
  throw CorruptManifest("container: missing array '" + name + "'");
}

bool ArrayContainer::has(const std::string& name) const {
  for (const auto& [key, value] : arrays)
    if (key == name) return true;
  return false;
}

void write_container(const std::string& path, const char magic[5], const ArrayContainer& data) {
  nlohmann::json manifest;
  manifest["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, value] : data.arrays) {
    manifest["arrays"].push_back({{"name", name},
                                  {"shape", {value.rows(), value.cols()}},
                                  {"dtype", "f64"},
                                  {"byte_offset", offset}});
    offset += static_cast<std::uint64_t>(value.size()) * 8;
  }
  manifest["metadata"] = data.metadata;
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(magic, 4);
  write_u32(out, kContainerVersion);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, value] : data.arrays) write_f64_row_major(out, value);
  if (!out) throw std::runtime_error("write failed: " + path);
}

ArrayContainer read_container(const std::string& path, const char expected_magic[5]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, expected_magic, 4) != 0)
    throw CorruptManifest("container: bad magic in " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kContainerVersion)
    throw UnsupportedVersion("container: version " + std::to_string(version) +
                             " not supported");
  const std::uint64_t manifest_len = read_u64(in);
  std::string text(manifest_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) throw CorruptManifest("container: truncated manifest in " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& err) {
    throw CorruptManifest("container: manifest parse error: " + std::string(err.what()));
  }

  ArrayContainer data;
  data.metadata = manifest.value("metadata", nlohmann::json::object());
  const std::uint64_t payload_start = 4 + 4 + 8 + manifest_len;
  for (const auto& entry : manifest.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0)
      throw ShapeMismatch("container: array '" + name + "' has invalid shape");
    if (entry.at("dtype").get<std::string>() != "f64")
      throw UnsupportedVersion("container: dtype must be f64");
    const std::uint64_t byte_offset = entry.at("byte_offset").get<std::uint64_t>();

    Matrix value(shape[0], shape[1]);
    in.seekg(static_cast<std::streamoff>(payload_start + byte_offset));
    for (Index i = 0; i < value.rows(); ++i)
      for (Index j = 0; j < value.cols(); ++j) {
        double x;
        in.read(reinterpret_cast<char*>(&x), 8);
        if (!in)
          throw CorruptManifest("container: truncated payload for '" + name + "' at offset " +
                                std::to_string(payload_start + byte_offset +
                                               8 * static_cast<std::uint64_t>(i * value.cols() + j)));
        value(i, j) = x;
      }
    data.arrays.emplace_back(name, std::move(value));
  }
  return data;
}

Matrix read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* cursor = line.data();
    const char* end = line.data() + line.size();
    while (cursor < end) {
      while (cursor < end && (*cursor == ' ' || *cursor == '\t')) ++cursor;
      double value = 0.0;
      const auto [next, ec] = std::from_chars(cursor, end, value);
      if (ec != std::errc{})
        throw CorruptManifest("csv: parse error in " + path + " line " +
                              std::to_string(rows.size() + 1));
      row.push_back(value);
      cursor = next;
      while (cursor < end && (*cursor == ' ' || *cursor == '\t' || *cursor == '\r')) ++cursor;
      if (cursor < end) {
        if (*cursor != ',')
          throw CorruptManifest("csv: expected comma in " + path);
        ++cursor;
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeMismatch("csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix value(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < value.rows(); ++i)
    for (Index j = 0; j < value.cols(); ++j) value(i, j) = rows[i][j];
  return value;
}

void write_csv_matrix(const std::string& path, const Eigen::Ref<const Matrix>& value) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.precision(17);
  for (Index i = 0; i < value.rows(); ++i) {
    for (Index j = 0; j < value.cols(); ++j) {
      if (j) out << ',';
      out << value(i, j);
    }
    out << '\n';
  }
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char buffer[1 << 16];
  while (in) {
    in.read(buffer, sizeof(buffer));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ull;
    }
  }
  std::ostringstream hex;
  hex << std::hex << hash;
  return hex.str();
}

}  // namespace operon

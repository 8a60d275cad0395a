#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace vpb {

/// FNV-1a 64-bit hash, used as payload checksum in cache and checkpoint files.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 1469598103934665603ULL);

/// Append-only little binary buffer. Files are written as
/// [magic(4) | version(u32) | header bytes | payload checksum(u64) | payload].
class BinaryWriter {
 public:
  template <typename T>
  void put(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s);
  void put_matrix(const Eigen::MatrixXd& m);
  void put_matrix(const Eigen::MatrixXcd& m);
  void put_vector(const std::vector<double>& v);
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string();
  Eigen::MatrixXd get_matrix();
  Eigen::MatrixXcd get_cmatrix();
  std::vector<double> get_vector();
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void require(std::size_t n) const;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

/// Writes header + checksummed payload atomically (temp file then rename).
void write_versioned_file(const std::string& path, const char magic[4], std::uint32_t version,
                          const BinaryWriter& header, const BinaryWriter& payload);

struct VersionedFile {
  std::uint32_t version = 0;
  BinaryReader header{{}};
  BinaryReader payload{{}};
};

/// Reads and validates magic and checksum; throws an IO error on mismatch.
VersionedFile read_versioned_file(const std::string& path, const char magic[4]);

}  // namespace vpb

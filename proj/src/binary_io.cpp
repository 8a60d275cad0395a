#include "binary_io.hpp"

#include <filesystem>
#include <fstream>

#include "error.hpp"

namespace vpb {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

void BinaryWriter::put_string(const std::string& s) {
  put<std::uint64_t>(s.size());
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void BinaryWriter::put_matrix(const Eigen::MatrixXd& m) {
  put<std::int64_t>(m.rows());
  put<std::int64_t>(m.cols());
  const auto* p = reinterpret_cast<const char*>(m.data());
  bytes_.insert(bytes_.end(), p, p + sizeof(double) * m.size());
}

void BinaryWriter::put_matrix(const Eigen::MatrixXcd& m) {
  put<std::int64_t>(m.rows());
  put<std::int64_t>(m.cols());
  const auto* p = reinterpret_cast<const char*>(m.data());
  bytes_.insert(bytes_.end(), p, p + 2 * sizeof(double) * m.size());
}

void BinaryWriter::put_vector(const std::vector<double>& v) {
  put<std::uint64_t>(v.size());
  const auto* p = reinterpret_cast<const char*>(v.data());
  bytes_.insert(bytes_.end(), p, p + sizeof(double) * v.size());
}

void BinaryReader::require(std::size_t n) const {
  if (pos_ + n > bytes_.size()) io_error("truncated binary data");
}

std::string BinaryReader::get_string() {
  const auto n = get<std::uint64_t>();
  require(n);
  std::string s(bytes_.data() + pos_, n);
  pos_ += n;
  return s;
}

Eigen::MatrixXd BinaryReader::get_matrix() {
  const auto rows = get<std::int64_t>();
  const auto cols = get<std::int64_t>();
  if (rows < 0 || cols < 0) io_error("corrupt matrix shape");
  Eigen::MatrixXd m(rows, cols);
  const std::size_t n = sizeof(double) * static_cast<std::size_t>(rows * cols);
  require(n);
  std::memcpy(m.data(), bytes_.data() + pos_, n);
  pos_ += n;
  return m;
}

Eigen::MatrixXcd BinaryReader::get_cmatrix() {
  const auto rows = get<std::int64_t>();
  const auto cols = get<std::int64_t>();
  if (rows < 0 || cols < 0) io_error("corrupt matrix shape");
  Eigen::MatrixXcd m(rows, cols);
  const std::size_t n = 2 * sizeof(double) * static_cast<std::size_t>(rows * cols);
  require(n);
  std::memcpy(m.data(), bytes_.data() + pos_, n);
  pos_ += n;
  return m;
}

std::vector<double> BinaryReader::get_vector() {
  const auto n = get<std::uint64_t>();
  require(n * sizeof(double));
  std::vector<double> v(n);
  std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
  pos_ += n * sizeof(double);
  return v;
}

void write_versioned_file(const std::string& path, const char magic[4], std::uint32_t version,
                          const BinaryWriter& header, const BinaryWriter& payload) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) io_error("cannot open '" + tmp.string() + "' for writing");
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t header_size = header.bytes().size();
    out.write(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
    out.write(header.bytes().data(), static_cast<std::streamsize>(header_size));
    const std::uint64_t sum = fnv1a(payload.bytes().data(), payload.bytes().size());
    const std::uint64_t payload_size = payload.bytes().size();
    out.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
    out.write(reinterpret_cast<const char*>(&payload_size), sizeof(payload_size));
    out.write(payload.bytes().data(), static_cast<std::streamsize>(payload_size));
    if (!out) io_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target, ec);
  if (ec) io_error("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

VersionedFile read_versioned_file(const std::string& path, const char magic[4]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open '" + path + "'");
  std::vector<char> all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  BinaryReader r(std::move(all));
  char m[4];
  for (char& c : m) c = r.get<char>();
  if (std::memcmp(m, magic, 4) != 0) io_error("'" + path + "' has wrong magic");
  VersionedFile file;
  file.version = r.get<std::uint32_t>();
  const auto header_size = r.get<std::uint64_t>();
  std::vector<char> header(header_size);
  for (auto& c : header) c = r.get<char>();
  const auto sum = r.get<std::uint64_t>();
  const auto payload_size = r.get<std::uint64_t>();
  std::vector<char> payload(payload_size);
  for (auto& c : payload) c = r.get<char>();
  if (fnv1a(payload.data(), payload.size()) != sum) io_error("'" + path + "' failed checksum");
  file.header = BinaryReader(std::move(header));
  file.payload = BinaryReader(std::move(payload));
  return file;
}

}  // namespace vpb

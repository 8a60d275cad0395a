#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace vpb {

/// Flat "key = value" configuration. Lines starting with '#' and blank lines are
/// ignored; later assignments override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of reals.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  /// Keys present in the file but never read; call after all getters.
  std::vector<std::string> unused_keys() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> used_;
  std::string origin_;
};

/// Canonical text of a key/value map (sorted "key=value" lines) and its FNV-1a hash.
std::string canonical_text(const std::map<std::string, std::string>& kv);
std::string config_hash(const std::map<std::string, std::string>& kv);

/// Shortest round-trip decimal text of a double.
std::string format_double(double x);

}  // namespace vpb

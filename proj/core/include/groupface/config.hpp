#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace groupface {

/// Flat `key=value` settings, one per line, `#` starting a comment.
///
/// Readers mark the keys they consume; finish() rejects whatever is left so a
/// misspelled key never passes silently.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback);
  std::vector<std::size_t> get_sizes(const std::string& key, std::vector<std::size_t> fallback);
  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback);

  /// Marks a key as consumed without reading it.
  void accept(const std::string& key) { used_.insert(key); }
  /// Throws if any key was never read.
  void finish() const;

  std::string to_text() const;

 private:
  const std::string* lookup(const std::string& key);

  std::string origin_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

std::vector<std::string> split_list(const std::string& text, char separator = ',');

}  // namespace groupface

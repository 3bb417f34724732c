#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

static_assert(sizeof(std::size_t) == 8, "64-bit size_t required");

namespace linf {

/// Flat `key = value` text with `[section]` headers. Keys are stored as
/// "section.key"; `#` starts a comment. Values are kept as trimmed strings.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& source = "<config>");
  /// Throws ConfigError naming the path if it cannot be read.
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  void erase(const std::string& key) { entries_.erase(key); }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Sections in sorted order, keys sorted within each.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Typed accessors that mark keys as consumed, so leftovers can be reported.
class ConfigReader {
 public:
  explicit ConfigReader(const KeyValueConfig& cfg) : cfg_(cfg) {}

  void read(const std::string& key, std::size_t& out);
  void read(const std::string& key, double& out);
  void read(const std::string& key, int& out);
  void read(const std::string& key, bool& out);
  void read(const std::string& key, std::string& out);
  void read(const std::string& key, std::vector<std::size_t>& out);
  void read(const std::string& key, std::vector<double>& out);

  /// Throws ConfigError naming the first key with the given prefix that was never read.
  void reject_unknown(const std::vector<std::string>& prefixes) const;

 private:
  const std::string* find(const std::string& key);
  const KeyValueConfig& cfg_;
  std::map<std::string, bool> used_;
};

std::string format_double(double v);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

}  // namespace linf

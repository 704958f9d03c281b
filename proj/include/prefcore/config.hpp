#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace prefcore {

// Flat key=value configuration with optional [section] headers. Keys inside a
// section are addressed as "section.key".
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in);
  static Config parse_string(const std::string& text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Sorted "key=value" lines; the digest is computed over this text.
  std::string normalized() const;
  std::string digest() const;

  // Keys under "prefix." with the prefix stripped.
  Config section(const std::string& prefix) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// 64-bit FNV-1a rendered as 16 lowercase hex digits.
std::string stable_digest(const std::string& text);

}  // namespace prefcore

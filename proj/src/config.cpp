#include "prefcore/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "prefcore/error.hpp"

namespace prefcore {

namespace {

void flatten(const boost::property_tree::ptree& tree, const std::string& prefix,
             Config& out) {
  for (const auto& [key, child] : tree) {
    const std::string full = prefix.empty() ? key : prefix + "." + key;
    if (child.empty()) {
      out.set(full, child.data());
    } else {
      flatten(child, full, out);
    }
  }
}

}  // namespace

Config Config::parse(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw DataError(std::string("config parse error: ") + e.what());
  }
  Config cfg;
  flatten(tree, "", cfg);
  return cfg;
}

Config Config::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  return parse(in);
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used == v->size()) return d;
  } catch (const std::exception&) {
  }
  throw UsageError("config key '" + key + "' expects a number, got '" + *v + "'");
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw UsageError("config key '" + key + "' expects an integer, got '" + *v + "'");
  }
  return out;
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw UsageError("config key '" + key + "' expects a non-negative integer, got '" +
                     *v + "'");
  }
  return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw UsageError("config key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::string Config::normalized() const {
  std::string text;
  for (const auto& [k, v] : values_) text += k + "=" + v + "\n";
  return text;
}

std::string Config::digest() const { return stable_digest(normalized()); }

Config Config::section(const std::string& prefix) const {
  Config out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : values_) {
    if (k.rfind(p, 0) == 0) out.set(k.substr(p.size()), v);
  }
  return out;
}

std::string stable_digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace prefcore

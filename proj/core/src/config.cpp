#include "groupface/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace groupface {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::vector<std::string> split_list(const std::string& text, char separator) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, separator)) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty key");
    if (cfg.values_.contains(key)) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

const std::string* KeyValueConfig::lookup(const std::string& key) {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) {
  const auto* v = lookup(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const double parsed = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw std::invalid_argument(origin_ + ": key '" + key + "' expects a number, got '" + *v + "'");
  }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  std::uint64_t parsed = 0;
  const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
  if (ec != std::errc() || end != v->data() + v->size()) {
    throw std::invalid_argument(origin_ + ": key '" + key + "' expects a non-negative integer, got '" + *v + "'");
  }
  return parsed;
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw std::invalid_argument(origin_ + ": key '" + key + "' expects true or false, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, std::vector<double> fallback) {
  if (!has(key)) {
    accept(key);
    return fallback;
  }
  std::vector<double> out;
  for (const auto& item : split_list(*lookup(key))) {
    KeyValueConfig one;
    one.origin_ = origin_;
    one.set(key, item);
    out.push_back(one.get_double(key, 0.0));
  }
  return out;
}

std::vector<std::size_t> KeyValueConfig::get_sizes(const std::string& key, std::vector<std::size_t> fallback) {
  if (!has(key)) {
    accept(key);
    return fallback;
  }
  std::vector<std::size_t> out;
  for (const auto& item : split_list(*lookup(key))) {
    KeyValueConfig one;
    one.origin_ = origin_;
    one.set(key, item);
    out.push_back(one.get_size(key, 0));
  }
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key, std::vector<std::string> fallback) {
  const auto* v = lookup(key);
  return v ? split_list(*v) : fallback;
}

void KeyValueConfig::finish() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!used_.contains(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw std::invalid_argument(origin_ + ": unknown key(s): " + unknown);
}

std::string KeyValueConfig::to_text() const {
  std::string text;
  for (const auto& [key, value] : values_) text += key + "=" + value + "\n";
  return text;
}

}  // namespace groupface
